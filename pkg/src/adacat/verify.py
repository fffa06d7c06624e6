"""Self-checks: analytic integral and gradients against the brute-force oracles.

Used by ``adacat verify`` and the acceptance tests. Each check returns a
:class:`CheckResult` carrying the worst measured error and its tolerance.
"""

from typing import NamedTuple

import numpy as np

from .armodel import ArDensityModel, HEAD_MODES, smoothed_joint_objective
from .distribution import AdaCatParams, cdf, discrete_log_masses, from_quantiles
from .oracle import (QuadratureConfig, finite_diff_grad, gradient_bias_demo, params_from_logits,
                     quad_smoothed_loglik, smoothed_data_nll)
from .smoothing import LogitVector, SmoothingKernel, smoothed_loglik, smoothed_loglik_grad


class CheckResult(NamedTuple):
    name: str
    passed: bool
    error: float
    tolerance: float
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        text = f"[{status}] {self.name}: error={self.error:.3e} tol={self.tolerance:.1e}"
        return text + (f" ({self.detail})" if self.detail else "")


def random_head_case(rng, kind=None):
    """A seeded ``(logits, kernel, x)`` triple spanning narrow to wide kernels."""
    k = int(rng.integers(1, 13))
    logits = LogitVector(1.5 * rng.standard_normal(k), 1.5 * rng.standard_normal(k))
    kind = kind or ("uniform" if rng.random() < 0.5 else "gaussian")
    kernel = SmoothingKernel(kind, float(10 ** rng.uniform(-4, -0.5)))
    return logits, kernel, float(rng.random())


def _rel_err(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def check_integral(n_cases=500, seed=0, tol=1e-6):
    """Closed-form smoothed objective against both quadrature routes."""
    rng = np.random.default_rng(seed)
    simpson = QuadratureConfig("adaptive-simpson")
    worst_split = worst_simpson = 0.0
    for i in range(n_cases):
        logits, kernel, x = random_head_case(rng, ("uniform", "gaussian")[i % 2])
        params = params_from_logits(logits)
        analytic = smoothed_loglik(logits, kernel, x)
        worst_split = max(worst_split, _rel_err(analytic, quad_smoothed_loglik(params, kernel, x)))
        worst_simpson = max(worst_simpson, _rel_err(analytic, quad_smoothed_loglik(params, kernel, x, simpson)))
    return [
        CheckResult("smoothed integral vs bin-split quadrature", worst_split < tol, worst_split, tol,
                    f"{n_cases} cases, relative"),
        CheckResult("smoothed integral vs adaptive Simpson", worst_simpson < tol, worst_simpson, tol,
                    f"{n_cases} cases, relative"),
    ]


def check_head_gradients(n_cases=200, seed=1, tol=1e-4, step=1e-5):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n_cases):
        logits, kernel, x = random_head_case(rng, ("uniform", "gaussian")[i % 2])
        # keep the kernel wide enough that a finite-difference step does not cross a kink
        kernel = SmoothingKernel(kernel.kind, max(kernel.bandwidth, 1e-2))
        k = logits.phi.size
        grad = smoothed_loglik_grad(logits, kernel, x)

        def f(theta):
            return smoothed_loglik(LogitVector(theta[:k], theta[k:]), kernel, x)

        fd = finite_diff_grad(f, np.concatenate([logits.phi, logits.psi]), step)
        worst = max(worst, float(np.max(np.abs(fd - np.concatenate([grad.d_phi, grad.d_psi])))))
    return CheckResult("head gradient vs finite differences", worst < tol, worst, tol,
                       f"{n_cases} cases, absolute")


def _model_gradient_error(model, X, kernel, step):
    params = model.params()
    _, grads = smoothed_joint_objective(model, X, kernel)
    analytic = np.concatenate([g.ravel() for g in grads])
    theta0 = np.concatenate([p.ravel() for p in params])

    def f(theta):
        off = 0
        for p in params:
            p[...] = theta[off:off + p.size].reshape(p.shape)
            off += p.size
        return smoothed_joint_objective(model, X, kernel)[0]

    fd = finite_diff_grad(f, theta0, step)
    f(theta0)
    return float(np.max(np.abs(fd - analytic)))


def check_model_gradients(seed=2, tol=1e-4, step=1e-5, n_bins=4, hidden=(8,)):
    """Full-network gradients of a tiny two-dimensional model, every head mode and kernel."""
    rng = np.random.default_rng(seed)
    X = rng.random((6, 2))
    results = []
    for mode in HEAD_MODES:
        fixed_w = rng.dirichlet(np.ones(n_bins), size=2) if mode == "fixed-quantile" else None
        model = ArDensityModel(2, n_bins, mode, hidden, fourier_b=1, seed=seed, fixed_w=fixed_w)
        for p in model.params():
            p[...] = 0.5 * rng.standard_normal(p.shape)
        worst = max(_model_gradient_error(model, X, kernel, step)
                    for kernel in (None, SmoothingKernel("uniform", 0.05), SmoothingKernel("gaussian", 0.03)))
        results.append(CheckResult(f"model gradient ({mode})", worst < tol, worst, tol, "tiny model, absolute"))
    return results


def check_normalization(seed=3, tol=1e-9):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        k = int(rng.integers(1, 20))
        params = AdaCatParams(rng.dirichlet(np.ones(k)) * (1 - k * 1e-6) + 1e-6, rng.dirichlet(np.ones(k)))
        worst = max(worst, abs(cdf(params, 1.0) - 1.0))
        for K in (2, 10, 256):
            worst = max(worst, abs(np.exp(discrete_log_masses(params, K)).sum() - 1.0))
        qp = from_quantiles(params.w)
        worst = max(worst, float(np.max(np.abs(cdf(qp, qp.edges) - np.arange(k + 1) / k))))
    return CheckResult("normalization (cdf, discrete masses, quantile edges)", worst < tol, worst, tol)


def check_bias_demo(tol=1e-6):
    report = gradient_bias_demo(tol)
    err = report["asymmetric"]["max_abs_error"]
    gap = max(abs(d) for d in report["difference"][:2])
    return CheckResult("fixed-bin gradient bias matches missing terms", report["tolerance_met"], err, tol,
                       f"psi discrepancy {gap:.4f}")


def check_smoothed_data_gradient(n_points=32, n_bins=4, seed=4, tol=1e-3, kernel=None):
    """Mean analytic smoothed gradient vs the gradient of the smoothed-data NLL."""
    rng = np.random.default_rng(seed)
    kernel = kernel or SmoothingKernel("uniform", 0.05)
    data = rng.beta(2.0, 5.0, size=n_points)
    theta = 0.7 * rng.standard_normal(2 * n_bins)
    logits = LogitVector(theta[:n_bins], theta[n_bins:])
    mean_grad = np.zeros(2 * n_bins)
    for x in data:
        g = smoothed_loglik_grad(logits, kernel, x)
        mean_grad += np.concatenate([g.d_phi, g.d_psi])
    mean_grad /= n_points
    # gradient of the NLL is minus the gradient of the objective
    fd = finite_diff_grad(lambda th: smoothed_data_nll(th, data, kernel), theta, 1e-5)
    err = float(np.max(np.abs(-mean_grad - fd)))
    return CheckResult("smoothed-objective gradient equals smoothed-data NLL gradient", err < tol, err, tol,
                       f"{n_points} points, {kernel.kind} kernel")


def run_all(quick=False):
    n_int, n_grad = (100, 50) if quick else (500, 200)
    results = []
    results += check_integral(n_int)
    results.append(check_head_gradients(n_grad))
    results += check_model_gradients()
    results.append(check_normalization())
    results.append(check_bias_demo())
    results.append(check_smoothed_data_gradient())
    return results
