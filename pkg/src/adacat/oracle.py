"""Brute-force references used to check the analytic machinery.

Nothing here reuses the closed-form smoothed objective from
:mod:`adacat.smoothing`. Kernel masses come from textbook truncated-normal
formulas (cross-checked against ``scipy.stats.truncnorm``) or plain interval
arithmetic, and integrals are evaluated either bin by bin or with
an adaptive Simpson rule over the raw integrand.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats
from scipy.special import ndtr

from .distribution import AdaCatParams, log_pdf, prefix_sums
from .smoothing import softmax_normalize, unsmoothed_loglik_grad, LogitVector
from ._validation import DEFAULT_EPS_WIDTH

QUAD_METHODS = ("bin-split-exact", "adaptive-simpson")
# Gaussian mass beyond 12 standard deviations is below 1e-32
_GAUSS_REACH = 12.0


class MaxDepthExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureConfig:
    method: str = "bin-split-exact"
    abs_tol: float = 1e-11
    max_depth: int = 50

    def __post_init__(self):
        if self.method not in QUAD_METHODS:
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")


def params_from_logits(logits, eps_width=DEFAULT_EPS_WIDTH):
    h = softmax_normalize(logits.phi)
    w = softmax_normalize(logits.psi, floor=eps_width)
    return AdaCatParams(w, h / h.sum(), eps_width)


def _kernel_window(kernel, x):
    """Interval outside which the kernel density is zero (or negligible)."""
    lam = kernel.bandwidth
    if kernel.kind == "uniform":
        return max(0.0, x - lam / 2), min(1.0, x + lam / 2)
    return max(0.0, x - _GAUSS_REACH * lam), min(1.0, x + _GAUSS_REACH * lam)


class TruncatedNormal:
    """Normal(loc, scale) restricted to [0, 1]; pdf, cdf and sf only.

    Written out directly because freezing ``scipy.stats.truncnorm`` costs
    milliseconds per call, which dominates the quadrature checks.
    """

    def __init__(self, loc, scale):
        self.loc, self.scale = float(loc), float(scale)
        self._a, self._b = -self.loc / self.scale, (1.0 - self.loc) / self.scale
        # the centre lies inside the cube, so the normalizer is at least ~1/2
        self._z = float(ndtr(self._b) - ndtr(self._a))

    def pdf(self, t):
        t = np.asarray(t, dtype=np.float64)
        u = (t - self.loc) / self.scale
        dens = np.exp(-0.5 * u * u) / (np.sqrt(2.0 * np.pi) * self.scale * self._z)
        return np.where((t >= 0.0) & (t <= 1.0), dens, 0.0)

    def cdf(self, t):
        u = (np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0) - self.loc) / self.scale
        return (ndtr(u) - ndtr(self._a)) / self._z

    def sf(self, t):
        u = (np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0) - self.loc) / self.scale
        return (ndtr(-u) - ndtr(-self._b)) / self._z


def _truncnorm(kernel, x):
    return TruncatedNormal(x, kernel.bandwidth)


def kernel_mass(kernel, x, a, b):
    """Probability that the truncated kernel centred at ``x`` lands in ``[a, b)``."""
    if b <= a:
        return 0.0
    if kernel.kind == "uniform":
        lo, hi = _kernel_window(kernel, x)
        return max(0.0, min(b, hi) - max(a, lo)) / (hi - lo)
    dist = _truncnorm(kernel, x)
    if a > x:
        return float(dist.sf(a) - dist.sf(b))
    return float(dist.cdf(b) - dist.cdf(a))


def kernel_density_fn(kernel, x):
    """Vectorized density of the truncated kernel centred at ``x``."""
    if kernel.kind == "uniform":
        lo, hi = _kernel_window(kernel, x)
        # closed support: quadrature samples piece endpoints, and a measure-zero
        # change keeps the integrand continuous up to them
        return lambda t: np.where((np.asarray(t) >= lo) & (np.asarray(t) <= hi), 1.0 / (hi - lo), 0.0)
    return _truncnorm(kernel, x).pdf


def kernel_density(kernel, x, t):
    return kernel_density_fn(kernel, x)(np.asarray(t, dtype=np.float64))


def adaptive_simpson(f, a, b, abs_tol=1e-11, max_depth=50, n_init=8):
    """Integrate vectorized ``f`` over each ``[a_i, b_i]`` and return the total.

    Intervals are refined breadth-first; each keeps a share of ``abs_tol``
    proportional to its length.
    """
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    keep = b > a
    a, b = a[keep], b[keep]
    if a.size == 0:
        return 0.0
    span = float((b - a).sum())
    # initial uniform split so narrow features are not stepped over
    frac = np.linspace(0.0, 1.0, n_init + 1)
    lo = (a[:, None] + (b - a)[:, None] * frac[None, :-1]).ravel()
    hi = (a[:, None] + (b - a)[:, None] * frac[None, 1:]).ravel()
    flo, fhi = f(lo), f(hi)
    mid = 0.5 * (lo + hi)
    fmid = f(mid)
    whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
    tol = abs_tol * (hi - lo) / span
    total = 0.0
    for _ in range(max_depth):
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - whole
        # tolerance floor at a few ulps of the piece value; finer is roundoff
        done = np.abs(delta) <= np.maximum(15.0 * tol, 64.0 * np.finfo(float).eps * np.abs(left + right))
        total += float(np.sum((left + right + delta / 15.0)[done]))
        if np.all(done):
            return total
        todo = ~done
        lo, mid, hi = lo[todo], mid[todo], hi[todo]
        flo, fmid, fhi = flo[todo], fmid[todo], fhi[todo]
        lm, rm, flm, frm = lm[todo], rm[todo], flm[todo], frm[todo]
        left, right, tol = left[todo], right[todo], tol[todo]
        lo, mid, hi, flo, fmid, fhi, whole = (
            np.concatenate([lo, mid]),
            np.concatenate([lm, rm]),
            np.concatenate([mid, hi]),
            np.concatenate([flo, fmid]),
            np.concatenate([flm, frm]),
            np.concatenate([fmid, fhi]),
            np.concatenate([left, right]),
        )
        tol = np.concatenate([tol, tol]) / 2.0
    raise MaxDepthExceeded(f"adaptive Simpson did not converge within depth {max_depth}")


def quad_smoothed_loglik(params, kernel, x, config=QuadratureConfig()):
    """Numerically evaluate the expected log density under the kernel at ``x``."""
    x = float(x)
    lo, hi = _kernel_window(kernel, x)
    edges = params.edges
    log_dens = params.log_density
    if config.method == "bin-split-exact":
        total = 0.0
        for j in range(params.k):
            a, b = max(edges[j], lo), min(edges[j + 1], hi)
            if b <= a:
                continue
            mass = kernel_mass(kernel, x, a, b)
            if mass > 0:
                total += mass * log_dens[j]
        return float(total)
    # adaptive Simpson over the raw integrand, one piece per bin intersection
    cuts = np.unique(np.concatenate([[lo, hi], edges[(edges > lo) & (edges < hi)]]))
    if kernel.kind == "gaussian" and lo < x < hi:
        cuts = np.unique(np.concatenate([cuts, [x]]))

    # the model log density is read at each piece's interior; Simpson samples the
    # piece endpoints, where the half-open bin lookup would pick the wrong bin
    a, b = cuts[:-1], cuts[1:]
    pieces = []
    for lo_j, hi_j in zip(a, b):
        j = int(np.searchsorted(edges, 0.5 * (lo_j + hi_j), side="right") - 1)
        const = log_dens[min(j, params.k - 1)]
        pieces.append((lo_j, hi_j, const))
    dens = kernel_density_fn(kernel, x)
    total = 0.0
    for lo_j, hi_j, const in pieces:
        if not np.isfinite(const):
            if kernel_mass(kernel, x, lo_j, hi_j) > 0:
                return float("-inf")
            continue

        def piece_f(t, const=const):
            return dens(t) * const

        total += adaptive_simpson(piece_f, lo_j, hi_j, config.abs_tol / len(pieces), config.max_depth)
    return float(total)


def finite_diff_grad(objective, theta, step=1e-5):
    """Central-difference gradient of a scalar function of a flat parameter vector."""
    if not step > 0:
        raise ValueError("step must be positive")
    theta = np.array(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + step
        up = objective(theta)
        theta[i] = orig - step
        down = objective(theta)
        theta[i] = orig
        grad[i] = (up - down) / (2.0 * step)
    return grad


def mc_smoothed_loglik(logits, kernel, x, n_draws, seed=0, return_stderr=False,
                       eps_width=DEFAULT_EPS_WIDTH):
    """Monte-Carlo estimate of the smoothed objective from perturbed targets."""
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    rng = np.random.default_rng(seed)
    params = params_from_logits(logits, eps_width)
    if kernel.kind == "uniform":
        lo, hi = _kernel_window(kernel, x)
        draws = lo + (hi - lo) * rng.random(n_draws)
    else:
        lam = kernel.bandwidth
        draws = stats.truncnorm(-x / lam, (1.0 - x) / lam, loc=x, scale=lam).rvs(size=n_draws, random_state=rng)
    draws = np.clip(draws, 0.0, np.nextafter(1.0, 0.0))
    values = log_pdf(params, draws)
    mean = float(np.mean(values))
    if return_stderr:
        return mean, float(np.std(values, ddof=1) / np.sqrt(n_draws)) if n_draws > 1 else float("inf")
    return mean


def _expected_loglik_uniform_data(theta, eps_width):
    """E[log p(x)] for x ~ U[0, 1) by piecewise quadrature; ``theta = (psi, phi)``."""
    k = theta.size // 2
    params = params_from_logits(LogitVector(theta[k:], theta[:k]), eps_width)
    total = 0.0
    for j in range(k):
        val, _ = integrate.quad(lambda t: log_pdf(params, t), params.edges[j], params.edges[j + 1],
                                epsabs=1e-14, epsrel=1e-13)
        total += val
    return total


def _expected_sample_grad(theta, eps_width):
    """E_x of the per-sample (fixed-bin) gradient for x ~ U[0, 1)."""
    k = theta.size // 2
    logits = LogitVector(theta[k:], theta[:k])
    edges = params_from_logits(logits, eps_width).edges
    grad = np.zeros_like(theta)
    for j in range(k):
        for comp in range(2 * k):
            def g(t, comp=comp):
                res = unsmoothed_loglik_grad(logits, t, eps_width)
                return res.d_psi[comp] if comp < k else res.d_phi[comp - k]
            val, _ = integrate.quad(g, edges[j], edges[j + 1], epsabs=1e-14, epsrel=1e-13)
            grad[comp] += val
    return grad


def _bias_at(w, h, eps_width, step=1e-5):
    theta = np.log(np.concatenate([w, h]))
    k = len(w)
    true_grad = -finite_diff_grad(lambda th: _expected_loglik_uniform_data(th, eps_width), theta, step)
    expected = -_expected_sample_grad(theta, eps_width)
    # the terms the sample gradient drops: -sum_i log(h_i / w_i) * grad(w_i)
    s = softmax_normalize(theta[:k])
    jac_w = (1.0 - k * eps_width) * (np.diag(s) - np.outer(s, s))  # d w_i / d psi_j
    ww = softmax_normalize(theta[:k], floor=eps_width)
    hh = softmax_normalize(theta[k:])
    ratio = np.log(hh) - np.log(ww)
    symbolic = np.zeros(2 * k)
    symbolic[:k] = -(ratio @ jac_w)
    difference = true_grad - expected
    return {
        "w": list(map(float, w)),
        "h": list(map(float, h)),
        "true_grad": true_grad.tolist(),
        "mc_expected_grad": expected.tolist(),
        "difference": difference.tolist(),
        "symbolic_missing_terms": symbolic.tolist(),
        "max_abs_error": float(np.max(np.abs(difference - symbolic))),
    }


def gradient_bias_demo(tol=1e-6, eps_width=DEFAULT_EPS_WIDTH):
    """Compare the true NLL gradient with the expected per-sample gradient.

    Data are uniform on [0, 1) and the model is a two-bin AdaCat. Gradients are
    of the negative log-likelihood with respect to ``(psi_1, psi_2, phi_1, phi_2)``.
    At ``w = h = (0.5, 0.5)`` the missing terms vanish, so the demo also
    evaluates ``w = (0.5, 0.5), h = (0.25, 0.75)`` where the bias is non-zero.
    """
    symmetric = _bias_at([0.5, 0.5], [0.5, 0.5], eps_width)
    asym = _bias_at([0.5, 0.5], [0.25, 0.75], eps_width)
    nonzero = max(abs(d) for d in asym["difference"][:2]) > 1e-3
    met = asym["max_abs_error"] < tol and symmetric["max_abs_error"] < tol and nonzero
    return {
        "true_grad": asym["true_grad"],
        "mc_expected_grad": asym["mc_expected_grad"],
        "difference": asym["difference"],
        "tolerance_met": bool(met),
        "tolerance": tol,
        "asymmetric": asym,
        "symmetric": symmetric,
    }


def smoothed_data_nll(theta, data, kernel, abs_tol=1e-11, eps_width=DEFAULT_EPS_WIDTH):
    """NLL of the kernel-smoothed empirical distribution under a single AdaCat head.

    ``theta = (phi, psi)``. The smoothed data density is the average of the
    kernels centred at each point of ``data``; the integral of its product with
    the model log density is taken numerically over [0, 1).
    """
    data = np.asarray(data, dtype=np.float64)
    k = theta.size // 2
    params = params_from_logits(LogitVector(theta[:k], theta[k:]), eps_width)
    windows = np.array([_kernel_window(kernel, x) for x in data])
    cuts = np.unique(np.concatenate([params.edges, windows.ravel(), data if kernel.kind == "gaussian" else []]))
    cuts = cuts[(cuts >= 0.0) & (cuts <= 1.0)]

    if kernel.kind == "uniform":
        lo, hi = windows[:, :1], windows[:, 1:]

        def smoothed_density(t):
            t = np.asarray(t)[None, :]
            return np.sum(((t >= lo) & (t <= hi)) / (hi - lo), axis=0) / data.size
    else:
        dens_fns = [kernel_density_fn(kernel, x) for x in data]

        def smoothed_density(t):
            return sum(fn(t) for fn in dens_fns) / data.size

    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        # model log density is constant on each piece; read it at the interior
        mid_log = log_pdf(params, 0.5 * (a + b))
        total += mid_log * adaptive_simpson(smoothed_density, a, b, abs_tol / (cuts.size - 1))
    return -float(total)
