"""Target smoothing for AdaCat heads.

The smoothed per-target objective replaces ``log p(x)`` with its expectation
under a narrow kernel centred on ``x``. Because an AdaCat density is constant
on each bin, the expectation is a finite sum::

    sum_j  m_j * (log h_j - log w_j),    m_j = F(c_j + w_j) - F(c_j)

where ``F`` is the kernel CDF. Everything here is differentiated by hand.
With ``a_j = log h_j - log w_j`` the derivatives are

* ``d/d log h_j``: ``m_j`` (so ``d/d phi = m - h``, since the ``m_j`` sum to one);
* ``d/d w_l``: ``-m_l / w_l`` plus, for every interior edge ``c_j`` right of bin
  ``l``, ``zeta(c_j) * (a_{j-1} - a_j)`` (moving an edge trades kernel mass
  between its two neighbours).

Widths come from a floored softmax, ``w = eps + (1 - k eps) softmax(psi)``,
which keeps every width at or above ``eps`` and stays differentiable.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp, ndtr

from ._validation import DEFAULT_EPS_WIDTH, check_positive, check_unit
from .distribution import batch_bin_index, prefix_sums

KERNEL_KINDS = ("uniform", "gaussian")
_KIND_ALIASES = {"truncated-gaussian": "gaussian", "normal": "gaussian"}
_SQRT_2PI = np.sqrt(2.0 * np.pi)

# test-only mutation hook: flips the sign of the edge-movement gradient term
_FAULT_FLIP_EDGE_SIGN = False


@dataclass(frozen=True)
class SmoothingKernel:
    """Uniform or truncated-Gaussian smoothing density, renormalized onto [0, 1).

    For ``kind="uniform"`` the untruncated support is
    ``[x - bandwidth/2, x + bandwidth/2)``; for ``kind="gaussian"`` the
    bandwidth is the standard deviation.
    """

    kind: str = "uniform"
    bandwidth: float = 1e-3

    def __post_init__(self):
        kind = _KIND_ALIASES.get(self.kind, self.kind)
        if kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KERNEL_KINDS}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "bandwidth", check_positive(self.bandwidth, "bandwidth"))

    def to_dict(self):
        return {"kind": self.kind, "bandwidth": self.bandwidth}


class LogitVector(NamedTuple):
    """Unnormalized log masses ``phi`` and log widths ``psi`` of one head."""

    phi: np.ndarray
    psi: np.ndarray


class SmoothedLossGrad(NamedTuple):
    value: float
    d_phi: np.ndarray
    d_psi: np.ndarray


def _uniform_support(kernel, center):
    half = 0.5 * kernel.bandwidth
    return np.maximum(center - half, 0.0), np.minimum(center + half, 1.0)


def _ndtr_diff(a, b):
    """``Phi(b) - Phi(a)`` for ``a <= b``, evaluated in whichever tail is accurate."""
    upper = a > 0
    return np.where(upper, ndtr(-a) - ndtr(-b), ndtr(b) - ndtr(a))


def _gauss_norm(kernel, center):
    lam = kernel.bandwidth
    return _ndtr_diff(-center / lam, (1.0 - center) / lam)


def kernel_cdf(kernel, center, t):
    """CDF of the truncated, renormalized kernel centred at ``center``, evaluated at ``t``."""
    center = np.asarray(center, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if kernel.kind == "uniform":
        lo, hi = _uniform_support(kernel, center)
        out = np.clip((t - lo) / (hi - lo), 0.0, 1.0)
    else:
        lam = kernel.bandwidth
        tc = np.clip(t, 0.0, 1.0)
        out = _ndtr_diff(-center / lam, (tc - center) / lam) / _gauss_norm(kernel, center)
        out = np.clip(out, 0.0, 1.0)
        out = np.where(t >= 1.0, 1.0, np.where(t <= 0.0, 0.0, out))
    return float(out) if out.ndim == 0 else out


def kernel_pdf(kernel, center, t):
    """Density of the truncated, renormalized kernel (zero outside [0, 1))."""
    center = np.asarray(center, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if kernel.kind == "uniform":
        lo, hi = _uniform_support(kernel, center)
        out = np.where((t >= lo) & (t < hi), 1.0 / (hi - lo), 0.0)
    else:
        lam = kernel.bandwidth
        z = (t - center) / lam
        dens = np.exp(-0.5 * z * z) / (_SQRT_2PI * lam * _gauss_norm(kernel, center))
        out = np.where((t >= 0.0) & (t < 1.0), dens, 0.0)
    return float(out) if out.ndim == 0 else out


def kernel_bin_masses(kernel, center, edges):
    """Kernel mass falling in each bin; ``edges`` is ``(n, k + 1)``, ``center`` is ``(n,)``."""
    c = center[:, None]
    if kernel.kind == "uniform":
        lo, hi = _uniform_support(kernel, c)
        clipped = np.clip(edges, lo, hi)
        return np.diff(clipped, axis=1) / (hi - lo)
    lam = kernel.bandwidth
    z = (edges - c) / lam
    return _ndtr_diff(z[:, :-1], z[:, 1:]) / _gauss_norm(kernel, c)


def softmax_normalize(logits, floor=0.0):
    """Softmax along the last axis, optionally floored: ``floor + (1 - k*floor) * softmax``."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    if floor:
        k = logits.shape[-1]
        return floor + (1.0 - k * floor) * s
    return s


def log_softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    return logits - logsumexp(logits, axis=-1, keepdims=True)


def widths_from_logits(psi, eps_width=DEFAULT_EPS_WIDTH):
    """Floored softmax widths; returns ``(w, s)`` where ``s`` is the raw softmax."""
    s = softmax_normalize(psi)
    k = s.shape[-1]
    return eps_width + (1.0 - k * eps_width) * s, s


def widths_backward(g_w, s, eps_width=DEFAULT_EPS_WIDTH):
    """Pull a gradient with respect to the widths back to the width logits."""
    k = s.shape[-1]
    g_s = (1.0 - k * eps_width) * g_w
    return s * (g_s - (s * g_s).sum(axis=-1, keepdims=True))


def head_terms(log_h, w, log_w, x, kernel=None):
    """Per-row objective and partial gradients for stacked AdaCat heads.

    Arguments are ``(n, k)`` arrays plus targets ``x`` of shape ``(n,)``. With
    ``kernel=None`` the point (non-smoothed) log-likelihood is used and its
    gradient holds the bin assignment fixed.

    Returns ``(value, m, g_w)``: the ``(n,)`` objective, the ``(n, k)`` bin
    weights (kernel masses, or a one-hot row), and the gradient with respect to
    ``w``. The gradient with respect to ``phi`` is ``m - h`` for every mode.
    """
    n, k = w.shape
    edges = prefix_sums(w)
    a = log_h - log_w
    rows = np.arange(n)
    if kernel is None:
        m = np.zeros_like(w)
        m[rows, batch_bin_index(edges, x)] = 1.0
    else:
        m = kernel_bin_masses(kernel, x, edges)
    with np.errstate(invalid="ignore"):
        value = np.where(m > 0, m * a, 0.0).sum(axis=1)
    g_w = -m / w
    if kernel is not None and k > 1:
        dens = kernel_pdf(kernel, x[:, None], edges[:, 1:-1])
        with np.errstate(invalid="ignore"):
            edge_grad = np.where(dens > 0, dens * (a[:, :-1] - a[:, 1:]), 0.0)
        if _FAULT_FLIP_EDGE_SIGN:
            edge_grad = -edge_grad
        # width l moves every interior edge to its right
        suffix = np.cumsum(edge_grad[:, ::-1], axis=1)[:, ::-1]
        g_w[:, :-1] += suffix
    return value, m, g_w


def _head_from_logits(logits, eps_width):
    phi = np.atleast_2d(np.asarray(logits.phi, dtype=np.float64))
    psi = np.atleast_2d(np.asarray(logits.psi, dtype=np.float64))
    if phi.shape != psi.shape:
        raise ValueError(f"phi and psi must have the same length (got {phi.shape[-1]} and {psi.shape[-1]})")
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(psi))):
        raise ValueError("logits must be finite")
    log_h = log_softmax(phi)
    w, s = widths_from_logits(psi, eps_width)
    return log_h, w, np.log(w), s


def _loglik_grad(logits, kernel, x, eps_width):
    x = np.atleast_1d(check_unit(x))
    log_h, w, log_w, s = _head_from_logits(logits, eps_width)
    value, m, g_w = head_terms(log_h, w, log_w, x, kernel)
    h = np.exp(log_h)
    d_phi = m - h * m.sum(axis=1, keepdims=True)
    d_psi = widths_backward(g_w, s, eps_width)
    return SmoothedLossGrad(float(value[0]), d_phi[0], d_psi[0])


def smoothed_loglik(logits, kernel, x, eps_width=DEFAULT_EPS_WIDTH):
    """Closed-form expected log density of the head under ``kernel`` centred at ``x``."""
    x = np.atleast_1d(check_unit(x))
    log_h, w, log_w, _ = _head_from_logits(logits, eps_width)
    value, _, _ = head_terms(log_h, w, log_w, x, kernel)
    return float(value[0])


def smoothed_loglik_grad(logits, kernel, x, eps_width=DEFAULT_EPS_WIDTH):
    """Value and exact gradient of :func:`smoothed_loglik` with respect to ``phi`` and ``psi``."""
    return _loglik_grad(logits, kernel, x, eps_width)


def unsmoothed_loglik_grad(logits, x, eps_width=DEFAULT_EPS_WIDTH):
    """Point log density and its gradient with the containing bin held fixed.

    This is the per-sample gradient of the plain maximum-likelihood objective;
    its expectation over the data misses the terms that come from bin edges
    moving past data points.
    """
    return _loglik_grad(logits, None, x, eps_width)
