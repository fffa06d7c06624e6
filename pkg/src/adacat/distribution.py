"""The AdaCat distribution: a mixture of k uniforms with disjoint supports tiling [0, 1).

Bin ``i`` (zero-based) covers the half-open interval ``[c_i, c_i + w_i)`` where
``c`` is the prefix sum of the widths ``w``; it carries probability mass ``h_i``
and so has constant density ``h_i / w_i``.

Scalar-parameter functions take an :class:`AdaCatParams`. The ``batch_*``
helpers operate on stacks of conditionals (one row per sample) and are what the
autoregressive model and the training loop use.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._validation import DEFAULT_EPS_WIDTH, SIMPLEX_TOL, DomainError, check_simplex

SAMPLE_MODES = ("uniform", "midpoint")
_ONE_MINUS = np.nextafter(1.0, 0.0)


def prefix_sums(w):
    """Bin edges ``(0, w_0, w_0 + w_1, ..., 1)`` for width vector ``w``.

    Works on stacked widths of shape ``(..., k)``, returning ``(..., k + 1)``.
    The final edge is pinned to exactly 1 so that rounding in the cumulative
    sum never leaves a sliver of the support uncovered.
    """
    w = np.asarray(w, dtype=np.float64)
    edges = np.zeros(w.shape[:-1] + (w.shape[-1] + 1,))
    np.cumsum(w, axis=-1, out=edges[..., 1:])
    edges[..., -1] = 1.0
    return edges


def floor_widths(w, eps_width=DEFAULT_EPS_WIDTH):
    """Raise entries below ``eps_width`` to the floor and shrink the rest to keep sum 1."""
    w = np.array(w, dtype=np.float64)
    k = w.shape[-1]
    if k * eps_width > 1.0:
        raise ValueError(f"cannot floor {k} widths at {eps_width}: floor exceeds the unit interval")
    low = w < eps_width
    if not np.any(low):
        return w
    free = np.where(low, 0.0, w)
    free_total = free.sum(axis=-1, keepdims=True)
    budget = 1.0 - low.sum(axis=-1, keepdims=True) * eps_width
    return np.where(low, eps_width, free * budget / free_total)


@dataclass(frozen=True)
class AdaCatParams:
    """Normalized bin widths ``w`` and masses ``h`` of one 1-D AdaCat conditional."""

    w: np.ndarray
    h: np.ndarray
    eps_width: float = DEFAULT_EPS_WIDTH
    edges: np.ndarray = field(init=False, repr=False, compare=False)
    cum_mass: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = check_simplex(self.w, "w")
        h = check_simplex(self.h, "h")
        if w.shape != h.shape:
            raise ValueError(f"w and h must have the same length (got {w.size} and {h.size})")
        if np.any(w < self.eps_width * (1.0 - SIMPLEX_TOL)):
            raise ValueError(f"every bin width must be at least eps_width={self.eps_width}")
        w.setflags(write=False)
        h.setflags(write=False)
        edges = prefix_sums(w)
        edges.setflags(write=False)
        cum_mass = np.concatenate([[0.0], np.cumsum(h)])
        cum_mass[-1] = 1.0
        cum_mass.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "cum_mass", cum_mass)

    @property
    def k(self):
        return self.w.size

    @property
    def log_density(self):
        """Per-bin log density ``log h_i - log w_i`` (``-inf`` for empty bins)."""
        with np.errstate(divide="ignore"):
            return np.log(self.h) - np.log(self.w)


class BinHit(NamedTuple):
    """Zero-based bin index and the half-open interval ``[lo, hi)`` it covers."""

    index: int
    lo: float
    hi: float


def _locate(params, x):
    idx = np.searchsorted(params.edges, x, side="right") - 1
    return np.clip(idx, 0, params.k - 1)


def bin_index(params, x):
    """Locate the bin containing ``x`` (boundaries belong to the bin on their right)."""
    x = float(x)
    if not 0.0 <= x < 1.0:
        raise DomainError(f"x must lie in [0, 1), got {x!r}")
    i = int(_locate(params, x))
    return BinHit(i, float(params.edges[i]), float(params.edges[i + 1]))


def pdf(params, x):
    """Density ``h_i / w_i`` of the bin containing ``x``; zero outside ``[0, 1)``."""
    x = np.asarray(x, dtype=np.float64)
    dens = (params.h / params.w)[_locate(params, x)]
    out = np.where((x >= 0.0) & (x < 1.0), dens, 0.0)
    return float(out) if out.ndim == 0 else out


def log_pdf(params, x):
    """Log density in nats. Zero-mass bins give ``-inf`` rather than raising."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(~(x >= 0.0)) or np.any(~(x < 1.0)):
        raise DomainError("log_pdf is only defined on [0, 1)")
    out = params.log_density[_locate(params, x)]
    return float(out) if out.ndim == 0 else out


def cdf(params, t):
    """Piecewise-linear CDF; arguments below 0 map to 0 and above 1 map to 1."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    i = _locate(params, t)
    frac = (t - params.edges[i]) / params.w[i]
    out = params.cum_mass[i] + params.h[i] * frac
    out = np.where(t >= 1.0, 1.0, np.minimum(out, 1.0))
    return float(out) if out.ndim == 0 else out


def icdf(params, u):
    """Generalized inverse ``inf{t : cdf(t) >= u}`` for ``u`` in ``[0, 1)``.

    On a flat stretch of the CDF (a zero-mass bin) this returns the left end of
    the stretch.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(~(u_arr >= 0.0)) or np.any(~(u_arr < 1.0)):
        raise DomainError("icdf is only defined for u in [0, 1)")
    i = np.searchsorted(params.cum_mass[1:], u_arr, side="left")
    i = np.minimum(i, params.k - 1)
    h = params.h[i]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(h > 0, (u_arr - params.cum_mass[i]) / h, 0.0)
    out = np.minimum(params.edges[i] + frac * params.w[i], _ONE_MINUS)
    return float(out) if out.ndim == 0 else out


def sample(params, u, mode="uniform"):
    """Map uniform variates to samples.

    ``mode="uniform"`` draws uniformly inside the selected bin (inverse CDF);
    ``mode="midpoint"`` selects a bin by mass and returns its centre.
    """
    if mode == "uniform":
        return icdf(params, u)
    if mode != "midpoint":
        raise ValueError(f"unknown sampling mode {mode!r}; expected one of {SAMPLE_MODES}")
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(~(u_arr >= 0.0)) or np.any(~(u_arr < 1.0)):
        raise DomainError("sample is only defined for u in [0, 1)")
    i = np.minimum(np.searchsorted(params.cum_mass[1:], u_arr, side="right"), params.k - 1)
    out = params.edges[i] + 0.5 * params.w[i]
    return float(out) if out.ndim == 0 else out


def discrete_log_masses(params, n_levels):
    """Log probability of each interval ``[i/K, (i+1)/K)`` for ``i = 0..K-1``."""
    n_levels = int(n_levels)
    if n_levels < 1:
        raise ValueError("number of discrete levels must be at least 1")
    grid = np.arange(n_levels + 1, dtype=np.float64) / n_levels
    lo = grid[:-1, None]
    hi = grid[1:, None]
    # overlap of every level interval with every bin, as a fraction of the bin
    overlap = np.clip(params.edges[None, 1:], lo, hi) - np.clip(params.edges[None, :-1], lo, hi)
    mass = (overlap / params.w[None, :]) @ params.h
    with np.errstate(divide="ignore"):
        return np.log(np.maximum(mass, 0.0))


def discrete_log_mass(params, i, n_levels):
    """Log of the probability mass assigned to ``[i/K, (i+1)/K)``."""
    n_levels = int(n_levels)
    if not 0 <= int(i) < n_levels:
        raise DomainError(f"level index {i} outside [0, {n_levels})")
    return float(discrete_log_masses(params, n_levels)[int(i)])


def from_uniform_categorical(h, eps_width=DEFAULT_EPS_WIDTH):
    """Equal-width bins: the usual categorical head plus uniform within-bin noise."""
    h = check_simplex(h, "h")
    return AdaCatParams(np.full(h.size, 1.0 / h.size), h, eps_width)


def from_quantiles(w, eps_width=DEFAULT_EPS_WIDTH):
    """Equal-mass bins: ``w`` read as the gaps between the k-quantiles."""
    w = check_simplex(w, "w")
    return AdaCatParams(w, np.full(w.size, 1.0 / w.size), eps_width)


# ----------------------------------------------------------------------------
# stacked conditionals, one row per sample


def batch_bin_index(edges, x):
    """Bin index per row for edges ``(n, k + 1)`` and points ``(n,)``."""
    k = edges.shape[-1] - 1
    idx = (edges[:, 1:-1] <= x[:, None]).sum(axis=1)
    return np.minimum(idx, k - 1)


def batch_log_pdf(log_h, log_w, edges, x):
    idx = batch_bin_index(edges, x)
    rows = np.arange(x.shape[0])
    return log_h[rows, idx] - log_w[rows, idx]


def batch_sample(h, w, edges, u, mode="uniform"):
    """Per-row inverse-CDF (``"uniform"``) or mid-point sampling."""
    n, k = h.shape
    rows = np.arange(n)
    cum = np.cumsum(h, axis=1)
    cum[:, -1] = 1.0
    if mode == "midpoint":
        idx = np.minimum((cum <= u[:, None]).sum(axis=1), k - 1)
        return edges[rows, idx] + 0.5 * w[rows, idx]
    if mode != "uniform":
        raise ValueError(f"unknown sampling mode {mode!r}; expected one of {SAMPLE_MODES}")
    idx = np.minimum((cum < u[:, None]).sum(axis=1), k - 1)
    below = cum[rows, idx] - h[rows, idx]
    hi = h[rows, idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(hi > 0, np.clip((u - below) / hi, 0.0, 1.0), 0.0)
    return np.minimum(edges[rows, idx] + frac * w[rows, idx], _ONE_MINUS)
