"""Synthetic fixtures, CSV ingestion and min-max scaling into the unit cube."""

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, stats

from ._validation import DEFAULT_EPS_WIDTH, check_samples
from .distribution import floor_widths

logger = logging.getLogger(__name__)

_ONE_MINUS = np.nextafter(1.0, 0.0)
CSV_RANGE_INFLATION = 1e-9


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    """Samples scaled into ``[0, 1)^m`` plus the affine map back to original units.

    ``scale_meta`` is an ``(m, 2)`` array of ``(offset, range)`` pairs with
    ``original = offset + range * scaled``. ``true_nll`` (scaled units) is set
    for synthetic fixtures whose differential entropy is known.
    """

    samples: np.ndarray
    scale_meta: np.ndarray
    name: str = "dataset"
    true_nll: Optional[float] = None
    val_samples: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = check_samples(self.samples)
        self.scale_meta = np.atleast_2d(np.asarray(self.scale_meta, dtype=np.float64))
        if self.scale_meta.shape != (self.samples.shape[1], 2):
            raise DatasetError(f"scale_meta must have shape ({self.samples.shape[1]}, 2)")
        if np.any(self.scale_meta[:, 1] <= 0):
            raise DatasetError("every range in scale_meta must be positive")
        for arr, label in ((self.samples, "samples"), (self.val_samples, "val_samples")):
            if arr is not None and (np.any(arr < 0.0) or np.any(arr >= 1.0)):
                raise DatasetError(f"{label} must lie in [0, 1)")
        if self.val_samples is not None:
            self.val_samples = check_samples(self.val_samples, self.m)

    @property
    def n(self):
        return self.samples.shape[0]

    @property
    def m(self):
        return self.samples.shape[1]

    @property
    def log_range_sum(self):
        """Change-of-variables term from scaled to original units."""
        return float(np.log(self.scale_meta[:, 1]).sum())

    def unscale(self, Z):
        return self.scale_meta[:, 0] + self.scale_meta[:, 1] * np.asarray(Z, dtype=np.float64)

    def scale(self, X, clamp=True):
        return scale_with(self.scale_meta, X, clamp)

    def split(self, val_fraction=0.1, seed=0):
        """Train/validation pair: an explicit split if present, else the last
        ``val_fraction`` of a seeded shuffle."""
        if self.val_samples is not None:
            return self.samples, self.val_samples
        perm = np.random.default_rng(seed).permutation(self.n)
        n_val = int(round(val_fraction * self.n))
        if n_val == 0 or n_val == self.n:
            return self.samples[perm], self.samples[perm]
        return self.samples[perm[:-n_val]], self.samples[perm[-n_val:]]

    def to_dict(self):
        return {
            "name": self.name,
            "samples": self.samples.tolist(),
            "scale_meta": self.scale_meta.tolist(),
            "true_nll": self.true_nll,
            "val_samples": None if self.val_samples is None else self.val_samples.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["samples"], dtype=np.float64), doc["scale_meta"], doc.get("name", "dataset"),
                   doc.get("true_nll"),
                   None if doc.get("val_samples") is None else np.asarray(doc["val_samples"], dtype=np.float64))

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def scale_with(scale_meta, X, clamp=True):
    """Map original-unit data into the unit cube, clamping strays with a warning."""
    scale_meta = np.atleast_2d(np.asarray(scale_meta, dtype=np.float64))
    Z = (check_samples(X, scale_meta.shape[0]) - scale_meta[:, 0]) / scale_meta[:, 1]
    if clamp:
        outside = (Z < 0.0) | (Z >= 1.0)
        if np.any(outside):
            logger.warning("%d value(s) fall outside the training range and were clamped into [0, 1)",
                           int(outside.sum()))
            Z = np.clip(Z, 0.0, _ONE_MINUS)
    return Z


@dataclass(frozen=True)
class MixtureSpec:
    """Gaussian mixture in original units: ``(weight, mean, stddev)`` triples."""

    components: tuple

    def __post_init__(self):
        comps = tuple(tuple(float(v) for v in c) for c in self.components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        weights = np.array([c[0] for c in comps])
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        if any(c[2] <= 0 for c in comps):
            raise ValueError("mixture standard deviations must be positive")
        object.__setattr__(self, "components", comps)

    @property
    def weights(self):
        return np.array([c[0] for c in self.components])

    @property
    def means(self):
        return np.array([c[1] for c in self.components])

    @property
    def stds(self):
        return np.array([c[2] for c in self.components])

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)[..., None]
        return (self.weights * stats.norm.pdf(x, self.means, self.stds)).sum(axis=-1)


# two-scale mixture: a narrow and a broad mode of equal weight
CANONICAL_MIXTURE = MixtureSpec(((0.5, -1.0, 0.05), (0.5, 1.0, 0.5)))


def mixture_bounds(spec):
    """Fixed window: four standard deviations of the widest component past the extreme means."""
    reach = 4.0 * spec.stds.max()
    return float(spec.means.min() - reach), float(spec.means.max() + reach)


def mixture_entropy(spec, lo, hi):
    """Differential entropy (nats) of the mixture restricted to ``[lo, hi]``, by quadrature."""
    def integrand(x):
        p = float(spec.pdf(x))
        return -p * np.log(p) if p > 0 else 0.0

    marks = {m + d * s for m, s in zip(spec.means, spec.stds) for d in (-3, 0, 3)}
    points = sorted(v for v in marks if lo < v < hi)
    val, _ = integrate.quad(integrand, lo, hi, points=points or None, limit=500, epsabs=1e-13, epsrel=1e-12)
    return val


def synth_mixture_1d(spec=CANONICAL_MIXTURE, n=4000, seed=0):
    """Draw ``n`` points from a 1-D Gaussian mixture and scale them into ``[0, 1)``.

    ``true_nll`` is the mixture's differential entropy in scaled units, the
    lowest NLL any model can reach in expectation.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    comp = rng.choice(len(spec.components), size=n, p=spec.weights)
    x = rng.normal(spec.means[comp], spec.stds[comp])
    lo, hi = mixture_bounds(spec)
    meta = np.array([[lo, hi - lo]])
    z = np.clip((x - lo) / (hi - lo), 0.0, _ONE_MINUS)[:, None]
    true_nll = mixture_entropy(spec, lo, hi) - np.log(hi - lo)
    return Dataset(z, meta, "mixture1d", float(true_nll))


SPIRAL_TURNS = 3.0 * np.pi
SPIRAL_NOISE = 0.35


def synth_two_spirals(n=10000, noise_sd=SPIRAL_NOISE, seed=0):
    """Two interleaved Archimedean spiral arms scaled into ``[0, 1)^2``.

    Angles are uniform on ``[0, 3 pi]`` with radius equal to the angle; the
    second arm is the first rotated by pi (arms share their angle draws).
    The square of half-width ``3 pi + 4 noise_sd`` maps onto the unit cube.
    """
    n = int(n)
    if n < 2:
        raise ValueError("two-spirals needs at least two points")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    rng = np.random.default_rng(seed)
    n1 = (n + 1) // 2
    alpha = rng.uniform(0.0, SPIRAL_TURNS, size=n1)
    arm = np.stack([alpha * np.cos(alpha), alpha * np.sin(alpha)], axis=1)
    pts = np.concatenate([arm, -arm[: n - n1]], axis=0)
    pts = pts + noise_sd * rng.standard_normal(pts.shape)
    reach = SPIRAL_TURNS + 4.0 * noise_sd
    meta = np.array([[-reach, 2.0 * reach]] * 2)
    Z = np.clip((pts + reach) / (2.0 * reach), 0.0, _ONE_MINUS)
    return Dataset(Z, meta, "twospirals")


def load_csv(path, declared_dims=None, header=False):
    """Read a numeric CSV and min-max scale each column into ``[0, 1)``.

    Ranges are inflated by a relative ``1e-9`` so the column maximum maps
    strictly below one.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if declared_dims is not None and len(row) != declared_dims:
                raise DatasetError(f"{path}: line {lineno} has {len(row)} columns, expected {declared_dims}")
            values = []
            for col, cell in enumerate(row, start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DatasetError(f"{path}: line {lineno}, column {col}: cannot parse {cell!r} as a number")
            if rows and len(values) != len(rows[0]):
                raise DatasetError(f"{path}: line {lineno} has {len(values)} columns, expected {len(rows[0])}")
            rows.append(values)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    X = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise DatasetError(f"{path}: non-finite values")
    lo, hi = X.min(axis=0), X.max(axis=0)
    spread = hi - lo
    if np.any(spread <= 0):
        bad = int(np.argmax(spread <= 0)) + 1
        raise DatasetError(f"{path}: column {bad} is constant and cannot be scaled")
    meta = np.stack([lo, spread * (1.0 + CSV_RANGE_INFLATION)], axis=1)
    Z = np.clip((X - lo) / meta[:, 1], 0.0, _ONE_MINUS)
    return Dataset(Z, meta, str(path))


def marginal_quantiles(dataset, k, eps_width=DEFAULT_EPS_WIDTH, samples=None):
    """Per-dimension widths of the equal-mass bins of the empirical marginals.

    Returns an ``(m, k)`` array; each row is a width simplex floored at ``eps_width``.
    """
    X = dataset.samples if samples is None else check_samples(samples)
    n, m = X.shape
    k = int(k)
    if k < 1:
        raise ValueError("k must be at least 1")
    if n < k:
        raise DatasetError(f"need at least k={k} samples for quantile bins, got {n}")
    probs = np.arange(1, k) / k
    inner = np.quantile(X, probs, axis=0).T  # (m, k-1)
    edges = np.concatenate([np.zeros((m, 1)), inner, np.ones((m, 1))], axis=1)
    widths = np.maximum(np.diff(edges, axis=1), 0.0)
    widths /= widths.sum(axis=1, keepdims=True)
    return floor_widths(widths, eps_width)
