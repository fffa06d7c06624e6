"""Input validation helpers shared across the package."""

import numpy as np

SIMPLEX_TOL = 1e-9
DEFAULT_EPS_WIDTH = 1e-8


class DomainError(ValueError):
    """A value lies outside the support an operation is defined on."""


def check_simplex(values, name="vector", tol=SIMPLEX_TOL):
    """Return ``values`` as a float64 1-D array, validating it is a probability vector."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"{name} must be a non-empty 1-D sequence, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(arr < 0):
        raise ValueError(f"{name} has negative entries")
    total = float(arr.sum())
    if abs(total - 1.0) > tol:
        raise ValueError(f"{name} must sum to 1 (got {total!r})")
    return arr


def check_unit(x, name="x"):
    """Validate ``0 <= x < 1`` elementwise; returns a float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~(arr >= 0.0)) or np.any(~(arr < 1.0)):
        raise DomainError(f"{name} must lie in [0, 1), got {arr if arr.ndim == 0 else 'out-of-range entries'}")
    return arr


def check_positive(value, name):
    value = float(value)
    if not value > 0 or not np.isfinite(value):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value


def check_samples(X, n_dims=None, name="samples"):
    """Coerce to a 2-D float64 matrix; 1-D input is treated as a single column."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D (n, m), got shape {arr.shape}")
    if n_dims is not None and arr.shape[1] != n_dims:
        raise ValueError(f"{name} has {arr.shape[1]} columns, expected {n_dims}")
    return arr
