"""scikit-learn compatible front end."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import DEFAULT_EPS_WIDTH
from .armodel import ArDensityModel, ar_sample, joint_log_likelihood
from .datasets import CSV_RANGE_INFLATION, Dataset, marginal_quantiles, scale_with
from .smoothing import SmoothingKernel
from .training import TrainConfig, train, training_split


def _as_seed(random_state):
    """Integer seed (or None) from anything ``check_random_state`` accepts."""
    if random_state is None or isinstance(random_state, (int, np.integer)):
        return None if random_state is None else int(random_state)
    return int(check_random_state(random_state).randint(2**31 - 1))


class AdaCatDensity(BaseEstimator):
    """Autoregressive density estimator with adaptive-bin (AdaCat) conditionals.

    Follows the ``KernelDensity`` conventions: ``fit(X)`` learns the density,
    ``score_samples(X)`` returns per-sample log densities in the original
    units of ``X``, ``score(X)`` their sum, and ``sample`` draws new points.

    Data are min-max scaled into the unit cube column by column using the
    training data; the scale enters the reported densities through the
    change-of-variables term.

    Parameters
    ----------
    n_bins : int
        Bins per conditional (``k``).
    mode : {"adacat", "uniform", "adaptive-quantile", "fixed-quantile"}
        Head parameterization.
    hidden_layer_sizes : tuple of int
    fourier_pairs : int
        Sin/cos feature pairs per conditioning coordinate.
    smoothing : {"uniform", "gaussian"} or None
        Target-smoothing kernel; ``None`` trains on the point likelihood.
    bandwidth : float
        Kernel width in scaled units.
    epochs, batch_size, learning_rate, lr_halving_period, weight_decay
        Optimizer settings (Adam).
    validation_fraction : float
        Share of the data held out for the per-epoch report.
    random_state : int or None
    """

    def __init__(self, n_bins=16, mode="adacat", hidden_layer_sizes=(64, 64), fourier_pairs=0,
                 smoothing="uniform", bandwidth=1e-3, epochs=100, batch_size=256, learning_rate=3e-4,
                 lr_halving_period=0, weight_decay=0.0, validation_fraction=0.1, eps_width=DEFAULT_EPS_WIDTH,
                 random_state=None):
        self.n_bins = n_bins
        self.mode = mode
        self.hidden_layer_sizes = hidden_layer_sizes
        self.fourier_pairs = fourier_pairs
        self.smoothing = smoothing
        self.bandwidth = bandwidth
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_halving_period = lr_halving_period
        self.weight_decay = weight_decay
        self.validation_fraction = validation_fraction
        self.eps_width = eps_width
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        lo, hi = X.min(axis=0), X.max(axis=0)
        spread = hi - lo
        if np.any(spread <= 0):
            raise ValueError("every column needs at least two distinct values")
        scale_meta = np.stack([lo, spread * (1.0 + CSV_RANGE_INFLATION)], axis=1)
        data = Dataset(scale_with(scale_meta, X), scale_meta, "fit")
        seed = _as_seed(self.random_state)
        if seed is None:
            seed = int(np.random.default_rng().integers(2**31 - 1))
        kernel = None if self.smoothing is None else SmoothingKernel(self.smoothing, self.bandwidth)
        config = TrainConfig(epochs=self.epochs, batch_size=self.batch_size, lr=self.learning_rate,
                             lr_halving_period=self.lr_halving_period, weight_decay=self.weight_decay,
                             smoothing=kernel, seed=seed, val_fraction=self.validation_fraction)
        fixed_w = None
        if self.mode == "fixed-quantile":
            fixed_w = marginal_quantiles(data, self.n_bins, self.eps_width, samples=training_split(data, config)[0])
        model = ArDensityModel(X.shape[1], self.n_bins, self.mode, self.hidden_layer_sizes, self.fourier_pairs,
                               self.eps_width, seed=seed, fixed_w=fixed_w)
        model.scale_meta = scale_meta
        report = train(model, data, config)
        if report.aborted:
            raise FloatingPointError(f"training aborted: {report.abort_reason}")
        self.model_ = model
        self.scale_meta_ = scale_meta
        self.report_ = report
        self.n_features_in_ = X.shape[1]
        return self

    def score_samples(self, X):
        """Log density of each row of ``X`` in its original units."""
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        Z = (X - self.scale_meta_[:, 0]) / self.scale_meta_[:, 1]
        inside = np.all((Z >= 0.0) & (Z < 1.0), axis=1)
        out = np.full(X.shape[0], -np.inf)
        if np.any(inside):
            out[inside] = joint_log_likelihood(self.model_, Z[inside]) - np.log(self.scale_meta_[:, 1]).sum()
        return out

    def score(self, X, y=None):
        return float(np.sum(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=None, mode="uniform"):
        check_is_fitted(self, "model_")
        Z = ar_sample(self.model_, n_samples, _as_seed(random_state), mode)
        return self.scale_meta_[:, 0] + self.scale_meta_[:, 1] * Z
