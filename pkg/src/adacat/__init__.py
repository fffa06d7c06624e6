"""Adaptive-bin categorical (AdaCat) densities with analytic target smoothing."""

from .armodel import ArDensityModel, ar_sample, conditional_logits, joint_log_likelihood
from .datasets import Dataset, load_csv, marginal_quantiles, synth_mixture_1d, synth_two_spirals
from .distribution import (AdaCatParams, cdf, discrete_log_mass, discrete_log_masses, from_quantiles,
                           from_uniform_categorical, icdf, log_pdf, pdf, sample)
from .estimator import AdaCatDensity
from .smoothing import LogitVector, SmoothingKernel, smoothed_loglik, smoothed_loglik_grad
from .training import TrainConfig, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "AdaCatDensity", "AdaCatParams", "ArDensityModel", "Dataset", "LogitVector", "SmoothingKernel",
    "TrainConfig", "ar_sample", "cdf", "conditional_logits", "discrete_log_mass", "discrete_log_masses",
    "evaluate", "from_quantiles", "from_uniform_categorical", "icdf", "joint_log_likelihood", "load_csv",
    "log_pdf", "marginal_quantiles", "pdf", "sample", "smoothed_loglik", "smoothed_loglik_grad",
    "synth_mixture_1d", "synth_two_spirals", "train",
]
