"""Invariants checked over generated heads, kernels and targets."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from adacat.distribution import (AdaCatParams, cdf, discrete_log_masses, from_quantiles, icdf, log_pdf,
                                 prefix_sums)
from adacat.oracle import finite_diff_grad, params_from_logits, quad_smoothed_loglik
from adacat.smoothing import (LogitVector, SmoothingKernel, kernel_bin_masses, smoothed_loglik,
                              smoothed_loglik_grad, softmax_normalize)

unit = st.floats(0.0, 1.0, exclude_max=True)
logit_values = st.floats(-3.0, 3.0)


@st.composite
def simplex(draw, k=None, low=0.05):
    k = k or draw(st.integers(1, 8))
    raw = draw(arrays(np.float64, k, elements=st.floats(low, 1.0)))
    return raw / raw.sum()


@st.composite
def heads(draw):
    k = draw(st.integers(1, 8))
    return AdaCatParams(draw(simplex(k)), draw(simplex(k)))


@st.composite
def logit_vectors(draw):
    k = draw(st.integers(1, 6))
    phi = draw(arrays(np.float64, k, elements=logit_values))
    psi = draw(arrays(np.float64, k, elements=logit_values))
    return LogitVector(phi, psi)


kernels = st.builds(SmoothingKernel, st.sampled_from(["uniform", "gaussian"]), st.floats(1e-3, 0.5))


@given(heads())
def test_cdf_reaches_one(params):
    assert_allclose(cdf(params, 1.0), 1.0, atol=1e-12)
    assert cdf(params, 0.0) == 0.0


@given(heads(), unit)
def test_cdf_icdf_round_trip(params, t):
    assert_allclose(icdf(params, cdf(params, t)), t, atol=1e-9)


@given(heads(), st.sampled_from([2, 10, 256]))
def test_discrete_masses_sum_to_one(params, n_levels):
    assert_allclose(np.exp(discrete_log_masses(params, n_levels)).sum(), 1.0, atol=1e-12)


@given(heads())
def test_density_integrates_to_one(params):
    # piecewise constant: exact midpoint sum over the bins
    mids = prefix_sums(params.w)[:-1] + 0.5 * params.w
    assert_allclose(np.sum(np.exp([log_pdf(params, m) for m in mids]) * params.w), 1.0, atol=1e-12)


@given(simplex())
def test_quantile_bins_have_equal_mass(w):
    params = from_quantiles(w)
    k = w.size
    assert_allclose(cdf(params, prefix_sums(params.w)[1:-1]), np.arange(1, k) / k, atol=1e-12)


@given(arrays(np.float64, st.integers(1, 8), elements=logit_values), st.floats(-50.0, 50.0))
def test_softmax_shift_invariance(logits, shift):
    assert_allclose(softmax_normalize(logits + shift), softmax_normalize(logits), atol=1e-12)


@given(kernels, unit, simplex(low=0.01))
def test_kernel_masses_sum_to_one(kernel, center, w):
    edges = prefix_sums(w)[None, :]
    masses = kernel_bin_masses(kernel, np.array([center]), edges)
    assert np.all(masses >= 0.0)
    assert_allclose(masses.sum(), 1.0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(logit_vectors(), kernels, unit)
def test_smoothed_loglik_matches_quadrature(logits, kernel, x):
    params = params_from_logits(logits)
    ref = quad_smoothed_loglik(params, kernel, x)
    assert_allclose(smoothed_loglik(logits, kernel, x), ref, rtol=1e-6, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(logit_vectors(), st.floats(0.02, 0.3), unit)
def test_gradient_matches_finite_differences(logits, bandwidth, x):
    # the Gaussian kernel keeps the objective smooth in the logits
    kernel = SmoothingKernel("gaussian", bandwidth)
    k = logits.phi.size
    theta = np.concatenate(logits)
    fd = finite_diff_grad(lambda th: smoothed_loglik(LogitVector(th[:k], th[k:]), kernel, x), theta, 1e-5)
    g = smoothed_loglik_grad(logits, kernel, x)
    assert_allclose(np.concatenate([g.d_phi, g.d_psi]), fd, atol=1e-4)
