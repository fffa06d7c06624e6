import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from adacat._validation import DomainError
from adacat.distribution import (AdaCatParams, batch_log_pdf, batch_sample, bin_index, cdf,
                                 discrete_log_mass, discrete_log_masses, floor_widths, from_quantiles,
                                 from_uniform_categorical, icdf, log_pdf, pdf, prefix_sums, sample)


def P(w, h):
    return AdaCatParams(np.array(w, dtype=float), np.array(h, dtype=float))


class TestPrefixSums:
    @pytest.mark.parametrize("w, expected", [
        ((0.5, 0.5), (0.0, 0.5, 1.0)),
        ((0.2, 0.3, 0.5), (0.0, 0.2, 0.5, 1.0)),
        ((1.0,), (0.0, 1.0)),
    ])
    def test_values(self, w, expected):
        assert_allclose(prefix_sums(w), expected, atol=1e-15)

    def test_last_edge_pinned(self):
        w = np.full(10, 0.1)  # cumsum rounds to 0.9999999999999999
        assert prefix_sums(w)[-1] == 1.0

    def test_stacked(self):
        out = prefix_sums([[0.5, 0.5], [0.25, 0.75]])
        assert_allclose(out, [[0, 0.5, 1], [0, 0.25, 1]])


class TestParams:
    def test_rejects_non_simplex(self):
        with pytest.raises(ValueError):
            P((0.5, 0.6), (0.5, 0.5))
        with pytest.raises(ValueError):
            P((0.5, 0.5), (1.5, -0.5))

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            P((0.5, 0.5), (1.0,))

    def test_rejects_width_below_floor(self):
        with pytest.raises(ValueError):
            P((1e-12, 1 - 1e-12), (0.5, 0.5))

    def test_floor_widths(self):
        w = floor_widths(np.array([0.0, 0.5, 0.5]), 1e-3)
        assert w[0] == 1e-3
        assert_allclose(w.sum(), 1.0)
        assert_allclose(w[1], w[2])


class TestBinIndex:
    def test_boundary_goes_right(self):
        # zero-based: the boundary at 0.5 belongs to the second bin
        assert bin_index(P((0.5, 0.5), (0.5, 0.5)), 0.5).index == 1

    def test_interior(self):
        hit = bin_index(P((0.2, 0.3, 0.5), (0.6, 0.1, 0.3)), 0.45)
        assert hit.index == 1
        assert_allclose((hit.lo, hit.hi), (0.2, 0.5))

    def test_single_bin(self):
        assert bin_index(P((1.0,), (1.0,)), 0.999).index == 0

    @pytest.mark.parametrize("x", [-0.1, 1.0, 1.5, float("nan")])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            bin_index(P((0.5, 0.5), (0.5, 0.5)), x)


class TestDensity:
    @pytest.mark.parametrize("w, h, x, expected", [
        ((0.5, 0.5), (0.5, 0.5), 0.3, 1.0),
        ((0.25, 0.75), (0.5, 0.5), 0.1, 2.0),
        ((0.2, 0.3, 0.5), (0.6, 0.1, 0.3), 0.45, 1 / 3),
        ((0.1, 0.9), (0.5, 0.5), 0.05, 5.0),
    ])
    def test_pdf(self, w, h, x, expected):
        assert_allclose(pdf(P(w, h), x), expected)

    def test_pdf_outside_support_is_zero(self):
        assert pdf(P((0.5, 0.5), (0.5, 0.5)), 1.0) == 0.0
        assert pdf(P((0.5, 0.5), (0.5, 0.5)), -0.2) == 0.0

    def test_log_pdf(self):
        assert log_pdf(P((0.5, 0.5), (0.5, 0.5)), 0.9) == 0.0
        assert_allclose(log_pdf(P((0.25, 0.75), (0.5, 0.5)), 0.1), math.log(2))

    def test_log_pdf_zero_mass_is_neg_inf(self):
        assert log_pdf(P((0.5, 0.5), (1.0, 0.0)), 0.7) == -np.inf

    def test_log_pdf_domain(self):
        with pytest.raises(DomainError):
            log_pdf(P((0.5, 0.5), (0.5, 0.5)), 1.0)

    def test_integrates_to_one(self):
        params = P((0.1, 0.2, 0.3, 0.4), (0.4, 0.1, 0.2, 0.3))
        total = sum(integrate.quad(lambda x: pdf(params, x), a, b)[0]
                    for a, b in zip(params.edges[:-1], params.edges[1:]))
        assert_allclose(total, 1.0, atol=1e-12)


class TestCdf:
    def test_endpoints_and_clamping(self):
        params = P((0.2, 0.3, 0.5), (0.6, 0.1, 0.3))
        assert cdf(params, 0.0) == 0.0
        assert cdf(params, 1.0) == 1.0
        assert cdf(params, -3.0) == 0.0
        assert cdf(params, 7.0) == 1.0

    def test_values(self):
        assert_allclose(cdf(P((0.25, 0.75), (0.5, 0.5)), 0.5), 2 / 3)
        assert_allclose(cdf(P((0.2, 0.3, 0.5), (0.6, 0.1, 0.3)), 0.2), 0.6)

    def test_icdf_values(self):
        assert_allclose(icdf(P((0.5, 0.5), (0.5, 0.5)), 0.25), 0.25)
        assert_allclose(icdf(P((0.25, 0.75), (0.5, 0.5)), 0.5), 0.25)

    def test_icdf_zero_mass_plateau_returns_left_end(self):
        params = P((0.25, 0.5, 0.25), (0.5, 0.0, 0.5))
        # cdf is flat at 0.5 on [0.25, 0.75)
        assert_allclose(icdf(params, 0.5), 0.25)

    def test_icdf_domain(self):
        with pytest.raises(DomainError):
            icdf(P((0.5, 0.5), (0.5, 0.5)), 1.0)

    def test_round_trip(self, rng):
        params = P(rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6)))
        u = rng.random(1000)
        assert_allclose(cdf(params, icdf(params, u)), u, atol=1e-9)


class TestSample:
    def test_midpoint(self):
        params = P((0.5, 0.5), (0.2, 0.8))
        assert sample(params, 0.1, "midpoint") == 0.25
        assert sample(params, 0.5, "midpoint") == 0.75

    def test_midpoint_at_mass_boundary_selects_next_bin(self):
        assert sample(P((0.5, 0.5), (0.2, 0.8)), 0.2, "midpoint") == 0.75

    def test_uniform_is_identity_for_uniform_params(self):
        assert_allclose(sample(P((0.5, 0.5), (0.5, 0.5)), 0.25), 0.25)

    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="mode"):
            sample(P((0.5, 0.5), (0.5, 0.5)), 0.1, "nearest")

    def test_batch_matches_scalar(self, rng):
        n, k = 200, 5
        w = rng.dirichlet(np.ones(k), size=n)
        h = rng.dirichlet(np.ones(k), size=n)
        u = rng.random(n)
        edges = prefix_sums(w)
        for mode in ("uniform", "midpoint"):
            got = batch_sample(h, w, edges, u, mode)
            want = [sample(P(w[i], h[i]), u[i], mode) for i in range(n)]
            assert_allclose(got, want, atol=1e-12)

    def test_batch_log_pdf_matches_scalar(self, rng):
        n, k = 100, 4
        w = rng.dirichlet(np.ones(k), size=n)
        h = rng.dirichlet(np.ones(k), size=n)
        x = rng.random(n)
        got = batch_log_pdf(np.log(h), np.log(w), prefix_sums(w), x)
        want = [log_pdf(P(w[i], h[i]), x[i]) for i in range(n)]
        assert_allclose(got, want, rtol=1e-12)


class TestDiscreteMass:
    def test_aligned_bins(self):
        params = P(np.full(4, 0.25), (0.1, 0.2, 0.3, 0.4))
        assert_allclose(discrete_log_mass(params, 2, 4), math.log(0.3))

    def test_half(self):
        assert_allclose(discrete_log_mass(P((0.5, 0.5), (0.5, 0.5)), 0, 2), math.log(0.5))

    def test_frozen_quadrature_value(self):
        # mass of [0.25, 0.5) under w=(0.3,0.7), h=(0.9,0.1); reference from quad of the pdf
        params = P((0.3, 0.7), (0.9, 0.1))
        ref = integrate.quad(lambda x: pdf(params, x), 0.25, 0.5, points=[0.3])[0]
        assert_allclose(ref, 0.15 + 1 / 35, rtol=1e-12)
        assert_allclose(discrete_log_mass(params, 1, 4), -1.7227665977411035, rtol=1e-12)

    @pytest.mark.parametrize("K", [2, 10, 256])
    def test_sum_to_one(self, rng, K):
        params = P(rng.dirichlet(np.ones(7)), rng.dirichlet(np.ones(7)))
        assert_allclose(np.exp(discrete_log_masses(params, K)).sum(), 1.0, atol=1e-12)

    def test_index_domain(self):
        with pytest.raises(DomainError):
            discrete_log_mass(P((0.5, 0.5), (0.5, 0.5)), 4, 4)


class TestReductions:
    def test_uniform_categorical(self):
        assert_allclose(from_uniform_categorical((0.5, 0.5)).w, (0.5, 0.5))
        assert_allclose(from_uniform_categorical((1, 0, 0, 0)).w, np.full(4, 0.25))

    def test_quantiles(self):
        params = from_quantiles((0.5, 0.5))
        assert_allclose(params.h, (0.5, 0.5))
        assert_allclose(pdf(from_quantiles((0.1, 0.9)), 0.05), 5.0)

    def test_quantile_edges_are_equal_mass(self):
        params = from_quantiles((0.125, 0.375, 0.25, 0.25))
        assert np.array_equal(cdf(params, params.edges), np.arange(5) / 4)
