import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from adacat.armodel import (ArDensityModel, FourierConfig, NonFiniteLossError, ar_sample, conditional_logits,
                            fourier_features, joint_log_likelihood, min_bin_width, smoothed_joint_objective)
from adacat.distribution import log_pdf
from adacat.oracle import params_from_logits
from adacat.smoothing import SmoothingKernel


def randomize(model, seed=0, scale=0.5):
    rng = np.random.default_rng(seed)
    for p in model.params():
        p[...] = scale * rng.standard_normal(p.shape)
    return model


class TestFourier:
    def test_no_augmentation(self):
        assert_allclose(fourier_features(0.7, 0), [0.7])

    def test_zero(self):
        assert_allclose(fourier_features(0.0, 1), [0.0, 0.0, 1.0])

    def test_two_pairs(self):
        got = fourier_features(0.5, 2)
        assert_allclose(got, [0.5, math.sin(0.5), math.cos(0.5), math.sin(1.0), math.cos(1.0)])

    def test_batched_shape(self):
        assert fourier_features(np.zeros((4, 3)), 2).shape == (4, 3, 5)

    def test_config_bounds(self):
        with pytest.raises(ValueError):
            FourierConfig(-1)
        with pytest.raises(ValueError):
            FourierConfig(33)


class TestConstruction:
    @pytest.mark.parametrize("kwargs", [dict(m=0, k=4), dict(m=2, k=0), dict(m=2, k=4, hidden=()),
                                        dict(m=2, k=4, head_mode="mixture")])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            ArDensityModel(**kwargs)

    def test_fixed_quantile_requires_widths(self):
        with pytest.raises(ValueError):
            ArDensityModel(2, 4, "fixed-quantile")
        with pytest.raises(ValueError):
            ArDensityModel(2, 4, "fixed-quantile", fixed_w=np.full((3, 4), 0.25))

    def test_init_is_uniform_density(self, rng):
        for mode in ("adacat", "uniform", "adaptive-quantile"):
            model = ArDensityModel(3, 5, mode, (7,), fourier_b=2, seed=1)
            assert_allclose(joint_log_likelihood(model, rng.random((20, 3))), 0.0, atol=1e-12)

    def test_seeded_init_is_reproducible(self):
        a = ArDensityModel(2, 4, seed=3)
        b = ArDensityModel(2, 4, seed=3)
        for p, q in zip(a.params(), b.params()):
            assert np.array_equal(p, q)

    def test_first_dimension_is_bias_only(self):
        model = ArDensityModel(3, 4, hidden=(6, 6))
        assert model.layers[0][0][0].shape[0] == 0


class TestHeadModes:
    def test_uniform_mode_has_zero_psi(self, rng):
        model = randomize(ArDensityModel(2, 4, "uniform", (8,), seed=0))
        assert_allclose(conditional_logits(model, rng.random(1)).psi, 0.0)

    def test_adaptive_quantile_has_equal_mass(self, rng):
        model = randomize(ArDensityModel(2, 4, "adaptive-quantile", (8,), seed=0))
        params = params_from_logits(conditional_logits(model, rng.random(1)))
        assert_allclose(params.h, 0.25)

    def test_fixed_quantile_uses_given_widths(self, rng):
        fixed = np.array([[0.1, 0.2, 0.3, 0.4], [0.4, 0.3, 0.2, 0.1]])
        model = randomize(ArDensityModel(2, 4, "fixed-quantile", (8,), fixed_w=fixed))
        params = params_from_logits(conditional_logits(model, rng.random(1)))
        assert_allclose(params.w, fixed[1], atol=1e-7)

    def test_uniform_mode_equals_adacat_with_zeroed_psi_head(self, rng):
        ada = randomize(ArDensityModel(3, 6, "adacat", (8, 8), fourier_b=2, seed=4), seed=9)
        uni = ArDensityModel(3, 6, "uniform", (8, 8), fourier_b=2, seed=4)
        for t in range(3):
            for (Wa, ba), (Wu, bu) in zip(ada.layers[t][:-1], uni.layers[t][:-1]):
                Wu[...] = Wa
                bu[...] = ba
            W_out, b_out = ada.layers[t][-1]
            W_out[:, 6:] = 0.0
            b_out[6:] = 0.0
            uni.layers[t][-1][0][...] = W_out[:, :6]
            uni.layers[t][-1][1][...] = b_out[:6]
        X = rng.random((50, 3))
        assert np.array_equal(joint_log_likelihood(ada, X), joint_log_likelihood(uni, X))

    def test_prefix_length_checked(self):
        model = ArDensityModel(2, 4)
        with pytest.raises(ValueError):
            conditional_logits(model, [0.1, 0.2])


class TestLikelihood:
    def test_sum_of_conditionals(self, rng):
        model = randomize(ArDensityModel(3, 5, "adacat", (8,), fourier_b=1, seed=2))
        x = rng.random(3)
        total = sum(log_pdf(params_from_logits(conditional_logits(model, x[:t])), x[t]) for t in range(3))
        assert_allclose(joint_log_likelihood(model, x), total, rtol=1e-12)

    def test_rejects_out_of_cube(self):
        with pytest.raises(ValueError):
            joint_log_likelihood(ArDensityModel(1, 2), np.array([[1.0]]))

    def test_rejects_wrong_width(self):
        with pytest.raises(ValueError):
            joint_log_likelihood(ArDensityModel(2, 2), np.zeros((3, 3)))

    def test_small_bandwidth_objective_matches_likelihood(self, rng):
        model = randomize(ArDensityModel(2, 4, "adacat", (8,), seed=1))
        X = rng.random((40, 2))
        value, _ = smoothed_joint_objective(model, X, SmoothingKernel("uniform", 1e-9))
        assert_allclose(value, joint_log_likelihood(model, X).mean(), atol=1e-5)

    def test_non_finite_loss_names_location(self):
        model = ArDensityModel(1, 2, "adacat", (4,))
        model.layers[0][-1][1][0] = -np.inf  # first bin gets zero mass
        with pytest.raises(NonFiniteLossError) as info:
            smoothed_joint_objective(model, np.array([[0.1], [0.7]]))
        assert (info.value.d, info.value.t) == (0, 0)


class TestSampling:
    def test_init_samples_are_uniform(self):
        model = ArDensityModel(2, 4, "uniform", (4,), seed=0)
        X = ar_sample(model, 100_000, rng=7)
        for t in range(2):
            assert stats.kstest(X[:, t], "uniform").pvalue > 0.01

    def test_midpoint_mode(self, rng):
        model = randomize(ArDensityModel(2, 2, "adacat", (4,), seed=0))
        X = ar_sample(model, 500, rng=1, mode="midpoint")
        for row in X[:20]:
            for t in range(2):
                params = params_from_logits(conditional_logits(model, row[:t]))
                assert np.min(np.abs(params.edges[:-1] + 0.5 * params.w - row[t])) < 1e-12

    def test_seeded(self):
        model = randomize(ArDensityModel(2, 3, "adacat", (4,)))
        assert np.array_equal(ar_sample(model, 50, rng=3), ar_sample(model, 50, rng=3))

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            ar_sample(ArDensityModel(1, 2), 5, mode="nearest")


class TestSerialization:
    def test_round_trip(self, tmp_path, rng):
        fixed = np.array([[0.1, 0.2, 0.3, 0.4], [0.25, 0.25, 0.25, 0.25]])
        model = randomize(ArDensityModel(2, 4, "fixed-quantile", (5, 3), fourier_b=3, fixed_w=fixed, seed=2))
        model.scale_meta = np.array([[0.0, 2.0], [-1.0, 3.0]])
        path = tmp_path / "ckpt.json"
        model.save(path)
        loaded = ArDensityModel.load(path)
        X = rng.random((30, 2))
        assert np.array_equal(joint_log_likelihood(model, X), joint_log_likelihood(loaded, X))
        assert_allclose(loaded.scale_meta, model.scale_meta)
        assert loaded.to_dict() == model.to_dict()

    def test_rejects_future_schema(self):
        doc = ArDensityModel(1, 2).to_dict()
        doc["schema_version"] = 99
        with pytest.raises(ValueError, match="schema_version"):
            ArDensityModel.from_dict(doc)


def test_min_bin_width_at_init(rng):
    assert_allclose(min_bin_width(ArDensityModel(2, 8), rng.random((10, 2))), 1 / 8)
