import numpy as np
import pytest
from numpy.testing import assert_allclose
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from adacat import AdaCatDensity


@pytest.fixture
def blob():
    rng = np.random.default_rng(0)
    return np.concatenate([rng.normal(0, 0.1, (400, 1)), rng.normal(1, 0.3, (400, 1))])


def small(**kwargs):
    base = dict(n_bins=6, hidden_layer_sizes=(8,), epochs=5, batch_size=64, learning_rate=0.05,
                random_state=0)
    base.update(kwargs)
    return AdaCatDensity(**base)


def test_params_round_trip():
    est = small(mode="uniform")
    assert clone(est).get_params() == est.get_params()
    assert est.set_params(n_bins=3).n_bins == 3


def test_not_fitted():
    with pytest.raises(NotFittedError):
        small().score_samples(np.zeros((1, 1)))


def test_fit_improves_on_uniform(blob):
    est = small().fit(blob)
    spread = blob.max() - blob.min()
    assert est.score_samples(blob).mean() > -np.log(spread) + 0.2
    assert est.report_.final.epoch == 5


def test_zero_epochs_is_uniform_over_range(blob):
    est = small(epochs=0).fit(blob)
    assert_allclose(est.score_samples(blob[:5]), -np.log(est.scale_meta_[0, 1]))


def test_outside_range_is_minus_inf(blob):
    est = small(epochs=0).fit(blob)
    assert est.score_samples([[blob.max() + 10.0]])[0] == -np.inf


def test_score_is_sum(blob):
    est = small(epochs=1).fit(blob)
    assert_allclose(est.score(blob[:10]), est.score_samples(blob[:10]).sum())


def test_sample_shape_and_range(blob):
    est = small(epochs=2).fit(blob)
    draws = est.sample(300, random_state=1)
    assert draws.shape == (300, 1)
    assert draws.min() >= blob.min() and draws.max() <= est.scale_meta_[0].sum()
    assert np.array_equal(draws, est.sample(300, random_state=1))


def test_deterministic_fit(blob):
    a = small(smoothing="gaussian", bandwidth=0.01).fit(blob).score_samples(blob[:20])
    b = small(smoothing="gaussian", bandwidth=0.01).fit(blob).score_samples(blob[:20])
    assert np.array_equal(a, b)


def test_fixed_quantile_mode(blob):
    est = small(mode="fixed-quantile", epochs=0).fit(blob)
    assert np.isfinite(est.score_samples(blob)).all()


def test_rejects_constant_column():
    with pytest.raises(ValueError):
        small().fit(np.ones((10, 1)))


def test_rejects_nan():
    with pytest.raises(ValueError):
        small().fit(np.array([[0.0], [np.nan]]))
