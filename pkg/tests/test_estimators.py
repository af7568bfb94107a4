import numpy as np
import pytest
from sklearn.base import clone

from skeldyn.estimators import CorrelationDecay, UlamDensity
from skeldyn.map_model import induce


def test_params_roundtrip_and_clone():
    est = UlamDensity(nx=16, ny=8, samples_per_cell=10, random_state=3)
    params = est.get_params()
    assert params["nx"] == 16 and params["random_state"] == 3
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(ny=12)
    assert est.ny == 12


@pytest.mark.parametrize("seed", [None, 1.5, "7", True])
def test_seed_must_be_integer(linear, seed):
    with pytest.raises(ValueError):
        UlamDensity(nx=8, ny=8, samples_per_cell=5, random_state=seed).fit(linear)


def test_predict_before_fit():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        UlamDensity().predict(np.zeros((1, 2)))


def test_fit_accepts_spec_system_or_example(linear):
    kw = dict(nx=16, ny=16, samples_per_cell=20, random_state=2)
    a = UlamDensity(**kw).fit(linear)
    b = UlamDensity(**kw).fit(linear.spec)
    c = UlamDensity(**kw).fit(induce(linear.spec))
    np.testing.assert_array_equal(a.density_.values, b.density_.values)
    np.testing.assert_array_equal(a.density_.values, c.density_.values)
    with pytest.raises(TypeError):
        UlamDensity(**kw).fit("linear")


def test_predict_and_sample(linear):
    est = UlamDensity(nx=16, ny=16, samples_per_cell=50, random_state=2).fit(linear)
    g = linear.gamma
    pts = np.array([[0.0, 0.0], [0.5, -0.5 * g]])
    dens = est.predict(pts)
    assert np.allclose(dens, 1 / (4 * g), rtol=0.1)
    assert np.all(np.isfinite(est.score_samples(pts)))
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, 3)))
    s = est.sample(100, random_state=4)
    assert s.shape == (100, 2)
    np.testing.assert_array_equal(s, est.sample(100, random_state=4))
    f1, f2 = est.marginals_
    assert f1.integral() == pytest.approx(1.0, abs=1e-9)


def test_correlation_decay_fit_predict(nonlinear):
    dens = UlamDensity(nx=32, ny=32, samples_per_cell=100, random_state=1).fit(nonlinear)
    est = CorrelationDecay(lags=8, trajectories=20_000, random_state=5, density=dens).fit(nonlinear)
    assert 0 < est.rho_ < 1
    assert est.curve_.lags.tolist() == list(range(9))
    np.testing.assert_allclose(est.predict([0, 1]), [est.C_, est.C_ * est.rho_])
    assert est.halted_fraction_ <= 1e-3
    assert clone(est).get_params()["lags"] == 8
