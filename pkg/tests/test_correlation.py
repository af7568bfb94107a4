import math

import numpy as np
import pytest

from skeldyn.correlation import (DecayCurve, ObservablePair, covariance_mc, covariance_op,
                                 covariance_quadrature, fit_decay, observable, sample_stationary,
                                 stationary_mean, decay_bound_factor)
from skeldyn.exceptions import ExcessiveHalting, InsufficientSignal, NotDecaying
from skeldyn.grids import GridFunction, GridFunction1D, Rect
from skeldyn.norms import NormParams


def test_observables():
    x = observable("x", 2.0, 8)
    assert x.a == -2.0 and x.b == 2.0
    np.testing.assert_allclose(x.values, x.centers() / 2)
    assert observable("step", 1.0, 4).values.tolist() == [0, 0, 1, 1]
    with pytest.raises(ValueError):
        observable("cos", 1.0, 4)


def test_stationary_sampler_matches_cell_masses():
    rng = np.random.default_rng(0)
    vals = rng.uniform(0.1, 1.0, (6, 5))
    h = GridFunction(Rect(-1, 1, -0.5, 0.5), vals / (vals.sum() * (2 / 6) * (1 / 5)))
    n = 200_000
    pts = sample_stationary(h, n, seed=3)
    i, j = h.cell_index(pts[:, 0], pts[:, 1])
    idx = i * h.ny + j
    counts = np.bincount(idx, minlength=30)
    p = h.values.ravel() * h.cell_area
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 4 * sigma)


def test_stationary_sampler_point_mass():
    vals = np.zeros((4, 4))
    vals[2, 1] = 4.0
    h = GridFunction(Rect(0, 1, 0, 1), vals)
    pts = sample_stationary(h, 500, seed=1)
    assert np.all((pts[:, 0] >= 0.5) & (pts[:, 0] < 0.75))
    assert np.all((pts[:, 1] >= 0.25) & (pts[:, 1] < 0.5))


def test_stationary_mean_uniform():
    h = GridFunction(Rect(-1, 1, -1, 1), np.full((10, 10), 0.25))
    assert stationary_mean(observable("x2", 1.0, 1000), h) == pytest.approx(1 / 3, abs=1e-6)


def test_mc_constant_observables_zero(linear, linear_ulam):
    _, rep = linear_ulam
    one = observable("one", 1.0, 64)
    mc = covariance_mc(linear.system, ObservablePair(one, one), range(5), 20_000, 4,
                       rep.invariant_density)
    assert np.all(np.abs(mc.cov) <= np.maximum(3 * mc.stderr, 1e-12))


def test_mc_lag_zero_variance_nonnegative(nonlinear, nonlinear_ulam):
    _, rep = nonlinear_ulam
    x = observable("x", 1.0, 64)
    mc = covariance_mc(nonlinear.system, ObservablePair(x, x), [0, 1, 2], 20_000, 5,
                       rep.invariant_density)
    assert mc.cov[0] > 0
    assert mc.halted_fraction <= 1e-3


def test_mc_excessive_halting(linear):
    # halting is rare here, so a negative threshold is needed to trip the guard
    import skeldyn.correlation as corr
    h = GridFunction(linear.system.omega, np.full((8, 8), 1 / linear.system.omega.area))
    x = observable("x", 1.0, 8)
    old = corr.MAX_HALT
    corr.MAX_HALT = -1.0
    try:
        with pytest.raises(ExcessiveHalting):
            covariance_mc(linear.system, ObservablePair(x, x), [0, 1], 100, 1, h)
    finally:
        corr.MAX_HALT = old


def test_op_covariance_constant_H_vanishes(nonlinear_ulam):
    op, rep = nonlinear_ulam
    pair = ObservablePair(observable("x", 1.0, 64), observable("one", 1.0, 64))
    cov = covariance_op(op, rep.invariant_density, pair, range(8))
    assert np.abs(cov).max() < 1e-12


def test_op_lag_zero_equals_quadrature(nonlinear_ulam):
    op, rep = nonlinear_ulam
    pair = ObservablePair(observable("x", 1.0, 100), observable("x2", 1.0, 37))
    c0 = covariance_op(op, rep.invariant_density, pair, [0])[0]
    assert c0 == pytest.approx(covariance_quadrature(rep.invariant_density, pair), abs=1e-12)


def test_fit_exact_geometric():
    n = np.arange(1, 15)
    f = fit_decay(n, 0.7 ** n)
    assert f.rho == pytest.approx(0.7, abs=1e-9)
    assert f.C == pytest.approx(1.0, abs=1e-9)
    assert f.window == list(range(1, 15))


def test_fit_noisy_geometric():
    rng = np.random.default_rng(2)
    n = np.arange(1, 20)
    cov = 3 * 0.5 ** n + rng.normal(0, 1e-12, n.size)
    f = fit_decay(n, cov)
    assert f.rho == pytest.approx(0.5, abs=1e-3)
    assert f.C == pytest.approx(3.0, rel=1e-2)


def test_fit_respects_stderr():
    n = np.arange(1, 10)
    cov = 0.6 ** n
    err = np.full(n.size, 0.01)
    assert max(fit_decay(n, cov, err).window) == max(k for k in n if 0.6 ** k > 0.03)


def test_fit_errors():
    with pytest.raises(InsufficientSignal):
        fit_decay(np.arange(1, 10), np.full(9, 1e-14))
    with pytest.raises(NotDecaying):
        fit_decay(np.arange(1, 10), 1.1 ** np.arange(1, 10))


def test_decay_curve_helpers():
    n = np.arange(0, 8)
    cov = 2 * 0.5 ** n
    fit = fit_decay(n[1:], cov[1:])
    curve = DecayCurve(n, cov + 1e-4, np.full(8, 1e-4), cov, fit)
    assert curve.agrees().all()
    assert curve.agrees(lags=[1, 2], k=0.5).sum() == 0
    assert curve.bound_holds().all()


def test_mc_shift_invariance(linear, linear_ulam):
    _, rep = linear_ulam
    x = observable("x", 1.0, 64)
    pair = ObservablePair(x, x)
    a = covariance_mc(linear.system, pair, range(4), 40_000, 9, rep.invariant_density, offset=0)
    b = covariance_mc(linear.system, pair, range(4), 40_000, 10, rep.invariant_density, offset=5)
    se = np.hypot(a.stderr, b.stderr)
    assert np.all(np.abs(a.cov - b.cov) <= 4 * se)


def _random_pair(rng, n):
    c = rng.normal(size=(2, 3))
    F = lambda x: c[0, 0] * x + c[0, 1] * x ** 2 + c[0, 2] * np.sin(3 * x)
    H = lambda x: c[1, 0] * x + c[1, 1] * x ** 2 + c[1, 2] * np.cos(2 * x)
    return ObservablePair.from_callables(F, H, 1.0, n)


@pytest.mark.parametrize("which", ["linear", "nonlinear"])
def test_estimators_agree(which, request):
    ex = request.getfixturevalue(which)
    op, rep = request.getfixturevalue(which + "_ulam")
    h = rep.invariant_density
    rng = np.random.default_rng(21)
    lags = np.arange(0, 6)
    for t in range(3):
        pair = _random_pair(rng, 64)
        mc = covariance_mc(ex.system, pair, lags, 50_000, 100 + t, h)
        cop = covariance_op(op, h, pair, lags)
        # 4 sigma plus a small allowance for the grid bias of the operator side
        assert np.all(np.abs(mc.cov - cop) <= 4 * mc.stderr + 2e-3 * max(1.0, abs(cop[0])))


def test_decay_bound_factor_zero():
    h = GridFunction(Rect(-1, 1, -0.5, 0.5), np.full((16, 16), 0.5))
    p = NormParams(alpha=1.0, eps0=0.1, eps1=1.0)
    zero = GridFunction1D(-1, 1, np.zeros(32))
    one = GridFunction1D(-1, 1, np.ones(32))
    assert decay_bound_factor(ObservablePair(one, zero), p, 1.0, 0.5, h).value == 0.0
    assert decay_bound_factor(ObservablePair(zero, one), p, 1.0, 0.5, h).value == 0.0


def test_decay_bound_factor_constants():
    g, L = 0.5, 1.0
    h = GridFunction(Rect(-1, 1, -g, g), np.full((16, 16), 1 / (4 * g)))
    p = NormParams(alpha=0.5, eps0=0.25, eps1=1.0)
    one = GridFunction1D(-1, 1, np.ones(32))
    out = decay_bound_factor(ObservablePair(one, one), p, L, g, h)
    t1, t2, t3 = out.terms
    assert out.tr_F_l1_mu == pytest.approx(1.0, abs=1e-12)
    assert t1 == 0.0
    assert t2 == pytest.approx(16 * (1 + g) * L * math.sqrt(0.25), rel=1e-12)
    assert t3 == pytest.approx(2 * g * L * 2 * L, rel=1e-12)
    assert out.value == pytest.approx(t2 + t3, rel=1e-12)
    assert out.constant_symbolic
