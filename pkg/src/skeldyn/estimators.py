"""Estimator-style wrappers around the operator and decay pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .correlation import (DecayCurve, ObservablePair, covariance_mc, covariance_op,
                          fit_decay, observable, sample_stationary)
from .map_model import InducedSystem, PiecewiseMapSpec, induce
from .transfer import build_ulam, invariant_density, marginal_density


def _system(X):
    if isinstance(X, InducedSystem):
        return X
    if isinstance(X, PiecewiseMapSpec):
        return induce(X)
    spec = getattr(X, "spec", None)
    if isinstance(spec, PiecewiseMapSpec):
        return induce(spec)
    raise TypeError("fit expects a PiecewiseMapSpec, an InducedSystem or a built-in example")


def _check_seed(random_state):
    if isinstance(random_state, (bool, np.bool_)) or not isinstance(random_state, (int, np.integer)):
        raise ValueError("random_state must be an explicit integer seed")
    return int(random_state)


class UlamDensity(BaseEstimator):
    """Invariant density of an induced system by Ulam's method.

    Parameters
    ----------
    nx, ny : int
        Grid resolution on ``Omega``.
    samples_per_cell : int
    random_state : int
        Seed of the sampling design (mandatory, no clock default).
    sampling : {"lattice", "random"}
    tol : float
        Power-iteration tolerance on the L1 step residual.
    max_iters : int
    k_eigs : int
        Leading eigenvalues to report.

    Attributes
    ----------
    operator_ : UlamOperator
    report_ : SpectralReport
    density_ : GridFunction
    marginals_ : tuple of GridFunction1D
    """

    def __init__(self, nx=64, ny=64, samples_per_cell=200, random_state=0, sampling="lattice",
                 tol=1e-13, max_iters=10_000, k_eigs=6, threads=1):
        self.nx = nx
        self.ny = ny
        self.samples_per_cell = samples_per_cell
        self.random_state = random_state
        self.sampling = sampling
        self.tol = tol
        self.max_iters = max_iters
        self.k_eigs = k_eigs
        self.threads = threads

    def fit(self, X, y=None):
        seed = _check_seed(self.random_state)
        self.system_ = _system(X)
        self.operator_ = build_ulam(self.system_, self.nx, self.ny, self.samples_per_cell,
                                    seed, self.sampling, self.threads)
        self.report_ = invariant_density(self.operator_, self.tol, self.max_iters, self.k_eigs)
        self.density_ = self.report_.invariant_density
        self.marginals_ = marginal_density(self.density_, self.system_.gamma)
        return self

    def predict(self, X):
        """Density values at points of ``Omega`` (rows ``(x, y)``)."""
        check_is_fitted(self, "density_")
        X = check_array(X, ensure_min_features=2)
        if X.shape[1] != 2:
            raise ValueError("expected points with two coordinates")
        return self.density_(X[:, 0], X[:, 1])

    def score_samples(self, X):
        """Log density at the points (``-inf`` where the density vanishes)."""
        with np.errstate(divide="ignore"):
            return np.log(self.predict(X))

    def sample(self, n_samples=1, random_state=0):
        check_is_fitted(self, "density_")
        return sample_stationary(self.density_, int(n_samples), _check_seed(random_state))


class CorrelationDecay(BaseEstimator):
    """Lagged covariances of ``F(X_n)`` and ``H(X_0)`` with an exponential fit.

    Parameters
    ----------
    F, H : str or GridFunction1D
        Named observable (see :func:`skeldyn.correlation.observable`) or grid function.
    lags : int
        Covariances at lags ``0..lags``.
    trajectories : int
    random_state : int
    density : UlamDensity, optional
        Pre-fitted density; fitted on demand otherwise.

    Attributes
    ----------
    curve_ : DecayCurve
    rho_, C_ : float
        Fitted rate and prefactor (from the operator estimator).
    """

    def __init__(self, F="x", H="x", lags=20, trajectories=100_000, random_state=0, density=None,
                 offset=0):
        self.F = F
        self.H = H
        self.lags = lags
        self.trajectories = trajectories
        self.random_state = random_state
        self.density = density
        self.offset = offset

    def _pair(self, sys, n):
        L = sys.L
        F = observable(self.F, L, n) if isinstance(self.F, str) else self.F
        H = observable(self.H, L, n) if isinstance(self.H, str) else self.H
        return ObservablePair(F, H)

    def fit(self, X, y=None):
        seed = _check_seed(self.random_state)
        dens = self.density
        if dens is None or not hasattr(dens, "density_"):
            dens = UlamDensity(random_state=seed).fit(X)
        self.density_ = dens
        sys = dens.system_
        h = dens.density_
        self.pair_ = self._pair(sys, h.nx)
        lags = np.arange(0, int(self.lags) + 1)
        cop = covariance_op(dens.operator_, h, self.pair_, lags)
        mc = covariance_mc(sys, self.pair_, lags, int(self.trajectories), seed, h, self.offset)
        fit = fit_decay(lags[1:], cop[1:])
        self.curve_ = DecayCurve(lags, mc.cov, mc.stderr, cop, fit)
        self.halted_fraction_ = mc.halted_fraction
        self.rho_ = fit.rho
        self.C_ = fit.C
        return self

    def predict(self, X):
        """Fitted envelope ``C rho^n`` at the lags in ``X``."""
        check_is_fitted(self, "curve_")
        n = check_array(np.asarray(X, dtype=float).reshape(-1, 1)).ravel()
        return self.C_ * self.rho_ ** n
