"""Lagged covariances of the scalar process under the stationary law.

Two estimators are compared:

* ``covariance_mc`` samples ``Z_0`` from the gridded invariant density and
  iterates the exact map;
* ``covariance_op`` pushes ``Tr H * h`` through powers of the Ulam matrix.

Stationary means are computed by quadrature against the gridded density for
both, so the estimators share no sampling noise in their centring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ExcessiveHalting, InsufficientSignal, NotDecaying
from .grids import GridFunction1D
from .map_model import iterate_many
from .norms import _tr_terms

MAX_HALT = 1e-3
NOISE_FLOOR = 1e-12


@dataclass(frozen=True)
class ObservablePair:
    """Observables ``F`` and ``H`` on ``[-L, L]`` as 1-D grid functions."""

    F: GridFunction1D
    H: GridFunction1D

    @classmethod
    def from_callables(cls, F, H, L, n):
        return cls(GridFunction1D.from_function(F, -L, L, n), GridFunction1D.from_function(H, -L, L, n))


def observable(kind, L, n):
    """Named observables: ``x`` (``x/L``), ``one``, ``x2`` (``(x/L)^2``), ``step`` (``1[x > 0]``)."""
    funcs = {
        "x": lambda x: x / L,
        "one": lambda x: np.ones_like(x),
        "x2": lambda x: (x / L) ** 2,
        "step": lambda x: (x > 0).astype(float),
    }
    if kind not in funcs:
        raise ValueError(f"unknown observable {kind!r}; choose from {sorted(funcs)}")
    return GridFunction1D.from_function(funcs[kind], -L, L, n)


def _cell_averages(G, edges):
    """Average of a 1-D grid function over each interval of ``edges``."""
    pts = np.union1d(G.edges(), edges)
    pts = pts[(pts >= edges[0]) & (pts <= edges[-1])]
    mids = 0.5 * (pts[1:] + pts[:-1])
    w = np.diff(pts) * G(mids)
    cum = np.concatenate([[0.0], np.cumsum(w)])
    at = np.searchsorted(pts, edges)
    return np.diff(cum[at]) / np.diff(edges)


def _x_edges(h):
    return h.rect.x0 + np.arange(h.nx + 1) * h.hx


def stationary_mean(G, h_star):
    """``int G(x) h(x, y) dx dy`` for cell-constant ``h``."""
    marg = np.asarray(h_star.values).sum(axis=1) * h_star.cell_area
    return float(np.dot(_cell_averages(G, _x_edges(h_star)), marg))


def sample_stationary(h_star, count, seed):
    """Draw ``count`` points of ``Omega`` from the cell-constant density ``h_star``."""
    rng = np.random.default_rng(seed)
    mass = np.asarray(h_star.values, float).ravel()
    mass = mass / mass.sum()
    cells = rng.choice(mass.size, size=count, p=mass)
    i, j = np.divmod(cells, h_star.ny)
    x = h_star.rect.x0 + (i + rng.random(count)) * h_star.hx
    y = h_star.rect.y0 + (j + rng.random(count)) * h_star.hy
    return np.column_stack([x, y])


@dataclass
class MCEstimate:
    lags: np.ndarray
    cov: np.ndarray
    stderr: np.ndarray
    halted_fraction: float
    trajectories: int
    seed: int
    offset: int = 0


def covariance_mc(sys, pair, lags, trajectories, seed, h_star, offset=0, batches=50):
    """Monte Carlo ``Cov(F(X_{n+m}), H(X_m))`` with batch-mean standard errors.

    Raises
    ------
    ExcessiveHalting
        If more than ``1e-3`` of the trajectories hit the boundary set.
    """
    lags = np.asarray(sorted(set(int(n) for n in lags)), dtype=int)
    z0 = sample_stationary(h_star, trajectories, seed)
    horizon = int(lags.max()) + offset
    want = {int(n) + offset: k for k, n in enumerate(lags)}
    Fvals = np.zeros((len(lags), trajectories))
    Hval = np.zeros(trajectories)

    def record(step, x, alive):
        if step == offset:
            Hval[:] = pair.H(x)
        if step in want:
            Fvals[want[step]] = pair.F(x)

    alive = iterate_many(sys, z0[:, 0], z0[:, 1], horizon, record)
    halted = 1.0 - alive.mean()
    if halted > MAX_HALT:
        raise ExcessiveHalting(f"halted fraction {halted:.3g} exceeds {MAX_HALT:g}")
    muF = stationary_mean(pair.F, h_star)
    muH = stationary_mean(pair.H, h_star)
    prod = Fvals[:, alive] * Hval[alive]
    cov = prod.mean(axis=1) - muF * muH
    groups = np.array_split(np.arange(prod.shape[1]), batches)
    bm = np.stack([prod[:, g].mean(axis=1) for g in groups], axis=1)
    stderr = bm.std(axis=1, ddof=1) / math.sqrt(batches)
    return MCEstimate(lags, cov, stderr, float(halted), int(trajectories), int(seed), int(offset))


def covariance_op(op, h_star, pair, lags):
    """``<F, P^n (H h)> - mu(F) mu(H)`` by repeated application of the Ulam matrix."""
    lags = np.asarray(sorted(set(int(n) for n in lags)), dtype=int)
    edges = _x_edges(h_star)
    Fc = np.repeat(_cell_averages(pair.F, edges), h_star.ny)
    Hc = np.repeat(_cell_averages(pair.H, edges), h_star.ny)
    mass = np.asarray(h_star.values, float).ravel() * h_star.cell_area
    muF = float(np.dot(Fc, mass))
    muH = float(np.dot(Hc, mass))
    v = Hc * mass
    out = np.empty(len(lags))
    n = 0
    for k, lag in enumerate(lags):
        while n < lag:
            v = op.apply_mass(v)
            n += 1
        out[k] = float(np.dot(Fc, v)) - muF * muH
    return out


def covariance_quadrature(h_star, pair):
    """Lag-0 covariance by direct quadrature against the gridded density."""
    edges = _x_edges(h_star)
    FH = _cell_averages(pair.F, edges) * _cell_averages(pair.H, edges)
    marg = np.asarray(h_star.values).sum(axis=1) * h_star.cell_area
    return float(np.dot(FH, marg)) - stationary_mean(pair.F, h_star) * stationary_mean(pair.H, h_star)


@dataclass
class DecayFit:
    C: float
    rho: float
    window: list
    slope: float
    intercept: float


def fit_decay(lags, cov, stderr=None, floor=NOISE_FLOOR):
    """Least-squares fit of ``log|cov_n| = log C + n log rho``.

    Lags are kept when ``|cov| > 3 stderr`` (if ``stderr`` is given) and
    ``|cov| > floor``.

    Raises
    ------
    InsufficientSignal
        With fewer than four usable lags.
    NotDecaying
        If the fitted slope is not negative.
    """
    lags = np.asarray(lags, dtype=float)
    a = np.abs(np.asarray(cov, dtype=float))
    usable = a > floor
    if stderr is not None:
        usable &= a > 3.0 * np.asarray(stderr, dtype=float)
    if usable.sum() < 4:
        raise InsufficientSignal(f"only {int(usable.sum())} usable lags (need 4)")
    slope, intercept = np.polyfit(lags[usable], np.log(a[usable]), 1)
    if not slope < 0:
        raise NotDecaying(f"fitted slope {slope:.3g} is not negative")
    return DecayFit(float(math.exp(intercept)), float(math.exp(slope)),
                    [int(n) for n in lags[usable]], float(slope), float(intercept))


@dataclass
class DecayCurve:
    lags: np.ndarray
    cov_mc: np.ndarray
    stderr: np.ndarray
    cov_op: np.ndarray
    fit: DecayFit = None
    agreement: np.ndarray = field(default=None)

    @property
    def fitted_rho(self):
        return self.fit.rho

    @property
    def fitted_C(self):
        return self.fit.C

    @property
    def fit_window(self):
        return self.fit.window

    def agrees(self, lags=None, k=3.0):
        """``|cov_mc - cov_op| <= k * stderr`` at each lag (the operator side is deterministic)."""
        ok = np.abs(self.cov_mc - self.cov_op) <= k * self.stderr
        if lags is None:
            return ok
        sel = np.isin(self.lags, lags)
        return ok[sel]

    def bound_holds(self, tol=0.1):
        """``|cov_n| <= C rho^n (1 + tol)`` on the fit window."""
        sel = np.isin(self.lags, self.fit.window)
        bound = self.fit.C * self.fit.rho ** self.lags[sel] * (1.0 + tol)
        return np.abs(self.cov_op[sel]) <= bound


@dataclass
class DecayBoundFactor:
    value: float
    tr_F_l1_mu: float
    tr_norm_H: float
    terms: tuple
    constant_multiplier: float = 1.0
    constant_symbolic: bool = True


def decay_bound_factor(pair, params, L, gamma, h_star):
    """``L ||Tr F||_{L1(mu)} (2 gamma sup ... + 16 (1+gamma) eps0^(1-alpha) ||H||_inf + 2 gamma ||H||_1)``.

    The global constant of the bound is not computable; it is returned as
    multiplier 1 with ``constant_symbolic`` set.
    """
    edges = _x_edges(h_star)
    marg = np.asarray(h_star.values).sum(axis=1) * h_star.cell_area
    absF = GridFunction1D(pair.F.a, pair.F.b, np.abs(pair.F.values))
    trF = float(np.dot(_cell_averages(absF, edges), marg))
    norm, terms = _tr_terms(pair.H, params, L, gamma)
    return DecayBoundFactor(trF * norm, trF, norm, terms)
