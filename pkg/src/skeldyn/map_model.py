"""Piecewise maps on [-L, L]^2 and the induced planar system.

A map ``phi`` is declared piece by piece. Each :class:`Piece` is an open
set given implicitly by strict inequalities ``g_i(u, v) < 0`` and carries a
:class:`Branch`, a smooth extension of ``phi`` to a collar of the piece.
Points where no piece's inequalities all hold form the boundary set; ``phi``
is undefined there and orbits that land on it halt.

The scalar recurrence ``X[n+2] = phi(X[n], X[n+1])`` is conjugate to the
planar map

    T(x, y) = (y / gamma, gamma * phi(x, y / gamma)),   gamma = A ** -0.5,

on ``Omega = [-L, L] x [-gamma L, gamma L]`` through ``Z[n] = (X[n], gamma X[n+1])``.

Floating-point convention: flattening is ``gamma * v`` and unflattening is
``y / gamma``. :func:`iterate_process` runs the planar orbit and records the
raw ``phi`` values, so for every ``n`` the orbit satisfies
``Z[n].y == gamma * X[n+1]`` bit for bit and ``Z[n].x == (gamma * X[n]) / gamma``
(the round trip of ``X[n]``, equal to ``X[n]`` except for a final-ulp
rounding in some cases; ``Z[0].x == X[0]`` exactly).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import InvalidBounds, OrbitHalted, OutOfDomain
from .grids import Rect

NO_PIECE = -1
OUTSIDE = -2


@dataclass(frozen=True)
class Branch:
    """Smooth extension of ``phi`` to the collar of one piece.

    ``value(u, v)`` and ``gradient(u, v)`` must accept numpy arrays.
    ``declared_A`` and ``declared_M`` are certified bounds
    ``|d phi/du| >= A`` and ``|d phi/dv| <= M`` on the collar; they are
    spot-checked by :mod:`skeldyn.hypotheses`, never proved.
    """

    value: Callable
    gradient: Callable
    declared_A: float
    declared_M: float
    holder_C: float = 0.0


@dataclass(frozen=True)
class Piece:
    """Open piece ``{(u, v) : g(u, v) < 0 for every g in constraints}``."""

    index: int
    constraints: tuple
    branch: Branch
    bbox: Optional[Rect] = None

    def contains(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        inside = np.ones(np.broadcast(u, v).shape, dtype=bool)
        for g in self.constraints:
            inside &= np.asarray(g(u, v)) < 0
        return inside


@dataclass(frozen=True)
class PiecewiseMapSpec:
    """A piecewise map on ``[-L, L]^2``.

    Parameters
    ----------
    L : float
        Half-width of the square.
    alpha : float
        Hölder exponent of the branch gradients, in (0, 1].
    eps1 : float
        Collar radius: each branch is defined on the closed
        ``eps1``-neighbourhood of its piece.
    Y : int
        Maximal number of boundary arcs crossing at one point.
    pieces : sequence of Piece
    locator : callable, optional
        Fast vectorised ``(u, v) -> position in pieces`` (``-1`` on the
        boundary set). When omitted every piece's inequalities are tested.
    name : str
    """

    L: float
    alpha: float
    eps1: float
    Y: int
    pieces: tuple
    locator: Optional[Callable] = field(default=None, compare=False)
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        if not self.L > 0:
            raise ValueError("L must be positive")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not self.eps1 > 0:
            raise ValueError("eps1 must be positive")
        if int(self.Y) != self.Y or self.Y < 1:
            raise ValueError("Y must be a positive integer")
        if not self.pieces:
            raise ValueError("a map needs at least one piece")

    @property
    def square(self):
        return Rect(-self.L, self.L, -self.L, self.L)

    @property
    def A(self):
        return min(p.branch.declared_A for p in self.pieces)

    @property
    def M(self):
        return max(p.branch.declared_M for p in self.pieces)

    def locate_generic(self, u, v):
        """Piece positions by testing every piece; ``-1`` when none (or several) fire."""
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        pos = np.full(u.shape, NO_PIECE, dtype=np.int64)
        hits = np.zeros(u.shape, dtype=np.int64)
        for k, piece in enumerate(self.pieces):
            inside = piece.contains(u, v)
            pos[inside] = k
            hits += inside
        pos[hits != 1] = NO_PIECE
        return pos

    def locate(self, u, v):
        """Vectorised piece lookup: position in ``pieces``, ``-1`` on the
        boundary set, ``-2`` outside the closed square."""
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        pos = self.locator(u, v) if self.locator is not None else self.locate_generic(u, v)
        pos = np.asarray(pos, dtype=np.int64).copy()
        pos[~self.square.contains(u, v)] = OUTSIDE
        return pos

    def branch_values(self, u, v, pos):
        """Evaluate branch ``pos[m]`` at ``(u[m], v[m])``; NaN where ``pos < 0``."""
        return _grouped(self.pieces, u, v, pos, lambda b, uu, vv: b.value(uu, vv))

    def branch_gradients(self, u, v, pos):
        du = _grouped(self.pieces, u, v, pos, lambda b, uu, vv: b.gradient(uu, vv)[0])
        dv = _grouped(self.pieces, u, v, pos, lambda b, uu, vv: b.gradient(uu, vv)[1])
        return du, dv

    def phi(self, u, v):
        """Vectorised ``phi``: NaN on the boundary set and outside the square."""
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        return self.branch_values(u, v, self.locate(u, v))


def _grouped(pieces, u, v, pos, fn):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    out = np.full(u.shape, np.nan)
    flat_pos = pos.ravel()
    order = np.argsort(flat_pos, kind="stable")
    sorted_pos = flat_pos[order]
    starts = np.searchsorted(sorted_pos, 0)
    if starts == sorted_pos.size:
        return out
    uf, vf, of = u.ravel(), v.ravel(), out.reshape(-1)
    keys, first = np.unique(sorted_pos[starts:], return_index=True)
    bounds = list(first + starts) + [sorted_pos.size]
    for key, lo, hi in zip(keys, bounds[:-1], bounds[1:]):
        idx = order[lo:hi]
        of[idx] = np.broadcast_to(fn(pieces[key].branch, uf[idx], vf[idx]), idx.shape)
    return out


def evaluate_phi(spec, point):
    """``phi`` at one point of the square, or ``None`` on the boundary set.

    Raises
    ------
    OutOfDomain
        If the point lies outside ``[-L, L]^2``.
    """
    u, v = map(float, point)
    if not (abs(u) <= spec.L and abs(v) <= spec.L):
        raise OutOfDomain(f"point {point} outside [-{spec.L}, {spec.L}]^2")
    pos = int(spec.locate(np.array([u]), np.array([v]))[0])
    if pos < 0:
        return None
    return float(np.asarray(spec.pieces[pos].branch.value(np.array([u]), np.array([v])))[0])


@dataclass(frozen=True)
class InducedSystem:
    """The flattened planar map ``T`` on ``Omega``."""

    spec: PiecewiseMapSpec
    gamma: float

    @property
    def L(self):
        return self.spec.L

    @property
    def omega(self):
        L = self.spec.L
        return Rect(-L, L, -self.gamma * L, self.gamma * L)

    def flatten(self, v):
        return self.gamma * np.asarray(v, dtype=float)

    def unflatten(self, y):
        return np.asarray(y, dtype=float) / self.gamma

    def locate(self, x, y):
        """Flattened-piece lookup (``U_k`` membership) for points of ``Omega``."""
        return self.spec.locate(x, self.unflatten(y))

    def branch_map(self, k, x, y):
        """``T_k`` evaluated by formula, valid on the whole flattened collar."""
        v = self.unflatten(y)
        branch = self.spec.pieces[k].branch
        return v, self.gamma * np.asarray(branch.value(np.asarray(x, float), v), dtype=float)

    def branch_jacobian(self, k, x, y):
        """Entries ``(0, 1/gamma; gamma phi_u, phi_v)`` of ``DT_k``."""
        du, dv = self.spec.pieces[k].branch.gradient(np.asarray(x, float), self.unflatten(y))
        return self.gamma * np.asarray(du, float), np.asarray(dv, float)

    def step_arrays(self, x, y):
        """Vectorised ``T``.

        Returns ``(x_new, y_new, raw_phi, pos)``; entries where ``pos < 0``
        (boundary set or outside ``Omega``) are NaN.
        """
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        v = self.unflatten(y)
        pos = self.spec.locate(x, v)
        raw = self.spec.branch_values(x, v, pos)
        x_new = np.where(pos >= 0, v, np.nan)
        return x_new, self.gamma * raw, raw, pos


def induce(spec):
    """Build the induced system with ``gamma = 1 / sqrt(min declared_A)``.

    Raises
    ------
    InvalidBounds
        If ``min declared_A <= 1``.
    """
    A = spec.A
    if not A > 1:
        raise InvalidBounds(f"min declared_A must exceed 1, got {A}")
    return InducedSystem(spec, 1.0 / math.sqrt(A))


def step_T(sys, z):
    """One step of ``T`` from ``z`` in ``Omega``; ``None`` on the boundary set."""
    x, y = map(float, z)
    if not bool(sys.omega.contains(x, y)):
        raise OutOfDomain(f"point {z} outside Omega")
    xn, yn, _, pos = sys.step_arrays(np.array([x]), np.array([y]))
    if pos[0] < 0:
        return None
    return float(xn[0]), float(yn[0])


def _process_gamma(spec):
    try:
        return induce(spec)
    except InvalidBounds:
        return InducedSystem(spec, 1.0)


def iterate_process(spec, x0, x1, n):
    """``X[0..n]`` of the recurrence ``X[k+2] = phi(X[k], X[k+1])``.

    Raises
    ------
    OutOfDomain
        If a seed lies outside ``[-L, L]``.
    OrbitHalted
        If step ``k`` lands on the boundary set; the exception carries the
        values computed so far.
    """
    L = spec.L
    if not (abs(x0) <= L and abs(x1) <= L):
        raise OutOfDomain("seeds must lie in [-L, L]")
    values = [float(x0), float(x1)][: n + 1]
    if n < 2:
        return np.array(values)
    sys = _process_gamma(spec)
    z = np.array([float(x0)]), sys.flatten(np.array([float(x1)]))
    for k in range(2, n + 1):
        xn, yn, raw, pos = sys.step_arrays(*z)
        if pos[0] < 0:
            raise OrbitHalted(k, np.array(values))
        values.append(float(raw[0]))
        z = xn, yn
    return np.array(values)


def planar_orbit(sys, z0, n):
    """``Z[0..n]`` of the planar map as an ``(n+1, 2)`` array (NaN after a halt)."""
    out = np.full((n + 1, 2), np.nan)
    out[0] = z0
    x, y = np.array([z0[0]], float), np.array([z0[1]], float)
    for k in range(1, n + 1):
        x, y, _, pos = sys.step_arrays(x, y)
        if pos[0] < 0:
            break
        out[k] = x[0], y[0]
    return out


def iterate_many(sys, x0, y0, n, record=None):
    """Advance many planar orbits ``n`` steps at once.

    Parameters
    ----------
    sys : InducedSystem
    x0, y0 : array_like
        Starting points in ``Omega``.
    n : int
        Number of steps.
    record : callable, optional
        ``record(step, x, alive)`` is called for ``step = 0..n`` with the
        current first coordinates.

    Returns
    -------
    alive : ndarray of bool
        Orbits that never hit the boundary set.
    """
    x = np.asarray(x0, dtype=float).copy()
    y = np.asarray(y0, dtype=float).copy()
    alive = np.ones(x.shape, dtype=bool)
    if record is not None:
        record(0, x, alive)
    for k in range(1, n + 1):
        xn, yn, _, pos = sys.step_arrays(np.where(alive, x, 0.0), np.where(alive, y, 0.0))
        alive &= pos >= 0
        x = np.where(alive, xn, 0.0)
        y = np.where(alive, yn, 0.0)
        if record is not None:
            record(k, x, alive)
    return alive


def square_constraints(L):
    """The four strict inequalities of the open square ``]-L, L[^2``."""
    return (
        lambda u, v: np.asarray(u) - L,
        lambda u, v: -L - np.asarray(u),
        lambda u, v: np.asarray(v) - L,
        lambda u, v: -L - np.asarray(v),
    )


def piecewise_from_branches(L, alpha, eps1, Y, pieces: Sequence[Piece], name="custom"):
    """Convenience constructor mirroring :class:`PiecewiseMapSpec`."""
    return PiecewiseMapSpec(L=L, alpha=alpha, eps1=eps1, Y=Y, pieces=tuple(pieces), name=name)
