"""The two fully specified systems: a quadratic-strip map and a linear-strip family.

Nonlinear example
    ``L = 1``, ``eps1 = 1``, ``alpha = 1``, ``Y = 3`` and 430 pieces
    ``O_k = {f_k(u) < v < f_{k+1}(u)}`` for ``k = -179..250`` with
    ``f_k(u) = -35.5 u^2 - 214 u + k - 1/2`` and ``phi_k = 2v - 2 f_k(u) - 1``.

Linear example
    ``phi_n(u, v) = a v + b u - 2 n L`` on the strip
    ``(2n - 1) L < a v + b u < (2n + 1) L``; admissible when
    ``|a| < (|b| - S) / sqrt(S)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exceptions import NotAdmissible
from .map_model import NO_PIECE, Branch, Piece, PiecewiseMapSpec, induce, square_constraints

GUARD_BAND = 1e-12

NONLINEAR_K_MIN = -179
NONLINEAR_K_MAX = 250


# ---------------------------------------------------------------- nonlinear

def f_k(u, k):
    """Lower boundary curve of piece ``k``."""
    u = np.asarray(u, dtype=float)
    return -35.5 * u * u - 214.0 * u + (k - 0.5)


def _w(u, v):
    # v - f_k(u) = w - k + 1/2, so the piece index is floor(w + 1/2)
    return v + (35.5 * u * u + 214.0 * u)


def _nonlinear_branch(k):
    def value(u, v):
        return 2.0 * (_w(np.asarray(u, float), np.asarray(v, float)) - k)

    def gradient(u, v):
        u = np.asarray(u, dtype=float)
        return 142.0 * u + 428.0, np.full(np.broadcast(u, np.asarray(v)).shape, 2.0)

    return Branch(value, gradient, declared_A=144.0, declared_M=2.0, holder_C=142.0)


def _nonlinear_piece(k, L):
    lower = lambda u, v, k=k: f_k(u, k) - np.asarray(v)
    upper = lambda u, v, k=k: np.asarray(v) - f_k(u, k + 1)
    return Piece(k, square_constraints(L) + (lower, upper), _nonlinear_branch(k))


def _nonlinear_locator(u, v):
    t = _w(u, v) + 0.5
    k = np.floor(t)
    ok = (t != k) & (np.abs(u) < 1.0) & (np.abs(v) < 1.0)
    ok &= (k >= NONLINEAR_K_MIN) & (k <= NONLINEAR_K_MAX)
    return np.where(ok, k - NONLINEAR_K_MIN, NO_PIECE).astype(np.int64)


@dataclass(frozen=True)
class NonlinearExample:
    spec: PiecewiseMapSpec

    name = "nonlinear"

    @property
    def system(self):
        return induce(self.spec)

    @property
    def gamma(self):
        return 1.0 / 12.0

    @staticmethod
    def region(x, y):
        """Region of ``Omega`` containing ``(x, y)``: 1 above ``y = (2x+1)/12``,
        3 below ``y = (2x-1)/12``, 2 between, 0 on a dividing line."""
        z = np.asarray(x, float) - 6.0 * np.asarray(y, float)
        out = np.zeros(z.shape, dtype=int)
        out[z < -0.5] = 1
        out[(z > -0.5) & (z < 0.5)] = 2
        out[z > 0.5] = 3
        return out

    # summation limits of the closed-form transfer operator in each region
    K_LIMITS = {1: (-179, 248), 2: (-178, 249), 3: (-177, 250)}

    @staticmethod
    def psi(x, y, k):
        """``Psi_k(x, y) = 214^2 - 71 (2x - 12y) + 142 k``."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        return 214.0 ** 2 - 71.0 * (2.0 * x - 12.0 * y) + 142.0 * k

    @staticmethod
    def inverse_branch(x, y, k):
        """Preimage of ``(x, y)`` under ``T_k``."""
        root = np.sqrt(NonlinearExample.psi(x, y, k))
        return (-214.0 + root) / 71.0, np.asarray(x, float) / 12.0


def build_nonlinear():
    """The 430-piece quadratic-strip example."""
    L = 1.0
    pieces = tuple(_nonlinear_piece(k, L) for k in range(NONLINEAR_K_MIN, NONLINEAR_K_MAX + 1))
    spec = PiecewiseMapSpec(L=L, alpha=1.0, eps1=1.0, Y=3, pieces=pieces,
                            locator=_nonlinear_locator, name="nonlinear")
    return NonlinearExample(spec)


# ------------------------------------------------------------------- linear

def linear_S():
    """``S = 1 + 48/pi + 288/pi^2 + (4/pi)(1 + 12/pi) sqrt(6 pi + 36)``."""
    pi = math.pi
    return 1.0 + 48.0 / pi + 288.0 / pi ** 2 + (4.0 / pi) * (1.0 + 12.0 / pi) * math.sqrt(6.0 * pi + 36.0)


def admissibility(a, b):
    """Return ``(admissible, S, bound, borderline)`` for ``|a| < (|b| - S)/sqrt(S)``."""
    S = linear_S()
    bound = (abs(b) - S) / math.sqrt(S)
    gap = bound - abs(a)
    borderline = abs(gap) <= GUARD_BAND * max(1.0, abs(bound))
    return (gap > 0 and not borderline), S, bound, borderline


def index_range(a, b):
    """Integers ``n`` with ``(-|a| - |b| + 1)/2 <= n <= (|a| + |b| + 1)/2``."""
    _check_ab(a, b)
    s = abs(a) + abs(b)
    lo = Fraction(1 - s, 2)
    hi = Fraction(s + 1, 2)
    return list(range(math.ceil(lo), math.floor(hi) + 1))


def piece_indices(a, b):
    """Integers ``n`` whose strip meets the open square, ``-(s//2) .. s//2`` with ``s = |a| + |b|``."""
    _check_ab(a, b)
    s = abs(a) + abs(b)
    return list(range(-(s // 2), s // 2 + 1))


def _check_ab(a, b):
    if int(a) != a or int(b) != b or a == 0 or b == 0:
        raise ValueError("a and b must be nonzero integers")


def _linear_piece(n, a, b, L):
    lower = lambda u, v: (2 * n - 1) * L - (a * np.asarray(v) + b * np.asarray(u))
    upper = lambda u, v: (a * np.asarray(v) + b * np.asarray(u)) - (2 * n + 1) * L

    def value(u, v):
        return a * np.asarray(v, float) + b * np.asarray(u, float) - 2.0 * n * L

    def gradient(u, v):
        shape = np.broadcast(np.asarray(u), np.asarray(v)).shape
        return np.full(shape, float(b)), np.full(shape, float(a))

    branch = Branch(value, gradient, declared_A=float(abs(b)), declared_M=float(abs(a)), holder_C=0.0)
    return Piece(n, square_constraints(L) + (lower, upper), branch)


@dataclass(frozen=True)
class LinearExample:
    spec: PiecewiseMapSpec
    a: int
    b: int
    L: float

    name = "linear"

    @property
    def system(self):
        return induce(self.spec)

    @property
    def gamma(self):
        return abs(self.b) ** -0.5

    @property
    def n_min(self):
        return self.spec.pieces[0].index

    def T_n(self, n, x, y):
        """Closed form ``(sqrt|b| y, a y + (b/sqrt|b|) x - 2 n L/sqrt|b|)``."""
        r = math.sqrt(abs(self.b))
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        return r * y, self.a * y + (self.b / r) * x - 2.0 * n * self.L / r

    def inverse_branch(self, n, X, Y):
        """Preimage of ``(X, Y)`` under ``T_n``."""
        r = math.sqrt(abs(self.b))
        X = np.asarray(X, float)
        Y = np.asarray(Y, float)
        y = X / r
        x = (Y - self.a * y + 2.0 * n * self.L / r) * r / self.b
        return x, y


def build_linear(a, b, L=1.0):
    """The linear-strip example.

    Raises
    ------
    NotAdmissible
        If ``|a| >= (|b| - S)/sqrt(S)`` (or within the guard band of it).
    ValueError
        If ``a`` or ``b`` is not a nonzero integer or ``2L`` is not a positive integer.
    """
    _check_ab(a, b)
    a, b = int(a), int(b)
    if not (L > 0 and float(2 * L).is_integer()):
        raise ValueError("L must be a positive integer or half-integer")
    ok, S, bound, borderline = admissibility(a, b)
    if not ok:
        kind = "borderline" if borderline else "fails"
        raise NotAdmissible(f"(a, b) = ({a}, {b}) {kind} |a| < (|b| - S)/sqrt(S) = {bound:.12g}",
                            S=S, bound=bound, borderline=borderline)
    return _linear_unchecked(a, b, L)


def _linear_unchecked(a, b, L):
    L = float(L)
    indices = piece_indices(a, b)
    n_min = indices[0]
    n_max = indices[-1]

    def locator(u, v):
        t = (a * v + b * u) / (2.0 * L) + 0.5
        n = np.floor(t)
        ok = (t != n) & (np.abs(u) < L) & (np.abs(v) < L) & (n >= n_min) & (n <= n_max)
        return np.where(ok, n - n_min, NO_PIECE).astype(np.int64)

    pieces = tuple(_linear_piece(n, a, b, L) for n in indices)
    spec = PiecewiseMapSpec(L=L, alpha=1.0, eps1=L, Y=3, pieces=pieces, locator=locator,
                            name=f"linear(a={a},b={b},L={L:g})")
    return LinearExample(spec, a, b, L)


def linear_constants_report(a, b, L=1.0):
    """Constants of a linear family member without enforcing admissibility."""
    return _linear_unchecked(int(a), int(b), L)


# -------------------------------------------------------------------- facts

@dataclass(frozen=True)
class Fact:
    id: str
    statement: str
    value: object


def ground_truth_facts(example):
    """Machine-checkable statements about a built-in example."""
    from .hypotheses import compute_eta, compute_s

    spec = example.spec
    s = compute_s(spec.A, spec.M)
    eta = compute_eta(s, spec.alpha, spec.Y)
    facts = [
        Fact("A", "minimal declared |d phi/du|", spec.A),
        Fact("M", "maximal declared |d phi/dv|", spec.M),
        Fact("gamma", "flattening factor", 1.0 / math.sqrt(spec.A)),
        Fact("Y", "boundary arcs through one point", spec.Y),
        Fact("eta_lt_1", "eta < 1", eta < 1),
    ]
    if isinstance(example, NonlinearExample):
        facts += [
            Fact("s_le_0.1", "s <= 1/10", s <= 0.1),
            Fact("pieces", "number of nonempty pieces", len(spec.pieces)),
            Fact("P1_increasing_region3",
                 "the closed-form P1 is strictly increasing in z = x - 6y on region 3, z in (1/2, 3/2)",
                 (0.5, 1.5)),
            Fact("uniform_density", "the uniform density is invariant", False),
        ]
    else:
        facts += [
            Fact("active_branches", "active branches at almost every point", abs(example.b)),
            Fact("uniform_density", "the uniform density is invariant", True),
        ]
    return facts
