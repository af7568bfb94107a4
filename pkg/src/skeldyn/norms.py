"""Oscillation seminorms and norms on cell-constant grid functions.

Conventions
-----------
* A cell meets the ball ``B_eps(p)`` when its centre lies within
  ``eps + half cell diagonal`` of ``p`` (conservative); the essential sup and
  inf of a cell-constant function are the max and min over those cells.
* Integrals over the plane are cell sums: the integrand is evaluated once
  per cell, at the cell centre.
* The sup over ``0 < eps < eps_max`` is taken over a geometric grid of
  ``eps_samples`` values starting at the resolution floor
  ``2 * max(hx, hy)``, so the result is a lower estimate of the continuum
  sup at grid scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .exceptions import EmptyRegion, InvalidBounds
from .grids import GridFunction, GridFunction1D, Rect


@dataclass(frozen=True)
class NormParams:
    """Parameters of the oscillation norms.

    ``eps0`` must satisfy ``eps0 < gamma * eps1`` for the flattening ``gamma``
    of the system at hand; call :meth:`validate` with it.
    """

    alpha: float
    eps0: float
    eps1: float
    eps_samples: int = 16

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise InvalidBounds("alpha must lie in (0, 1]")
        if not (self.eps0 > 0 and self.eps1 > 0):
            raise InvalidBounds("eps0 and eps1 must be positive")
        if self.eps_samples < 1:
            raise InvalidBounds("eps_samples must be positive")

    def validate(self, gamma):
        if not self.eps0 < gamma * self.eps1:
            raise InvalidBounds(f"eps0={self.eps0} must be below gamma*eps1={gamma * self.eps1}")
        return self


@dataclass(frozen=True)
class Ball:
    cx: float
    cy: float
    r: float


@dataclass(frozen=True)
class Box:
    x0: float
    x1: float
    y0: float
    y1: float


def eps_grid(h, eps_max, count):
    """Geometric grid of ``count`` radii from ``min(eps_max, 2h)`` to ``eps_max``."""
    lo = min(eps_max, 2.0 * h)
    if count == 1 or lo == eps_max:
        return np.array([eps_max])
    return np.geomspace(lo, eps_max, count)


def osc(f, region, clip=None):
    """Oscillation of ``f`` over the cells meeting ``region``.

    Parameters
    ----------
    f : GridFunction
    region : Ball or Box
    clip : Rect, optional
        Intersect the region with this rectangle first. Cells outside
        ``f.rect`` count as zero unless ``clip`` excludes them.

    Raises
    ------
    EmptyRegion
        If the region meets no cell.
    """
    X, Y = f.centers()
    hd = 0.5 * f.cell_diameter
    if isinstance(region, Ball):
        if region.r <= 0:
            raise EmptyRegion("ball of nonpositive radius")
        sel = np.hypot(X - region.cx, Y - region.cy) <= region.r + hd
        outside_meets = _ball_leaves_rect(region, f.rect, clip)
    else:
        sel = ((X + 0.5 * f.hx > region.x0) & (X - 0.5 * f.hx < region.x1)
               & (Y + 0.5 * f.hy > region.y0) & (Y - 0.5 * f.hy < region.y1))
        outside_meets = _box_leaves_rect(region, f.rect, clip)
    if clip is not None:
        sel &= clip.contains(X, Y)
    if not np.any(sel):
        if outside_meets:
            return 0.0
        raise EmptyRegion("region meets no grid cell")
    vals = f.values[sel]
    hi, lo = vals.max(), vals.min()
    if outside_meets:
        hi, lo = max(hi, 0.0), min(lo, 0.0)
    return float(hi - lo)


def _ball_leaves_rect(b, rect, clip):
    if clip is not None:
        return False
    return (b.cx - b.r < rect.x0 or b.cx + b.r > rect.x1
            or b.cy - b.r < rect.y0 or b.cy + b.r > rect.y1)


def _box_leaves_rect(b, rect, clip):
    if clip is not None:
        return False
    return b.x0 < rect.x0 or b.x1 > rect.x1 or b.y0 < rect.y0 or b.y1 > rect.y1


def _disc_extrema(values, hx, hy, radius, pad_value):
    """Max and min of ``values`` over the disc footprint at every cell.

    The footprint holds the offsets ``(di, dj)`` with
    ``hypot(di hx, dj hy) <= radius``. Out-of-array cells take ``pad_value``
    (a pair ``(for max, for min)``).
    """
    nx, ny = values.shape
    J = int(math.floor(radius / hy + 1e-12))
    pmax, pmin = pad_value
    vmax = np.full((nx, ny + 2 * J), pmax)
    vmin = np.full((nx, ny + 2 * J), pmin)
    vmax[:, J:J + ny] = values
    vmin[:, J:J + ny] = values
    out_max = np.full((nx, ny), -np.inf)
    out_min = np.full((nx, ny), np.inf)
    for dj in range(-J, J + 1):
        rem = radius * radius - (dj * hy) ** 2
        w = int(math.floor(math.sqrt(max(rem, 0.0)) / hx + 1e-12))
        sl = slice(J + dj, J + dj + ny)
        cmax = maximum_filter1d(vmax[:, sl], 2 * w + 1, axis=0, mode="constant", cval=pmax)
        cmin = minimum_filter1d(vmin[:, sl], 2 * w + 1, axis=0, mode="constant", cval=pmin)
        np.maximum(out_max, cmax, out=out_max)
        np.minimum(out_min, cmin, out=out_min)
    return out_max, out_min


def osc_integral_plane(f, eps):
    """``sum over cells of Osc(f, B_eps(centre)) * cell area`` over the whole plane.

    ``f`` is extended by zero; the plane integral runs over the grid padded
    by ``eps + half diagonal`` so every ball meeting the support counts.
    """
    R = eps + 0.5 * f.cell_diameter
    px = int(math.ceil(R / f.hx))
    py = int(math.ceil(R / f.hy))
    padded = np.zeros((f.nx + 2 * px, f.ny + 2 * py))
    padded[px:px + f.nx, py:py + f.ny] = f.values
    hi, lo = _disc_extrema(padded, f.hx, f.hy, R, (0.0, 0.0))
    return float(np.sum(hi - lo) * f.cell_area)


def osc_integral_clipped(g, eps):
    """``sum over cells of Osc(g, B_eps(centre) cap rect) * cell area``."""
    R = eps + 0.5 * g.cell_diameter
    hi, lo = _disc_extrema(g.values, g.hx, g.hy, R, (-np.inf, np.inf))
    return float(np.sum(hi - lo) * g.cell_area)


def _sup_scan(func, f, eps_max, alpha, count):
    h = max(f.hx, f.hy)
    eps = eps_grid(h, eps_max, count)
    vals = np.array([e ** -alpha * func(f, e) for e in eps])
    return float(vals.max())


def seminorm_alpha(f, p):
    """``|f|_alpha``: sup over ``eps < eps1`` of ``eps^-alpha * int Osc(f, B_eps)``."""
    return _sup_scan(osc_integral_plane, f, p.eps1, p.alpha, p.eps_samples)


def norm_alpha(f, p):
    """``||f||_alpha = ||f||_L1 + |f|_alpha``."""
    return f.l1_norm() + seminorm_alpha(f, p)


def omega_seminorm(g, p):
    """``N(g, alpha, L)``: sup over ``eps < eps0`` with balls intersected with the rectangle."""
    return _sup_scan(osc_integral_clipped, g, p.eps0, p.alpha, p.eps_samples)


def norm_alpha_L(g, p, L, gamma, sup_norm=None, l1_norm=None):
    """``||g||_{alpha,L} = N + 16 (1 + gamma) eps0^(1-alpha) L ||g||_inf + ||g||_L1``."""
    sup = g.sup_norm() if sup_norm is None else sup_norm
    l1 = g.l1_norm() if l1_norm is None else l1_norm
    return omega_seminorm(g, p) + 16.0 * (1.0 + gamma) * p.eps0 ** (1.0 - p.alpha) * L * sup + l1


def tr_lift(H, L, gamma, ny):
    """``Tr H(x, y) = H(x)`` on ``[-L, L] x [-gamma L, gamma L]`` with ``ny`` rows."""
    rect = Rect(-L, L, -gamma * L, gamma * L)
    return GridFunction(rect, np.repeat(np.asarray(H.values)[:, None], ny, axis=1))


def osc_integral_1d(H, eps):
    """``sum over cells of Osc(H, ]x - eps, x + eps[ cap [a, b]) * h``."""
    w = int(math.floor((eps + 0.5 * H.h) / H.h + 1e-12))
    v = np.asarray(H.values)
    hi = maximum_filter1d(v, 2 * w + 1, mode="nearest")
    lo = minimum_filter1d(v, 2 * w + 1, mode="nearest")
    return float(np.sum(hi - lo) * H.h)


def tr_norm(H, p, L, gamma, h_floor=None):
    """``||Tr H||_{alpha, Omega}`` from the one-dimensional formula.

    ``2 gamma L sup eps^-alpha int Osc(H) + 16 (1 + gamma) L eps0^(1-alpha) ||H||_inf
    + 2 gamma L ||H||_L1``, the sup over the same eps grid as the 2-D norms
    (floor ``2h`` with ``h`` the 1-D cell width unless ``h_floor`` is given).
    """
    return _tr_terms(H, p, L, gamma, h_floor)[0]


def tr_osc_sup(H, p, h_floor=None):
    h = H.h if h_floor is None else h_floor
    eps = eps_grid(h, p.eps0, p.eps_samples)
    return float(max(e ** -p.alpha * osc_integral_1d(H, e) for e in eps))


def _tr_terms(H, p, L, gamma, h_floor=None):
    sup_term = tr_osc_sup(H, p, h_floor)
    t1 = 2.0 * gamma * L * sup_term
    t2 = 16.0 * (1.0 + gamma) * L * p.eps0 ** (1.0 - p.alpha) * H.sup_norm()
    t3 = 2.0 * gamma * L * H.l1_norm()
    return t1 + t2 + t3, (t1, t2, t3)


def restriction_factor(p, L, gamma):
    """``1 + 16 (1 + gamma) L max(1, eps0^alpha) / (pi eps0^(1+alpha))``."""
    e = p.eps0
    return 1.0 + 16.0 * (1.0 + gamma) * L * max(1.0, e ** p.alpha) / (math.pi * e ** (1.0 + p.alpha))


def as_grid_1d(H, L, n):
    """Accept a :class:`GridFunction1D` or a callable sampled at ``n`` cell centres."""
    if isinstance(H, GridFunction1D):
        return H
    return GridFunction1D.from_function(H, -L, L, n)
