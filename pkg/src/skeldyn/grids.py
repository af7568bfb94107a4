"""Cell-constant functions on uniform grids.

A :class:`GridFunction` stores one value per cell of an ``nx`` by ``ny``
grid over a rectangle; ``values[i, j]`` is the value on the cell whose
x-index is ``i`` and y-index is ``j``. Flattened cell indices use the same
C order, ``i * ny + j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateGrid


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise DegenerateGrid(f"empty rectangle {self}")

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def area(self):
        return self.width * self.height

    def contains(self, x, y, closed=True):
        x = np.asarray(x)
        y = np.asarray(y)
        if closed:
            return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)
        return (x > self.x0) & (x < self.x1) & (y > self.y0) & (y < self.y1)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Piecewise-constant function on a uniform grid over ``rect``."""

    rect: Rect
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or min(values.shape) < 1:
            raise DegenerateGrid("grid values must be a non-empty 2-D array")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, func, rect, nx, ny):
        """Sample ``func(x, y)`` at cell centres."""
        g = cls(rect, np.zeros((nx, ny)))
        X, Y = g.centers()
        return cls(rect, np.broadcast_to(func(X, Y), (nx, ny)).astype(float))

    @property
    def nx(self):
        return self.values.shape[0]

    @property
    def ny(self):
        return self.values.shape[1]

    @property
    def hx(self):
        return self.rect.width / self.nx

    @property
    def hy(self):
        return self.rect.height / self.ny

    @property
    def cell_area(self):
        return self.hx * self.hy

    @property
    def cell_diameter(self):
        return float(np.hypot(self.hx, self.hy))

    def x_centers(self):
        return self.rect.x0 + (np.arange(self.nx) + 0.5) * self.hx

    def y_centers(self):
        return self.rect.y0 + (np.arange(self.ny) + 0.5) * self.hy

    def centers(self):
        return np.meshgrid(self.x_centers(), self.y_centers(), indexing="ij")

    def cell_index(self, x, y):
        """Return integer cell indices ``(i, j)``; points on the far edge go to the last cell."""
        i = np.floor((np.asarray(x, dtype=float) - self.rect.x0) / self.hx).astype(int)
        j = np.floor((np.asarray(y, dtype=float) - self.rect.y0) / self.hy).astype(int)
        return np.clip(i, 0, self.nx - 1), np.clip(j, 0, self.ny - 1)

    def __call__(self, x, y):
        """Evaluate at points; zero outside the rectangle."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        i, j = self.cell_index(x, y)
        return np.where(self.rect.contains(x, y), self.values[i, j], 0.0)

    def integral(self):
        return float(self.values.sum() * self.cell_area)

    def l1_norm(self):
        return float(np.abs(self.values).sum() * self.cell_area)

    def sup_norm(self):
        return float(np.abs(self.values).max())

    def with_values(self, values):
        return GridFunction(self.rect, values)

    def restrict(self, rect):
        """Sub-grid covering ``rect``; ``rect`` must be aligned with cell edges."""
        i0 = _aligned(rect.x0 - self.rect.x0, self.hx)
        i1 = _aligned(rect.x1 - self.rect.x0, self.hx)
        j0 = _aligned(rect.y0 - self.rect.y0, self.hy)
        j1 = _aligned(rect.y1 - self.rect.y0, self.hy)
        return GridFunction(rect, self.values[i0:i1, j0:j1])

    def extend(self, rect):
        """Zero extension to a larger cell-aligned rectangle."""
        nx = _aligned(rect.width, self.hx)
        ny = _aligned(rect.height, self.hy)
        i0 = _aligned(self.rect.x0 - rect.x0, self.hx)
        j0 = _aligned(self.rect.y0 - rect.y0, self.hy)
        out = np.zeros((nx, ny))
        out[i0:i0 + self.nx, j0:j0 + self.ny] = self.values
        return GridFunction(rect, out)


@dataclass(frozen=True, eq=False)
class GridFunction1D:
    """Piecewise-constant function on a uniform grid over ``[a, b]``."""

    a: float
    b: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise DegenerateGrid("1-D grid values must be a non-empty vector")
        if not self.b > self.a:
            raise DegenerateGrid("empty interval")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, func, a, b, n):
        h = (b - a) / n
        x = a + (np.arange(n) + 0.5) * h
        return cls(a, b, np.broadcast_to(func(x), (n,)).astype(float))

    @property
    def n(self):
        return self.values.size

    @property
    def h(self):
        return (self.b - self.a) / self.n

    def centers(self):
        return self.a + (np.arange(self.n) + 0.5) * self.h

    def edges(self):
        return self.a + np.arange(self.n + 1) * self.h

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        i = np.clip(np.floor((x - self.a) / self.h).astype(int), 0, self.n - 1)
        return np.where((x >= self.a) & (x <= self.b), self.values[i], 0.0)

    def integral(self):
        return float(self.values.sum() * self.h)

    def l1_norm(self):
        return float(np.abs(self.values).sum() * self.h)

    def sup_norm(self):
        return float(np.abs(self.values).max())


def l1_distance_1d(f, g):
    """Exact L1 distance between two piecewise-constant functions on the same interval."""
    if not (np.isclose(f.a, g.a) and np.isclose(f.b, g.b)):
        raise ValueError("functions live on different intervals")
    edges = np.union1d(f.edges(), g.edges())
    mids = 0.5 * (edges[1:] + edges[:-1])
    return float(np.sum(np.abs(f(mids) - g(mids)) * np.diff(edges)))


def _aligned(length, h):
    k = length / h
    r = int(round(k))
    if abs(k - r) > 1e-6:
        raise ValueError("rectangle is not aligned with the grid cells")
    return r
