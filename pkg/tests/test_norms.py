import math

import numpy as np
import pytest

from skeldyn.exceptions import EmptyRegion, InvalidBounds
from skeldyn.grids import GridFunction, GridFunction1D, Rect
from skeldyn.norms import (Ball, Box, NormParams, eps_grid, norm_alpha, norm_alpha_L, omega_seminorm,
                           osc, osc_integral_1d, osc_integral_plane, restriction_factor, seminorm_alpha,
                           tr_lift, tr_norm)

G = 101 ** -0.5
OMEGA = Rect(-1, 1, -G, G)
P = NormParams(1.0, 0.09, 1.0)


def grid(func, nx=64, ny=16, rect=OMEGA):
    return GridFunction.from_function(func, rect, nx, ny)


def test_osc_examples():
    one = grid(lambda x, y: np.ones_like(x))
    assert osc(one, Ball(0.0, 0.0, 0.05), clip=OMEGA) == 0.0
    half = grid(lambda x, y: (x > 0).astype(float))
    assert osc(half, Ball(0.0, 0.0, 0.05)) == 1.0
    assert osc(half, Ball(0.5, 0.0, 0.05), clip=OMEGA) == 0.0
    assert osc(half, Box(0.5, 0.6, -0.01, 0.01)) == 0.0
    assert osc(half, Box(-0.1, 0.1, -0.01, 0.01)) == 1.0


def test_osc_plane_semantics_and_empty_region():
    one = grid(lambda x, y: np.ones_like(x))
    # a ball poking out of the support sees the zero extension
    assert osc(one, Ball(0.99, 0.0, 0.05)) == 1.0
    assert osc(one, Ball(5.0, 5.0, 0.1)) == 0.0
    with pytest.raises(EmptyRegion):
        osc(one, Ball(5.0, 5.0, 0.1), clip=OMEGA)


def test_osc_monotone_in_region(rng):
    f = GridFunction(OMEGA, rng.normal(size=(64, 16)))
    for _ in range(20):
        cx, cy = rng.uniform(-1, 1), rng.uniform(-G, G)
        r1 = rng.uniform(0.01, 0.2)
        r2 = r1 + rng.uniform(0, 0.2)
        assert osc(f, Ball(cx, cy, r1), OMEGA) <= osc(f, Ball(cx, cy, r2), OMEGA)


def test_norm_params_validation():
    with pytest.raises(InvalidBounds):
        NormParams(0.0, 0.05, 1.0)
    with pytest.raises(InvalidBounds):
        NormParams(1.0, 0.2, 1.0).validate(G)
    assert NormParams(1.0, 0.05, 1.0).validate(G).eps0 == 0.05


def test_eps_grid():
    e = eps_grid(0.01, 0.09, 16)
    assert e[0] == pytest.approx(0.02) and e[-1] == pytest.approx(0.09)
    assert np.all(np.diff(e) > 0)
    assert eps_grid(0.1, 0.09, 16).tolist() == [0.09]


def test_seminorm_zero_and_homogeneity(rng):
    zero = grid(lambda x, y: np.zeros_like(x))
    assert seminorm_alpha(zero, P) == 0.0
    assert norm_alpha_L(zero, P, 1.0, G) == 0.0
    f = GridFunction(OMEGA, rng.normal(size=(64, 16)))
    for c in (-2.5, 0.3, 7.0):
        cf = f.with_values(c * f.values)
        assert seminorm_alpha(cf, P) == pytest.approx(abs(c) * seminorm_alpha(f, P), rel=1e-12)
        assert omega_seminorm(cf, P) == pytest.approx(abs(c) * omega_seminorm(f, P), rel=1e-12)


def brute_osc_integral(f, eps):
    """Direct cell-by-cell evaluation of the plane oscillation integral (same cell rule)."""
    R = eps + 0.5 * f.cell_diameter
    px, py = math.ceil(R / f.hx), math.ceil(R / f.hy)
    xs = f.rect.x0 + (np.arange(-px, f.nx + px) + 0.5) * f.hx
    ys = f.rect.y0 + (np.arange(-py, f.ny + py) + 0.5) * f.hy
    vals = np.zeros((len(xs), len(ys)))
    vals[px:px + f.nx, py:py + f.ny] = f.values
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    total = 0.0
    for a in range(len(xs)):
        for b in range(len(ys)):
            sel = (X - xs[a]) ** 2 + (Y - ys[b]) ** 2 <= R * R * (1 + 1e-12)
            v = vals[sel]
            total += v.max() - v.min()
    return total * f.cell_area


def test_disc_indicator_against_brute_force():
    r = 0.5
    box = Rect(-1, 1, -1, 1)
    f = GridFunction.from_function(lambda x, y: (x * x + y * y < r * r).astype(float), box, 40, 40)
    fine = GridFunction.from_function(lambda x, y: (x * x + y * y < r * r).astype(float), box, 320, 320)
    for eps in np.geomspace(0.1, 0.4, 5):
        fast = osc_integral_plane(f, eps)
        assert fast == pytest.approx(brute_osc_integral(f, eps), rel=1e-12)
        exact = 4 * math.pi * r * eps  # area of the annulus r - eps < |p| < r + eps
        # the conservative cell rule widens the annulus by about a cell diameter
        slack = (f.cell_diameter + f.hx) / eps
        assert exact <= fast <= exact * (1 + slack)
        fine_val = osc_integral_plane(fine, eps)
        assert abs(fine_val - exact) < abs(fast - exact)


def test_norm_alpha_L_of_one():
    one = grid(lambda x, y: np.ones_like(x))
    assert norm_alpha_L(one, P, 1.0, G) == pytest.approx(16 * (1 + G) + 4 * G, rel=1e-14)
    assert 16 * (1 + G) + 4 * G == pytest.approx(17.990074380419978, rel=1e-15)


def test_tr_lift():
    H = GridFunction1D.from_function(lambda x: np.ones_like(x), -1, 1, 32)
    assert np.all(tr_lift(H, 1.0, G, 8).values == 1.0)
    H = GridFunction1D.from_function(lambda x: (x > 0).astype(float), -1, 1, 32)
    lifted = tr_lift(H, 1.0, G, 8)
    assert lifted.rect == OMEGA
    assert np.all(lifted.values[:16] == 0) and np.all(lifted.values[16:] == 1)


def test_tr_lift_oscillation_equals_shadow(rng):
    H = GridFunction1D(-1, 1, rng.normal(size=64))
    lifted = tr_lift(H, 1.0, G, 16)
    for _ in range(50):
        cx = rng.uniform(-1, 1)
        cy = rng.uniform(-G, G)
        r = rng.uniform(0.02, 0.3)
        R = r + 0.5 * lifted.cell_diameter
        xc = H.centers()
        # a ball centred in the rectangle always contains its own centre row
        shadow = H.values[np.abs(xc - cx) <= R]
        assert osc(lifted, Ball(cx, cy, r), OMEGA) == shadow.max() - shadow.min()


def test_tr_norm_values():
    zero = GridFunction1D(-1, 1, np.zeros(64))
    assert tr_norm(zero, P, 1.0, G) == 0.0
    one = GridFunction1D(-1, 1, np.ones(64))
    assert tr_norm(one, P, 1.0, G) == pytest.approx(16 * (1 + G) + 2 * G * 2, rel=1e-14)


@pytest.mark.parametrize("func", [lambda x: x, lambda x: np.sin(7 * x) + (x > 0.3), lambda x: x ** 2])
def test_tr_norm_cross_validates(func):
    H = GridFunction1D.from_function(func, -1, 1, 128)
    a = tr_norm(H, P, 1.0, G)
    b = norm_alpha_L(tr_lift(H, 1.0, G, 16), P, 1.0, G)
    assert abs(a - b) <= 0.02 * b


def test_osc_integral_1d_step():
    H = GridFunction1D.from_function(lambda x: (x > 0).astype(float), -1, 1, 100)
    # one jump: cells within eps + h/2 of it on either side
    eps = 0.1
    w = math.floor((eps + 0.01) / 0.02 + 1e-12)
    assert osc_integral_1d(H, eps) == pytest.approx(2 * w * 0.02)


def smooth_random(rng, nx=64, ny=16, rect=OMEGA):
    X, Y = GridFunction(rect, np.zeros((nx, ny))).centers()
    v = np.zeros_like(X)
    for _ in range(4):
        v += rng.normal() * np.sin(rng.uniform(0, 8) * X + rng.uniform(0, 6)) * np.cos(rng.uniform(0, 40) * Y)
    return GridFunction(rect, v + 0.05 * rng.normal(size=v.shape))


def test_restricted_norm_dominates_plane_norm(rng):
    for _ in range(3):
        g = smooth_random(rng)
        assert norm_alpha(g, P) <= norm_alpha_L(g, P, 1.0, G)


def test_restriction_bounded_by_plane_norm(rng):
    # a box around Omega, cell-aligned with the 64 x 16 grid of Omega
    hx, hy = 2 / 64, 2 * G / 16
    nx, ny = 64 + 32, 16 + 40
    big = Rect(-1 - 16 * hx, 1 + 16 * hx, -G - 20 * hy, G + 20 * hy)
    for _ in range(2):
        f = smooth_random(rng, nx, ny, big)
        g = f.restrict(OMEGA)
        assert norm_alpha_L(g, P, 1.0, G) <= restriction_factor(P, 1.0, G) * norm_alpha(f, P)


def test_restriction_factor_formula():
    e = 0.09
    expect = 1 + 16 * (1 + G) * max(1, e) / (math.pi * e ** 2)
    assert restriction_factor(P, 1.0, G) == pytest.approx(expect, rel=1e-15)
