import os

import numpy as np
import pytest

from nsf2d.errors import ShapeError
from nsf2d.grid import (
    BoundaryField,
    Grid,
    VectorField,
    boundary_integrate,
    div,
    dot_cells,
    field_to_csv,
    grad,
    integrate,
    laplace,
    read_field_blocks,
    stress,
    sym_grad,
    write_field_blocks,
)


@pytest.fixture
def g():
    return Grid(1.3, 0.9, 26, 18)


def random_compatible_velocity(g, seed=0):
    rng = np.random.default_rng(seed)
    v = VectorField.zeros(g)
    v.u[1:-1, :] = rng.standard_normal((g.nx - 1, g.ny))
    v.v[:, 1:-1] = rng.standard_normal((g.nx, g.ny - 1))
    return v


def test_spacings_exact(g):
    assert g.hx == g.Lx / g.nx
    assert g.hy == g.Ly / g.ny


def test_quadrature_weights_sum(g):
    ones = np.ones((g.nx, g.ny))
    assert integrate(g, ones) == pytest.approx(g.Lx * g.Ly, abs=1e-13)
    tr = BoundaryField.constant(g, 1.0)
    assert boundary_integrate(g, tr) == pytest.approx(2 * (g.Lx + g.Ly), abs=1e-13)


def test_boundary_frames(g):
    for wall, x, y, n, tau, w in g.boundary_faces():
        assert np.hypot(*n) == pytest.approx(1.0)
        assert n[0] * tau[0] + n[1] * tau[1] == 0.0
        assert w > 0


def test_grad_of_constant_zero(g):
    gf = grad(g, np.full((g.nx, g.ny), 3.7))
    assert np.all(gf.u == 0.0) and np.all(gf.v == 0.0)


def test_linear_field_exact(g):
    # v = (x, -y): div = 0 and D = diag(1, -1) exactly for centered stencils
    XU, YU = g.uface_coords()
    XV, YV = g.vface_coords()
    v = VectorField(XU.copy(), -YV.copy())
    d = div(g, v)
    assert np.max(np.abs(d)) < 1e-12
    D = sym_grad(g, v)
    assert np.max(np.abs(D.t11 - 1.0)) < 1e-12
    assert np.max(np.abs(D.t22 + 1.0)) < 1e-12
    assert np.max(np.abs(D.t12)) < 1e-12
    S = stress(g, v, mu=2.0, lam=0.5)
    assert np.max(np.abs(S.t11 - 4.0)) < 1e-12
    assert np.max(np.abs(S.t22 + 4.0)) < 1e-12


def test_laplace_second_order_interior():
    # normal flux is nonzero in x, so measure convergence away from walls
    errs = []
    for n in (16, 32, 64):
        g = Grid(1.3, 0.9, n, int(n * 0.75))
        X, Y = g.cell_centers()
        s = np.sin(np.pi * X / g.Lx) * np.cos(np.pi * Y / g.Ly)
        exact = -np.pi ** 2 * (1.0 / g.Lx ** 2 + 1.0 / g.Ly ** 2) * s
        err = np.abs(laplace(g, s) - exact)[2:-2, 2:-2]
        errs.append(np.max(err))
    rate = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
    assert min(rate) > 1.8


def test_integrate_bilinear_exact():
    g = Grid(1.0, 1.0, 20, 20)
    X, Y = g.cell_centers()
    assert integrate(g, X * Y) == pytest.approx(0.25, abs=1e-14)


def test_integrate_second_order():
    errs = []
    for n in (16, 32, 64):
        g = Grid(1.0, 1.0, n, n)
        X, Y = g.cell_centers()
        errs.append(abs(integrate(g, X ** 2 * Y ** 2) - 1.0 / 9.0))
    assert np.log2(errs[0] / errs[1]) > 1.9
    assert np.log2(errs[1] / errs[2]) > 1.9


def test_divergence_theorem_exact(g):
    v = random_compatible_velocity(g, 1)
    assert abs(integrate(g, div(g, v))) < 1e-13


def test_adjointness(g):
    rng = np.random.default_rng(2)
    s = rng.standard_normal((g.nx, g.ny))
    v = random_compatible_velocity(g, 3)
    gs = grad(g, s)
    lhs = float(np.sum(gs.u * v.u) + np.sum(gs.v * v.v)) * g.hx * g.hy
    rhs = -dot_cells(g, s, div(g, v))
    assert abs(lhs - rhs) < 1e-12 * (abs(lhs) + abs(rhs) + 1.0)


def test_operators_linear(g):
    rng = np.random.default_rng(4)
    a = rng.standard_normal((g.nx, g.ny))
    b = rng.standard_normal((g.nx, g.ny))
    al, be = 1.7, -0.4
    combo = laplace(g, al * a + be * b)
    parts = al * laplace(g, a) + be * laplace(g, b)
    assert np.max(np.abs(combo - parts)) < 1e-11


def test_shape_mismatch_raises(g):
    with pytest.raises(ShapeError):
        grad(g, np.zeros((g.nx + 1, g.ny)))
    with pytest.raises(ShapeError):
        div(g, VectorField(np.zeros((g.nx, g.ny)), np.zeros((g.nx, g.ny + 1))))


def test_csv_format(tmp_path, g):
    rng = np.random.default_rng(5)
    arr = rng.standard_normal((g.nx, g.ny))
    path = tmp_path / "field.csv"
    field_to_csv(g, arr, path, "cells")
    lines = path.read_text().splitlines()
    assert lines[0] == "i,j,x,y,value"
    assert len(lines) == 1 + g.nx * g.ny
    i, j, x, y, val = lines[1].split(",")
    assert (int(i), int(j)) == (0, 0)
    assert float(x) == pytest.approx(g.hx / 2)
    assert float(val) == arr[0, 0]


def test_restart_roundtrip_bit_exact(tmp_path, g):
    rng = np.random.default_rng(6)
    fields = {
        "rho": ("cells", rng.standard_normal((g.nx, g.ny)) * 1e-7),
        "u": ("ufaces", rng.standard_normal((g.nx + 1, g.ny)) * 1e12),
    }
    path = tmp_path / "restart.state"
    write_field_blocks(path, g, fields)
    g2, back = read_field_blocks(path)
    assert (g2.Lx, g2.Ly, g2.nx, g2.ny) == (g.Lx, g.Ly, g.nx, g.ny)
    for name, (loc, arr) in fields.items():
        loc2, arr2 = back[name]
        assert loc2 == loc
        assert np.array_equal(arr, arr2)  # bit-exact round trip
