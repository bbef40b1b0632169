import csv

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy.special import ellipe

from slipflow.geometry import circle, ellipse
from slipflow.grid import (CurvilinearGrid, ScalarField, VectorField, divergence, dump_csv,
                           gradient, hessian, integrate_boundary, integrate_domain, laplacian,
                           normal_derivative, perp_gradient, rot, sym_gradient)

GRID = CurvilinearGrid(ellipse(1.5, 1.0), 3.0, 64, 64)
X, Y = sp.symbols("x y")


def _fn(expr):
    return sp.lambdify((X, Y), expr, "numpy")


def test_area_nodal_and_quadrature():
    exact = np.pi * 9.0 - np.pi * 1.5
    assert integrate_domain(ScalarField(GRID, np.ones(GRID.shape))) == pytest.approx(exact, rel=1e-6)
    q = GRID.quad
    assert q.integrate(np.ones(q.shape)) == pytest.approx(exact, rel=1e-10)


def test_second_moment_by_quadrature():
    # int (x^2 + y^2) = pi/2 (R^4 - a b (a^2 + b^2)/... ) computed per region
    a, b, R = 1.5, 1.0, 3.0
    exact = np.pi * R ** 4 / 2 - np.pi * a * b * (a ** 2 + b ** 2) / 4
    q = GRID.quad
    assert q.integrate(q.jet.x ** 2 + q.jet.y ** 2) == pytest.approx(exact, rel=1e-10)


def test_boundary_length():
    L = 4 * 1.5 * ellipe(1 - (1 / 1.5) ** 2)
    assert integrate_boundary(np.ones(GRID.n_theta), GRID) == pytest.approx(L, rel=1e-10)
    assert integrate_boundary(np.ones(GRID.n_theta), GRID, "outer") == pytest.approx(6 * np.pi, rel=1e-12)


def test_hessian_matches_sympy():
    e = sp.exp(-X ** 2 / 3) * sp.sin(Y)
    hxx, hxy, hyy = hessian(GRID.sample_scalar(_fn(e)))
    for got, expr in [(hxx, sp.diff(e, X, 2)), (hxy, sp.diff(e, X, Y)), (hyy, sp.diff(e, Y, 2))]:
        assert np.max(np.abs(got - _fn(expr)(GRID.x, GRID.y))) < 2e-3


def test_gradient_and_laplacian_fourth_order():
    errs = []
    for n in (64, 128):
        g = CurvilinearGrid(ellipse(1.5, 1.0), 3.0, n, n)
        phi = g.sample_scalar(lambda x, y: x ** 2 * y)
        d = gradient(phi).values
        errs.append([np.abs(d[0] - 2 * g.x * g.y).max(), np.abs(d[1] - g.x ** 2).max(),
                     np.abs(laplacian(phi).values - 2 * g.y).max()])
    ratio = np.array(errs[0]) / np.array(errs[1])
    assert np.all(ratio > 12)  # 16 for a fourth-order scheme


def test_sym_gradient_has_no_half():
    v = GRID.sample_vector(lambda x, y: (y, 0 * x))
    D = sym_gradient(v)
    assert np.allclose(D[0, 1], 1.0, atol=1e-3) and np.allclose(D[0, 0], 0.0, atol=1e-3)


def test_normal_derivative_radial():
    g = CurvilinearGrid(circle(1.0), 3.0, 32, 64)
    dn = normal_derivative(g.sample_scalar(lambda x, y: np.hypot(x, y) ** 2))
    assert np.allclose(dn, 2.0, atol=1e-6)


def test_boundary_frame_conventions():
    tau, n, chi = GRID.boundary_frame("obstacle")
    p = np.stack([GRID.x[:, 0], GRID.y[:, 0]])
    assert np.all(np.sum(p * n, axis=0) > 0) and np.all(chi > 0)
    _, n_out, chi_out = GRID.boundary_frame("outer")
    assert np.allclose(chi_out, 1 / 3.0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_div_perp_gradient_vanishes(c):
    def f(x, y):
        return (c[0] * np.sin(x + c[1] * y) + c[2] * x * y ** 2 + c[3] * np.cos(c[4] * x) * y
                + c[5] * np.exp(-(x * x + y * y) / 4))

    u = perp_gradient(GRID.sample_scalar(f))
    scale = 1 + np.max(np.abs(u.values))
    assert np.max(np.abs(divergence(u).values)) <= 1e-9 * scale


def test_rot_of_rigid_rotation():
    v = GRID.sample_vector(lambda x, y: (-y, x))
    assert np.allclose(rot(v).values, 2.0, atol=1e-3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 63), st.integers(0, 63))
def test_to_computational_roundtrip(i, j):
    th, xi = GRID.to_computational(GRID.x[i, j], GRID.y[i, j])
    assert th == pytest.approx(GRID.theta[i], abs=1e-10)
    assert xi == pytest.approx(GRID.xi[j], abs=1e-9)


def test_outside_points_are_nan():
    _, xi = GRID.to_computational(np.array([0.1, 10.0]), np.array([0.0, 0.0]))
    assert np.all(np.isnan(xi))


def test_nonfinite_fields_rejected():
    with pytest.raises(ValueError):
        ScalarField(GRID, np.full(GRID.shape, np.nan))
    with pytest.raises(ValueError):
        VectorField(GRID, np.stack([GRID.y, GRID.x * 0 + GRID.x ** 2]), div_tolerance=1e-12)


def test_dump_csv_columns(tmp_path):
    g = CurvilinearGrid(circle(1.0), 2.0, 8, 8)
    phi = g.sample_scalar(lambda x, y: x)
    dump_csv(tmp_path / "f.csv", g, {"phi": phi, "v": perp_gradient(phi)})
    rows = list(csv.reader(open(tmp_path / "f.csv")))
    assert rows[0] == ["theta_index", "sigma_index", "x1", "x2", "phi", "v_1", "v_2"]
    assert len(rows) == 1 + 64
    assert float(rows[1][2]) == pytest.approx(float(rows[1][4]))
