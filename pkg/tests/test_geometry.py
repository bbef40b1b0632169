import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy.special import ellipe

from slipflow.geometry import (GeometryError, RadiusFunction, arc_length_parameterize, circle,
                               ellipse, radius_from_config, tubular_map)

ELL = arc_length_parameterize(ellipse(2.0, 1.0))
TM = tubular_map(ELL)


def test_ellipse_perimeter_matches_elliptic_integral():
    a, b = 2.0, 1.0
    exact = 4 * a * ellipe(1 - (b / a) ** 2)
    assert ELL.length == pytest.approx(exact, rel=1e-10)


def test_circle_length_and_curvature():
    c = arc_length_parameterize(circle(1.5))
    assert c.length == pytest.approx(3 * np.pi, rel=1e-12)
    assert np.allclose(c.curvature_at_theta(np.linspace(0, 6, 7)), 1 / 1.5)


def test_ellipse_vertex_curvature():
    # kappa = a/b^2 at (a, 0) and b/a^2 at (0, b)
    assert ELL.curvature_at_theta(0.0) == pytest.approx(2.0, rel=1e-10)
    assert ELL.curvature_at_theta(np.pi / 2) == pytest.approx(0.25, rel=1e-10)


def test_fourier_radius_derivatives_match_sympy():
    t = sp.symbols("t")
    expr = 1 + sp.Rational(1, 5) * sp.cos(2 * t) - sp.Rational(1, 10) * sp.sin(3 * t)
    rho = RadiusFunction.from_fourier([1.0, 0.0, 0.2], [0.0, 0.0, 0.0, -0.1])
    th = np.linspace(0, 2 * np.pi, 17)
    for k in range(4):
        exact = sp.lambdify(t, sp.diff(expr, t, k), "numpy")(th) * np.ones_like(th)
        assert np.allclose(rho(th, k), exact, atol=1e-12)


def test_unit_speed_and_closure():
    assert ELL.unit_speed_error() < 1e-6
    assert ELL.closure_error() < 1e-10


def test_normal_points_away_from_origin():
    th = np.linspace(0, 2 * np.pi, 50, endpoint=False)
    p, n = ELL.point_at_theta(th), ELL.normal_at_theta(th)
    assert np.all(np.sum(p * n, axis=0) > 0)
    tau = ELL.tangent_at_theta(th)
    # counter-clockwise: tau x n has negative z (n = rotate tau clockwise)
    assert np.allclose(tau[0] * n[1] - tau[1] * n[0], -1.0)


def test_invalid_shapes_rejected():
    with pytest.raises(GeometryError):
        circle(-1.0)
    with pytest.raises(GeometryError):
        RadiusFunction(lambda t: np.cos(t))
    with pytest.raises(GeometryError):
        radius_from_config({"type": "hexagon"})


def test_radius_from_config():
    assert radius_from_config({"type": "ellipse", "a": 2, "b": 1})(0.0) == pytest.approx(2.0)
    assert radius_from_config({"type": "circle", "r": 0.5}).max_radius() == pytest.approx(0.5)


def test_zeta_below_curvature_radius():
    assert 0 < TM.zeta < 1 / 2.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.floats(0.02, 0.95))
def test_tubular_map_roundtrip(s, frac):
    t1, t2 = s * ELL.length, frac * TM.zeta
    x, y = TM(t1, t2)
    u1, u2, inside = TM.inverse(np.atleast_1d(x), np.atleast_1d(y))
    assert inside.all()
    assert np.isclose(np.mod(u1[0] - t1 + ELL.length / 2, ELL.length), ELL.length / 2, atol=1e-8)
    assert u2[0] == pytest.approx(t2, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(0.01, 0.3))
def test_distance_along_normal(theta, d):
    p = ELL.point_at_theta(theta) + d * ELL.normal_at_theta(theta)
    assert ELL.distance(p[0], p[1]) == pytest.approx(d, abs=1e-9)
