import json

import numpy as np
import pytest
import sympy as sp

from slipflow import diagnostics as dg
from slipflow import galerkin as gk
from slipflow.geometry import circle, ellipse
from slipflow.grid import CurvilinearGrid, perp_gradient, rot

CAL = dg.default_calibration()


def test_calibration_constants():
    assert CAL.c_D == pytest.approx(0.5, abs=1e-10)
    assert CAL.kappa == pytest.approx(-2.0, abs=1e-10)
    other = dg.calibrate(0.5, 2.0)
    assert (other.c_D, other.kappa) == pytest.approx((0.5, -2.0), abs=1e-9)


def test_radial_identity_symbolically():
    # v = g(r) e_theta: int alpha^2 - c_D int |D|^2 equals the calibrated boundary term for any g
    r, ri, ro = sp.symbols("r r_i r_o", positive=True)
    g = sp.Function("g")
    gp = sp.diff(g(r), r)
    alpha2 = (gp + g(r) / r) ** 2
    d2 = 2 * (gp - g(r) / r) ** 2
    integrand = sp.expand((alpha2 - sp.Rational(1, 2) * d2) * 2 * sp.pi * r)
    lhs = sp.integrate(integrand, (r, ri, ro))
    bnd = -2 * (g(ri) ** 2 * 2 * sp.pi - g(ro) ** 2 * 2 * sp.pi)
    assert sp.simplify(lhs.doit() - bnd) == 0


def test_korn_integrand_algebra():
    x, y = sp.symbols("x y")
    w = sp.Function("w")(x, y)
    u = (-sp.diff(w, y), sp.diff(w, x))
    grad = [[sp.diff(u[i], v) for v in (x, y)] for i in range(2)]
    D2 = sum((grad[i][j] + grad[j][i]) ** 2 for i in range(2) for j in range(2))
    hess2 = sum(sp.diff(w, a, b) ** 2 for a in (x, y) for b in (x, y))
    lap = sp.diff(w, x, 2) + sp.diff(w, y, 2)
    assert sp.simplify(D2 - (4 * hess2 - 2 * lap ** 2)) == 0
    G2 = sum(grad[i][j] ** 2 for i in range(2) for j in range(2))
    assert sp.simplify(G2 - hess2) == 0


def _swirl_fields(n):
    g = CurvilinearGrid(circle(1.0), 3.0, n, n)

    def v(x, y):
        r = np.hypot(x, y)
        s = (3 - r) ** 2 * np.exp(-r) / r
        return -s * y, s * x

    vel = g.sample_vector(v)
    return vel, rot(vel)


def test_solonnikov_on_radial_swirl_converges():
    res = [dg.check_solonnikov_identity(*_swirl_fields(n), calibration=CAL).rel_residual for n in (64, 128)]
    assert res[1] <= 1e-3 and res[1] < res[0]


def test_solonnikov_on_mapped_domain():
    g = CurvilinearGrid(ellipse(1.5, 1.0), 4.0, 128, 128)
    # stream function vanishing with its normal derivative on both boundaries
    rho, R = g.inner, g.outer

    def phi(x, y):
        th = np.arctan2(y, x)
        s = (np.hypot(x, y) - rho(np.mod(th, 2 * np.pi))) / (R(np.mod(th, 2 * np.pi)) - rho(np.mod(th, 2 * np.pi)))
        return s ** 2 * (1 - s) ** 2 * (1 + 0.3 * np.cos(2 * th))

    v = perp_gradient(g.sample_scalar(phi))
    assert dg.check_solonnikov_identity(v, rot(v), CAL).passed


def test_manufactured_identities_and_slip_relation():
    grid = CurvilinearGrid(ellipse(1.5, 1.0), 4.0, 128, 128)
    basis = gk.build_basis(grid, 8, 8)
    a = gk.interior_coefficients(basis, np.random.default_rng(3), 0.3)
    data = gk.manufactured_data(basis, a, nu=1.0, friction=0.5)
    f = gk.reconstruct(gk.GalerkinState(basis.to_orthonormal(a), np.zeros(basis.size), 1.0, True),
                       basis, None, grid)
    b = data.b(grid.theta)
    assert dg.check_alpha_identity(f["v"], f["alpha"], 1.0, 0.5, b, CAL).passed
    assert dg.check_solonnikov_identity(f["v"], f["alpha"], CAL).passed
    assert dg.check_boundary_vorticity(f["v"], f["alpha"], 1.0, 0.5, b, tol=1e-6).passed


def test_korn_constant_positive_and_bounded():
    grid = CurvilinearGrid(ellipse(2.0, 1.0), 4.0, 32, 32)
    k = dg.estimate_korn_constant(gk.build_basis(grid, 6, 5))
    assert 0 < k["K"] <= k["largest"] <= 4.0 + 1e-9
    assert k["K_calibrated"] == pytest.approx(0.5 * k["K"])


def test_korn_quotient_of_single_sample():
    grid = CurvilinearGrid(ellipse(2.0, 1.0), 4.0, 32, 32)
    basis = gk.build_basis(grid, 6, 5)
    K = dg.estimate_korn_constant(basis)["K"]
    q = dg.korn_quotient(basis.sample(np.random.default_rng(0).standard_normal(basis.size)))
    assert K - 1e-9 <= q <= 4.0


def test_decay_profile_exact():
    # v = v_inf + e_theta / r gives D(r) = 2 pi / r^2 relative to v_inf
    vinf = np.array([0.3, -0.1])

    def vel(x, y):
        r2 = x * x + y * y
        return np.stack([vinf[0] - y / r2, vinf[1] + x / r2])

    prof = dg.decay_profile(vel, vinf, [2.0, 4.0, 8.0])
    assert np.allclose(prof["D_v_inf"], 2 * np.pi / np.array([4.0, 16.0, 64.0]), rtol=1e-12)
    assert np.allclose(prof["v_tilde_inf"], vinf, atol=1e-12)


def test_decay_profile_skips_outside_radii():
    vel, _ = _swirl_fields(32)
    prof = dg.decay_profile(vel, (0.0, 0.0), [2.0, 10.0])
    assert prof["radius"] == [2.0] and prof["notes"]


def test_report_serializes(tmp_path):
    rep = dg.DiagnosticsReport(calibration=CAL.as_dict())
    rep.add(dg.check_solonnikov_identity(*_swirl_fields(64), calibration=CAL, tol=1.0))
    rep.extras["array"] = np.arange(3)
    text = rep.to_json(tmp_path / "d.json")
    back = json.loads(text)
    assert back["checks"][0]["pass"] is True and back["extras"]["array"] == [0, 1, 2]
    assert back["all_passed"] is True
    assert dg.data_hash({"a": 1}) == dg.data_hash({"a": 1})
