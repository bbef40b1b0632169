import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from slipflow import extension as E
from slipflow import galerkin as gk
from slipflow.geometry import arc_length_parameterize, circle, ellipse, tubular_map
from slipflow.grid import CurvilinearGrid, divergence

CIRC = tubular_map(arc_length_parameterize(circle(1.0)))
ELL = tubular_map(arc_length_parameterize(ellipse(1.5, 1.0)))


def _ext(tm=ELL, eps=0.5, v=(1.0, 0.3)):
    return E.build_v0(E.ExtensionParams(v, eps, tm.zeta), tm)


def test_grad_V_norm_on_circle_matches_closed_form():
    t, w = sp.symbols("t w", positive=True)
    dg = -sp.pi / (2 * w) * sp.sin(sp.pi * t / w)
    width = 0.3
    exact = sp.sqrt(2 * sp.pi * sp.integrate(dg ** 2 * (1 + t), (t, 0, w))).subs(w, width)
    V = E.ProfileField(CIRC, np.array([1.0, 0.0]), width)
    assert V.grad_norm() == pytest.approx(float(exact), rel=1e-10)


def test_grad_V_eps_slope_is_minus_half():
    params = [E.ExtensionParams((1.0, 0.0), e, ELL.zeta) for e in (0.2, 0.1, 0.05, 0.025)]
    assert E.grad_V_eps_scaling(params, ELL)["slope"] == pytest.approx(-0.5, abs=0.05)


def test_cutoff_plateaus():
    cut = E.HopfCutoff(0.2, 0.02)
    eta, d1, d2 = cut(np.array([0.0, 0.01, 0.02, 0.2, 0.5]))
    assert np.allclose(eta, [1, 1, 1, 0, 0]) and np.allclose(d1, 0) and np.allclose(d2, 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.021, 0.199))
def test_cutoff_derivatives_and_log_bound(t):
    cut = E.HopfCutoff(0.2, 0.02)
    h = 1e-6
    eta, d1, d2 = cut(t)
    ep, d1p, _ = cut(t + h)
    em, d1m, _ = cut(t - h)
    assert d1 == pytest.approx((ep - em) / (2 * h), rel=1e-5, abs=1e-6)
    assert d2 == pytest.approx((d1p - d1m) / (2 * h), rel=1e-4, abs=1e-3)
    assert abs(d1) * t * np.log(10.0) <= 15 / 8 + 1e-12


def test_velocity_vanishes_on_obstacle_and_is_v_inf_outside():
    ext = _ext()
    grid = CurvilinearGrid(ellipse(1.5, 1.0), 4.0, 64, 16)
    assert E.trace_norm(ext, grid) < 1e-12
    far = ext.velocity(np.array([3.0, -2.5]), np.array([0.5, 2.0]))
    assert np.allclose(far, np.array([[1.0, 1.0], [0.3, 0.3]]))


# velocity has a second-derivative jump at the inner cutoff edge (frac = 1/2)
@settings(max_examples=20, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(0.05, 0.9).filter(lambda f: abs(f - 0.5) > 1e-3))
def test_vorticity_matches_finite_differences(theta, frac):
    ext = _ext()
    c = ELL.curve
    p = c.point_at_theta(theta) + frac * ext.params.layer * c.normal_at_theta(theta)
    h = 1e-5
    vxp, vxm = ext.velocity(p[0] + h, p[1]), ext.velocity(p[0] - h, p[1])
    vyp, vym = ext.velocity(p[0], p[1] + h), ext.velocity(p[0], p[1] - h)
    fd = (vxp[1] - vxm[1]) / (2 * h) - (vyp[0] - vym[0]) / (2 * h)
    div = (vxp[0] - vxm[0]) / (2 * h) + (vyp[1] - vym[1]) / (2 * h)
    w = ext.vorticity(p[0], p[1])
    assert w == pytest.approx(fd, rel=1e-4, abs=1e-4 * (1 + abs(fd)))
    assert abs(div) <= 1e-4 * (1 + abs(fd))


def test_vorticity_is_continuous_at_inner_edge():
    ext = _ext()
    c = ELL.curve
    base, nrm = c.point_at_theta(0.3), c.normal_at_theta(0.3)
    edge = ext.cutoff.inner
    jump = [abs(ext.vorticity(*(base + (edge + s) * nrm)) - ext.vorticity(*(base + (edge - s) * nrm)))
            for s in (1e-6, 1e-7)]
    assert jump[1] < 0.2 * jump[0]


def test_discrete_v0_is_divergence_free():
    ext = _ext(CIRC)
    grid = CurvilinearGrid(circle(1.0), 4.0, 128, 128, stretch=np.log(4.0))
    assert np.max(np.abs(divergence(E.discrete_v0(ext, grid)).values)) < 1e-9


def test_invalid_parameters():
    with pytest.raises(E.ExtensionError):
        E.ExtensionParams((1.0, 0.0), 0.0, 0.3)
    with pytest.raises(E.ExtensionError):
        E.ExtensionParams((np.nan, 0.0), 0.5, 0.3)
    with pytest.raises(E.ExtensionError):
        E.ExtensionParams((1.0, 0.0), 0.5, 0.3, inner_ratio=1.5)


class _FakeSample:
    def __init__(self, s, shift):
        self.rule, self.grad, self.lap = s.rule, s.grad, s.lap
        self.trace = s.trace + shift


def _compact_samples(n=20, seed=1):
    grid = CurvilinearGrid(circle(1.0), 4.0, 64, 64, stretch=np.log(4.0))
    xb = np.concatenate([gk.layer_breaks(grid, e * CIRC.zeta, 10) for e in (0.2, 0.1, 0.05)])
    basis = gk.build_basis(grid, 8, 8, extra_xi=xb)
    rng = np.random.default_rng(seed)
    return [basis.sample(basis.to_orthonormal(gk.compact_coefficients(basis, rng))) for _ in range(n)]


def test_v0_ratio_decreases_with_epsilon():
    samples = _compact_samples()
    ratios = [E.verify_v0_inequality(_ext(CIRC, e, (1.0, 0.0)), samples, 0.1)["max_ratio"]
              for e in (0.2, 0.1, 0.05)]
    assert ratios[0] <= 0.1 and ratios[0] > ratios[1] > ratios[2]


def test_trace_violation_raises():
    s = _compact_samples(1)[0]
    with pytest.raises(E.TraceError):
        E.verify_v0_inequality(_ext(CIRC), [_FakeSample(s, 1e-3)])
