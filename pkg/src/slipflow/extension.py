"""Divergence-free extension fields near the obstacle.

Three fields live in the tubular strip around the obstacle:

* the cosine profile ``V`` of width ``zeta`` and its squeezed copy ``V_eps``
  of width ``eps * zeta``; both equal ``v_inf`` on the boundary;
* the Hopf-type field ``v0 = grad_perp(c(x) eta(t2))`` with
  ``c(x) = v_inf_1 x2 - v_inf_2 x1`` and a logarithmic cutoff ``eta``.  It is
  exactly divergence free, equals ``-v_inf`` on the boundary and vanishes for
  ``t2 >= eps * zeta``; ``v0 + v_inf`` is the extension carried by the solver.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import TubularMap
from .grid import CurvilinearGrid, FunctionSample, QuadratureRule, ScalarField, perp_gradient


class ExtensionError(ValueError):
    """Inconsistent extension parameters."""


@dataclass(frozen=True)
class ExtensionParams:
    v_infinity: tuple
    epsilon: float
    zeta: float
    inner_ratio: float | None = None

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ExtensionError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.zeta <= 0.0:
            raise ExtensionError("strip width zeta must be positive")
        if not np.all(np.isfinite(self.v_infinity)):
            raise ExtensionError("v_infinity must be finite")
        r = self.ratio
        if not 0.0 < r < 1.0:
            raise ExtensionError(f"cutoff inner ratio must lie in (0, 1), got {r}")

    @property
    def v_inf(self) -> np.ndarray:
        return np.asarray(self.v_infinity, dtype=float)

    @property
    def layer(self) -> float:
        """Outer radius eps * zeta of the boundary layer Omega_eps."""
        return self.epsilon * self.zeta

    @property
    def ratio(self) -> float:
        if self.inner_ratio is not None:
            return float(self.inner_ratio)
        return min(self.epsilon, 0.5)


def _strip_coords(tmap: TubularMap, x, y, reach: float):
    """t2 and (n, chi) at the foot point for points within ``reach`` of the boundary."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    curve = tmap.curve
    theta = np.mod(np.arctan2(y, x), 2 * np.pi)
    gap = np.hypot(x, y) - curve.radius(theta)
    near = gap < 2.0 * reach + 1e-12
    t2 = np.full(x.shape, np.inf)
    n = np.zeros((2,) + x.shape)
    chi = np.zeros(x.shape)
    if np.any(near):
        th = curve.foot_point(x[near], y[near])
        foot = curve.point_at_theta(th)
        nn = curve.normal_at_theta(th)
        t2[near] = (x[near] - foot[0]) * nn[0] + (y[near] - foot[1]) * nn[1]
        n[:, near] = nn
        chi[near] = curve.curvature_at_theta(th)
    return t2, n, chi


@dataclass(frozen=True)
class ProfileField:
    """V(p(t1, t2)) = v_inf (1 + cos(pi t2 / width)) / 2 inside the strip, zero outside."""

    tmap: TubularMap
    v_inf: np.ndarray
    width: float

    def profile(self, t2):
        inside = (t2 >= 0) & (t2 <= self.width)
        g = 0.5 * (1.0 + np.cos(np.pi * np.clip(t2, 0, self.width) / self.width))
        dg = -0.5 * np.pi / self.width * np.sin(np.pi * np.clip(t2, 0, self.width) / self.width)
        return np.where(inside, g, 0.0), np.where(inside, dg, 0.0)

    def __call__(self, x, y):
        t2, _, _ = _strip_coords(self.tmap, x, y, self.width)
        g, _ = self.profile(t2)
        return np.multiply.outer(self.v_inf, g)

    def gradient(self, x, y):
        """dV_i/dx_j = v_inf_i g'(t2) n_j, shape (2, 2, ...)."""
        t2, n, _ = _strip_coords(self.tmap, x, y, self.width)
        _, dg = self.profile(t2)
        return np.einsum("i,j...->ij...", self.v_inf, dg * n)

    def at_strip(self, t1, t2):
        g, _ = self.profile(np.asarray(t2, float))
        return np.multiply.outer(self.v_inf, g)

    def grad_norm(self, n_t1: int = 256, n_t2: int = 64) -> float:
        """||grad V||_{L^2(Omega)} by Gauss quadrature in tubular coordinates."""
        curve = self.tmap.curve
        t1 = curve.length * np.arange(n_t1) / n_t1
        chi = curve.curvature(t1)
        gq, gw = np.polynomial.legendre.leggauss(n_t2)
        t2 = 0.5 * self.width * (gq + 1.0)
        w2 = 0.5 * self.width * gw
        _, dg = self.profile(t2)
        jac = 1.0 + np.outer(chi, t2)
        speed2 = float(self.v_inf @ self.v_inf)
        total = np.sum(jac * (dg ** 2 * w2)[None, :]) * speed2 * curve.length / n_t1
        return float(np.sqrt(total))


def build_V(params: ExtensionParams, tmap: TubularMap) -> ProfileField:
    return ProfileField(tmap, params.v_inf, params.zeta)


def build_V_eps(params: ExtensionParams, tmap: TubularMap) -> ProfileField:
    return ProfileField(tmap, params.v_inf, params.layer)


def _smoothstep(lam):
    lam = np.clip(lam, 0.0, 1.0)
    h = lam ** 3 * (10 - 15 * lam + 6 * lam ** 2)
    dh = 30 * lam ** 2 * (1 - lam) ** 2
    d2h = 60 * lam * (1 - lam) * (1 - 2 * lam)
    return h, dh, d2h


@dataclass(frozen=True)
class HopfCutoff:
    """eta(t) = H(ln(a/t) / ln(a/b)): 1 on [0, b], 0 beyond a, C^2 with |eta'| <= C / (t ln(a/b))."""

    outer: float
    inner: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        log_span = np.log(self.outer / self.inner)
        tt = np.clip(t, self.inner, self.outer)
        lam = np.log(self.outer / tt) / log_span
        h, dh, d2h = _smoothstep(lam)
        mid = (t > self.inner) & (t < self.outer)
        eta = np.where(t <= self.inner, 1.0, np.where(t >= self.outer, 0.0, h))
        d1 = np.where(mid, -dh / (tt * log_span), 0.0)
        d2 = np.where(mid, d2h / (tt * log_span) ** 2 + dh / (tt ** 2 * log_span), 0.0)
        return eta, d1, d2


@dataclass(frozen=True)
class HopfExtension:
    """The fields v0 and v0 + v_inf built from a logarithmic cutoff."""

    tmap: TubularMap
    params: ExtensionParams

    @property
    def cutoff(self) -> HopfCutoff:
        a = self.params.layer
        return HopfCutoff(a, a * self.params.ratio)

    def _parts(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        t2, n, chi = _strip_coords(self.tmap, x, y, self.params.layer)
        eta, d1, d2 = self.cutoff(np.where(np.isfinite(t2), t2, np.inf))
        eta = np.where(np.isfinite(t2), eta, 0.0)
        vi = self.params.v_inf
        c = vi[0] * y - vi[1] * x
        return t2, n, chi, eta, d1, d2, c

    def stream(self, x, y):
        """c(x) eta(t2); its perp-gradient is v0."""
        _, _, _, eta, _, _, c = self._parts(x, y)
        return c * eta

    def v0(self, x, y):
        _, n, _, eta, d1, _, c = self._parts(x, y)
        vi = self.params.v_inf
        return np.stack([-eta * vi[0] - c * d1 * n[1], -eta * vi[1] + c * d1 * n[0]])

    def velocity(self, x, y):
        """v0 + v_inf: zero on the obstacle, v_inf outside Omega_eps."""
        v = self.v0(x, y)
        vi = self.params.v_inf
        return np.stack([v[0] + vi[0], v[1] + vi[1]])

    def vorticity(self, x, y):
        """rot(v0 + v_inf) = Laplacian of the stream function."""
        t2, n, chi, _, d1, d2, c = self._parts(x, y)
        vi = self.params.v_inf
        grad_c_dot_n = -vi[1] * n[0] + vi[0] * n[1]
        lap_t2 = np.where(np.isfinite(t2), chi / (1.0 + np.where(np.isfinite(t2), t2, 0) * chi), 0.0)
        return 2.0 * d1 * grad_c_dot_n + c * (d2 + d1 * lap_t2)

    def support_distance(self, x, y):
        t2, _, _ = _strip_coords(self.tmap, x, y, self.params.layer)
        return t2


def build_v0(params: ExtensionParams, tmap: TubularMap) -> HopfExtension:
    if params.layer >= tmap.zeta * (1.0 + 1e-12):
        raise ExtensionError("layer eps*zeta does not fit inside the tubular strip")
    return HopfExtension(tmap, params)


def discrete_v0(ext: HopfExtension, grid: CurvilinearGrid):
    """v0 as the discrete perp-gradient of the sampled stream function."""
    psi = grid.sample_scalar(ext.stream)
    return perp_gradient(psi)


class TraceError(ValueError):
    """A test function violates the trace-zero precondition."""


def verify_v0_inequality(ext: HopfExtension, samples, epsilon_target: float | None = None,
                         trace_tol: float = 1e-9) -> dict:
    """max over samples of |int (v0 + v_inf) . grad phi Lap phi| / ||Lap phi||^2."""
    target = ext.params.epsilon if epsilon_target is None else float(epsilon_target)
    ratios = []
    cache: dict[int, np.ndarray] = {}
    for s in samples:
        rule = s.rule
        lap = s.lap
        scale = np.sqrt(rule.integrate(lap ** 2))
        if np.max(np.abs(s.trace)) > trace_tol * max(1.0, scale):
            raise TraceError("test function does not vanish on the obstacle boundary")
        if scale == 0.0:
            continue
        key = id(rule)
        if key not in cache:
            cache[key] = ext.velocity(rule.jet.x, rule.jet.y)
        w = cache[key]
        num = rule.integrate((w[0] * s.grad[0] + w[1] * s.grad[1]) * lap)
        ratios.append(abs(num) / scale ** 2)
    max_ratio = max(ratios) if ratios else 0.0
    return {
        "epsilon": ext.params.epsilon,
        "epsilon_target": target,
        "max_ratio": float(max_ratio),
        "n_samples": len(ratios),
        "pass": bool(max_ratio <= target),
        "ratios": [float(r) for r in ratios],
    }


def layer_mask(ext_or_params, tmap: TubularMap, x, y, width: float | None = None):
    w = ext_or_params.layer if width is None else width
    t2, _, _ = _strip_coords(tmap, x, y, w)
    return t2 < w


def weighted_l2_constant(sample: FunctionSample, tmap: TubularMap, width: float,
                         epsilon: float, alpha: float = 0.75) -> float:
    """C in ||phi||_{L2(Omega_eps)} <= C eps^{(1+2 alpha)/2} ||grad^2 phi||_{L2(Omega_eps)}."""
    rule = sample.rule
    mask = layer_mask(None, tmap, rule.jet.x, rule.jet.y, width)
    num = np.sqrt(rule.integrate(mask * sample.value ** 2))
    den = np.sqrt(rule.integrate(mask * sample.hessian_sq()))
    return float(num / (den * epsilon ** ((1 + 2 * alpha) / 2)))


def interpolation_constant(sample: FunctionSample, tmap: TubularMap, width: float) -> float:
    """||grad phi||_{L4} / (||phi||^{1/4} ||grad^2 phi||^{3/4}) over Omega_eps."""
    rule = sample.rule
    mask = layer_mask(None, tmap, rule.jet.x, rule.jet.y, width)
    g2 = sample.grad[0] ** 2 + sample.grad[1] ** 2
    l4 = rule.integrate(mask * g2 ** 2) ** 0.25
    l2 = np.sqrt(rule.integrate(mask * sample.value ** 2))
    h2 = np.sqrt(rule.integrate(mask * sample.hessian_sq()))
    return float(l4 / (l2 ** 0.25 * h2 ** 0.75))


def grad_V_eps_scaling(params_list, tmap: TubularMap) -> dict:
    """||grad V_eps|| for each epsilon and the fitted log-log slope."""
    eps = np.array([p.epsilon for p in params_list])
    norms = np.array([build_V_eps(p, tmap).grad_norm() for p in params_list])
    slope = np.polyfit(np.log(eps), np.log(norms), 1)[0]
    return {"epsilon": eps.tolist(), "grad_norm": norms.tolist(), "slope": float(slope)}


def trace_norm(ext: HopfExtension, grid: CurvilinearGrid) -> float:
    """max |v0 + v_inf| on the obstacle boundary nodes."""
    pts = grid.curve.point_at_theta(grid.theta)
    v = ext.velocity(pts[0], pts[1])
    return float(np.max(np.hypot(v[0], v[1])))


__all__ = [
    "ExtensionParams", "ExtensionError", "ProfileField", "HopfCutoff", "HopfExtension",
    "build_V", "build_V_eps", "build_v0", "discrete_v0", "verify_v0_inequality",
    "weighted_l2_constant", "interpolation_constant", "grad_V_eps_scaling", "trace_norm",
    "TraceError", "ScalarField", "QuadratureRule",
]
