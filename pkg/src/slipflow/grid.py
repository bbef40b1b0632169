"""Boundary-fitted grid on the truncated exterior domain and fields on it.

The computational coordinates are (theta, xi) in [0, 2 pi) x [0, 1] with

    x(theta, xi) = r(theta, xi) (cos theta, sin theta),
    r = (1 - sigma) rho_in(theta) + sigma rho_out(theta),   sigma = s(xi),

where ``s`` is an optional exponential stretching that clusters nodes near
the obstacle (``stretch = 0`` gives sigma = xi).  Metric quantities are
evaluated analytically to third order so that fields with exactly known
computational derivatives (B-splines, analytic samples) get exact Cartesian
derivatives; nodal fields are differentiated with 4th-order finite
differences (periodic in theta, one-sided closures in xi).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline

from .geometry import TWO_PI, BoundaryCurve, RadiusFunction, arc_length_parameterize, circle

# multi-indices (i, j) = (d/dtheta)^i (d/dxi)^j up to third order
ORDERS = [(i, n - i) for n in range(4) for i in range(n, -1, -1)]


@dataclass
class FunctionSample:
    """A scalar function known exactly at quadrature points with Cartesian derivatives.

    ``d`` maps (nx, ny) derivative counts to arrays on ``rule``; ``trace`` holds
    the values on the obstacle boundary at ``rule.theta``.
    """

    rule: "QuadratureRule"
    d: dict
    trace: np.ndarray

    @property
    def value(self):
        return self.d[(0, 0)]

    @property
    def grad(self):
        return np.stack([self.d[(1, 0)], self.d[(0, 1)]])

    @property
    def lap(self):
        return self.d[(2, 0)] + self.d[(0, 2)]

    def hessian_sq(self):
        return self.d[(2, 0)] ** 2 + 2 * self.d[(1, 1)] ** 2 + self.d[(0, 2)] ** 2


# --------------------------------------------------------------------------
# finite differences
# --------------------------------------------------------------------------
def fd_weights(x0: float, xs, m: int) -> np.ndarray:
    """Fornberg weights for the m-th derivative at x0 from nodes xs."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def periodic_diff_matrix(n: int, h: float, m: int) -> sparse.csr_matrix:
    w = fd_weights(0.0, np.arange(-2, 3) * h, m)
    rows, cols, vals = [], [], []
    for i in range(n):
        for k, off in enumerate(range(-2, 3)):
            rows.append(i)
            cols.append((i + off) % n)
            vals.append(w[k])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def bounded_diff_matrix(xs, m: int) -> sparse.csr_matrix:
    """4th-order centred stencils inside, 6-point one-sided closures at the ends."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    rows, cols, vals = [], [], []
    for i in range(n):
        if i < 2:
            idx = np.arange(0, 6)
        elif i > n - 3:
            idx = np.arange(n - 6, n)
        else:
            idx = np.arange(i - 2, i + 3)
        w = fd_weights(xs[i], xs[idx], m)
        rows.extend([i] * len(idx))
        cols.extend(idx.tolist())
        vals.extend(w.tolist())
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


# --------------------------------------------------------------------------
# stretching and mapping jets
# --------------------------------------------------------------------------
def stretch_derivs(xi, beta: float, order: int = 3):
    """[s, s', s'', s'''] for s(xi) = (exp(beta xi) - 1) / (exp(beta) - 1)."""
    xi = np.asarray(xi, dtype=float)
    if abs(beta) < 1e-12:
        out = [xi, np.ones_like(xi)] + [np.zeros_like(xi)] * (order - 1)
        return out[: order + 1]
    denom = np.expm1(beta)
    e = np.exp(beta * xi)
    return [np.expm1(beta * xi) / denom] + [beta ** q * e / denom for q in range(1, order + 1)]


def inverse_stretch(sigma, beta: float):
    sigma = np.asarray(sigma, dtype=float)
    if abs(beta) < 1e-12:
        return sigma
    return np.log1p(sigma * np.expm1(beta)) / beta


@dataclass
class MapJet:
    """Forward and inverse derivatives of the grid map at a set of points.

    ``A1[a, i]`` = d xi^a / d x_i, ``A2[a, i, j]``, ``A3[a, i, j, k]`` its
    Cartesian derivatives (a = 0 theta, a = 1 xi).
    """

    x: np.ndarray
    y: np.ndarray
    jac: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray | None
    forward: dict | None = None

    def cartesian(self, comp: dict, order: int = 2) -> dict:
        """Cartesian derivatives from computational ones.

        ``comp[(i, j)]`` holds (d/dtheta)^i (d/dxi)^j of the field; the result is
        keyed by (nx, ny) derivative counts, e.g. (1, 0) = d/dx, (1, 1) = d2/dxdy.
        """
        shape = self.x.shape
        f1 = np.stack([comp[(1, 0)], comp[(0, 1)]])
        out = {(0, 0): comp.get((0, 0), np.zeros(shape))}
        g = np.einsum("a...,ai...->i...", f1, self.A1)
        out[(1, 0)], out[(0, 1)] = g[0], g[1]
        if order < 2:
            return out
        f2 = _sym2(comp)
        h = (np.einsum("ab...,ai...,bj...->ij...", f2, self.A1, self.A1)
             + np.einsum("a...,aij...->ij...", f1, self.A2))
        out[(2, 0)], out[(1, 1)], out[(0, 2)] = h[0, 0], h[0, 1], h[1, 1]
        if order < 3:
            return out
        f3 = _sym3(comp)
        A1, A2 = self.A1, self.A2
        t = (np.einsum("abc...,ai...,bj...,ck...->ijk...", f3, A1, A1, A1)
             + np.einsum("ab...,aik...,bj...->ijk...", f2, A2, A1)
             + np.einsum("ab...,ai...,bjk...->ijk...", f2, A1, A2)
             + np.einsum("ab...,aij...,bk...->ijk...", f2, A2, A1)
             + np.einsum("a...,aijk...->ijk...", f1, self.A3))
        out[(3, 0)], out[(2, 1)], out[(1, 2)], out[(0, 3)] = t[0, 0, 0], t[0, 0, 1], t[0, 1, 1], t[1, 1, 1]
        return out


def _sym2(comp):
    return np.stack([np.stack([comp[(2, 0)], comp[(1, 1)]]),
                     np.stack([comp[(1, 1)], comp[(0, 2)]])])


def _sym3(comp):
    def pick(a, b, c):
        n_theta = (a == 0) + (b == 0) + (c == 0)
        return comp[(n_theta, 3 - n_theta)]
    return np.stack([np.stack([np.stack([pick(a, b, c) for c in (0, 1)]) for b in (0, 1)])
                     for a in (0, 1)])


def map_jet(inner: RadiusFunction, outer: RadiusFunction, beta: float,
            theta, xi, order: int = 3) -> MapJet:
    theta, xi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(xi, float))
    s = stretch_derivs(xi, beta, order)
    rin = [inner(theta, k) for k in range(order + 1)]
    rout = [outer(theta, k) for k in range(order + 1)]

    def r_d(k, q):
        if q == 0:
            return rin[k] * (1.0 - s[0]) + rout[k] * s[0]
        return (rout[k] - rin[k]) * s[q]

    cosd = [np.cos(theta), -np.sin(theta), -np.cos(theta), np.sin(theta)]
    sind = [np.sin(theta), np.cos(theta), -np.sin(theta), -np.cos(theta)]
    X = {}
    for p in range(order + 1):
        for q in range(order + 1 - p):
            xv = np.zeros(theta.shape)
            yv = np.zeros(theta.shape)
            for k in range(p + 1):
                rk = r_d(k, q)
                xv = xv + comb(p, k) * rk * cosd[(p - k) % 4]
                yv = yv + comb(p, k) * rk * sind[(p - k) % 4]
            X[(p, q)] = np.stack([xv, yv])

    J = np.stack([X[(1, 0)], X[(0, 1)]], axis=1)  # J[m, b] = dx_m / dxi^b
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    A1 = np.empty_like(J)
    A1[0, 0] = J[1, 1] / det
    A1[0, 1] = -J[0, 1] / det
    A1[1, 0] = -J[1, 0] / det
    A1[1, 1] = J[0, 0] / det

    X2 = np.empty((2, 2, 2) + theta.shape)
    for b in range(2):
        for c in range(2):
            X2[:, b, c] = X[((b == 0) + (c == 0), (b == 1) + (c == 1))]
    A2 = -np.einsum("am...,mbc...,bi...,cj...->aij...", A1, X2, A1, A1)
    A3 = None
    if order >= 3:
        X3 = np.empty((2, 2, 2, 2) + theta.shape)
        for b in range(2):
            for c in range(2):
                for d in range(2):
                    nt = (b == 0) + (c == 0) + (d == 0)
                    X3[:, b, c, d] = X[(nt, 3 - nt)]
        A3 = -(np.einsum("amk...,mbc...,bi...,cj...->aijk...", A2, X2, A1, A1)
               + np.einsum("am...,mbcd...,dk...,bi...,cj...->aijk...", A1, X3, A1, A1, A1)
               + np.einsum("am...,mbc...,bik...,cj...->aijk...", A1, X2, A2, A1)
               + np.einsum("am...,mbc...,bi...,cjk...->aijk...", A1, X2, A1, A2))
    return MapJet(x=X[(0, 0)][0], y=X[(0, 0)][1], jac=det, A1=A1, A2=A2, A3=A3, forward=X)


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------
@dataclass
class QuadratureRule:
    """Tensor Gauss-Legendre rule on (theta, xi) cells with the mapped area element."""

    grid: "CurvilinearGrid"
    theta: np.ndarray
    w_theta: np.ndarray
    xi: np.ndarray
    w_xi: np.ndarray
    jet: MapJet

    @cached_property
    def weights(self) -> np.ndarray:
        return np.abs(self.jet.jac) * np.outer(self.w_theta, self.w_xi)

    def boundary_weights(self, which: str = "obstacle") -> np.ndarray:
        radius = self.grid.inner if which == "obstacle" else self.grid.outer
        speed = np.hypot(radius(self.theta), radius(self.theta, 1))
        return self.w_theta * speed

    def integrate(self, values) -> float:
        return float(np.sum(self.weights * values))

    @property
    def shape(self):
        return self.jet.x.shape


def gauss_on_breaks(breaks, order: int):
    g, w = np.polynomial.legendre.leggauss(order)
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:-1, None], breaks[1:, None]
    pts = 0.5 * (a + b) + 0.5 * (b - a) * g[None, :]
    wts = 0.5 * (b - a) * w[None, :]
    return pts.ravel(), wts.ravel()


def merge_breaks(*arrays, tol: float = 1e-12):
    allb = np.sort(np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays]))
    keep = np.concatenate([[True], np.diff(allb) > tol])
    return allb[keep]


# --------------------------------------------------------------------------
# grid
# --------------------------------------------------------------------------
class CurvilinearGrid:
    """Boundary-fitted grid on Omega_R between the obstacle and an outer curve."""

    def __init__(self, inner: RadiusFunction, R: float | RadiusFunction, n_theta: int,
                 n_sigma: int, quad_order: int = 4, stretch: float = 0.0):
        if n_theta < 8 or n_sigma < 8:
            raise ValueError("grid needs at least 8 nodes per direction")
        self.inner = inner
        self.outer = R if isinstance(R, RadiusFunction) else circle(float(R))
        self.R = float(R) if not isinstance(R, RadiusFunction) else R.max_radius()
        theta = np.linspace(0.0, TWO_PI, 2048, endpoint=False)
        if np.any(self.outer(theta) <= inner(theta)):
            raise ValueError("outer boundary must enclose the obstacle")
        self.n_theta = int(n_theta)
        self.n_sigma = int(n_sigma)
        self.quad_order = int(quad_order)
        self.stretch = float(stretch)
        self.theta = TWO_PI * np.arange(self.n_theta) / self.n_theta
        self.xi = np.linspace(0.0, 1.0, self.n_sigma)
        self.sigma = stretch_derivs(self.xi, self.stretch, 0)[0]
        self.h_theta = TWO_PI / self.n_theta
        self.D1t = periodic_diff_matrix(self.n_theta, self.h_theta, 1)
        self.D2t = periodic_diff_matrix(self.n_theta, self.h_theta, 2)
        self.D1x = bounded_diff_matrix(self.xi, 1)
        self.D2x = bounded_diff_matrix(self.xi, 2)

    # --- geometry ----------------------------------------------------------
    @cached_property
    def curve(self) -> BoundaryCurve:
        return arc_length_parameterize(self.inner)

    @cached_property
    def outer_curve(self) -> BoundaryCurve:
        return arc_length_parameterize(self.outer)

    @cached_property
    def jet(self) -> MapJet:
        T, X = np.meshgrid(self.theta, self.xi, indexing="ij")
        return map_jet(self.inner, self.outer, self.stretch, T, X, order=2)

    @property
    def x(self):
        return self.jet.x

    @property
    def y(self):
        return self.jet.y

    @property
    def shape(self):
        return (self.n_theta, self.n_sigma)

    def boundary_curve(self, which: str) -> BoundaryCurve:
        return self.curve if which == "obstacle" else self.outer_curve

    def boundary_frame(self, which: str = "obstacle", theta=None):
        """(tau, n, chi) at the boundary: ccw tangent, normal pointing away from the origin."""
        c = self.boundary_curve(which)
        th = self.theta if theta is None else theta
        return c.tangent_at_theta(th), c.normal_at_theta(th), c.curvature_at_theta(th)

    def to_computational(self, x, y):
        """Inverse of the star map: (theta, xi) for physical points (NaN outside Omega_R)."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        theta = np.mod(np.arctan2(y, x), TWO_PI)
        r = np.hypot(x, y)
        rin, rout = self.inner(theta), self.outer(theta)
        sigma = (r - rin) / (rout - rin)
        bad = (sigma < -1e-12) | (sigma > 1 + 1e-12)
        xi = inverse_stretch(np.clip(sigma, 0.0, 1.0), self.stretch)
        xi = np.where(bad, np.nan, xi)
        return theta, xi

    # --- quadrature --------------------------------------------------------
    def quadrature(self, extra_theta=(), extra_xi=(), order: int | None = None,
                   jet_order: int = 2) -> QuadratureRule:
        order = self.quad_order if order is None else order
        tb = merge_breaks(np.append(self.theta, TWO_PI), extra_theta)
        xb = merge_breaks(self.xi, extra_xi)
        tq, wt = gauss_on_breaks(tb, order)
        xq, wx = gauss_on_breaks(xb, order)
        T, X = np.meshgrid(tq, xq, indexing="ij")
        jet = map_jet(self.inner, self.outer, self.stretch, T, X, order=jet_order)
        return QuadratureRule(self, tq, wt, xq, wx, jet)

    @cached_property
    def quad(self) -> QuadratureRule:
        return self.quadrature()

    # --- sampling ----------------------------------------------------------
    def sample_scalar(self, fn, rule: QuadratureRule | None = None) -> "ScalarField":
        jet = self.jet if rule is None else rule.jet
        return ScalarField(self, np.asarray(fn(jet.x, jet.y), float) * np.ones(jet.x.shape), rule)

    def sample_vector(self, fn, rule: QuadratureRule | None = None) -> "VectorField":
        jet = self.jet if rule is None else rule.jet
        v1, v2 = fn(jet.x, jet.y)
        ones = np.ones(jet.x.shape)
        return VectorField(self, np.stack([v1 * ones, v2 * ones]), rule)

    # --- nodal differentiation ----------------------------------------------
    def d_theta(self, f, m: int = 1):
        D = self.D1t if m == 1 else self.D2t
        return D @ f

    def d_xi(self, f, m: int = 1):
        D = self.D1x if m == 1 else self.D2x
        return (D @ f.T).T

    def computational_derivs(self, f, order: int = 2) -> dict:
        out = {(0, 0): f, (1, 0): self.d_theta(f), (0, 1): self.d_xi(f)}
        if order >= 2:
            out[(2, 0)] = self.d_theta(f, 2)
            out[(1, 1)] = self.d_xi(out[(1, 0)])
            out[(0, 2)] = self.d_xi(f, 2)
        return out

    def cartesian_derivs(self, f, order: int = 1) -> dict:
        return self.jet.cartesian(self.computational_derivs(f, order), order)


@dataclass
class ScalarField:
    """Scalar samples at grid nodes (``rule is None``) or at quadrature points."""

    grid: CurvilinearGrid
    values: np.ndarray
    rule: QuadratureRule | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _vals(other), self.rule)

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _vals(other), self.rule)

    def __mul__(self, a):
        return ScalarField(self.grid, self.values * _vals(a), self.rule)

    __rmul__ = __mul__


@dataclass
class VectorField:
    """Cartesian vector samples, ``values`` of shape (2, ...)."""

    grid: CurvilinearGrid
    values: np.ndarray
    rule: QuadratureRule | None = None
    div_tolerance: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")
        if self.div_tolerance is not None:
            res = np.max(np.abs(divergence(self).values))
            if res > self.div_tolerance:
                raise ValueError(f"divergence residual {res:.3e} exceeds {self.div_tolerance:.3e}")

    def __add__(self, other):
        return VectorField(self.grid, self.values + _vals(other), self.rule)

    def __sub__(self, other):
        return VectorField(self.grid, self.values - _vals(other), self.rule)

    def __mul__(self, a):
        return VectorField(self.grid, self.values * _vals(a), self.rule)

    __rmul__ = __mul__


def _vals(a):
    return a.values if isinstance(a, (ScalarField, VectorField)) else a


def _require_nodes(field):
    if field.rule is not None:
        raise ValueError("finite-difference operators need a nodal field")


# --------------------------------------------------------------------------
# operators
# --------------------------------------------------------------------------
def gradient(phi: ScalarField) -> VectorField:
    _require_nodes(phi)
    d = phi.grid.cartesian_derivs(phi.values, 1)
    return VectorField(phi.grid, np.stack([d[(1, 0)], d[(0, 1)]]))


def perp_gradient(phi: ScalarField) -> VectorField:
    """u = (-phi_{,2}, phi_{,1})."""
    g = gradient(phi).values
    return VectorField(phi.grid, np.stack([-g[1], g[0]]))


def _conservative_div(grid: CurvilinearGrid, a, b):
    """div (a, b) in the metric-conservative form; exact zero on discrete perp-gradients."""
    A1, J = grid.jet.A1, grid.jet.jac
    # J * (d theta/dx, d theta/dy) and J * (d xi/dx, d xi/dy)
    flux_t = J * (A1[0, 0] * a + A1[0, 1] * b)
    flux_x = J * (A1[1, 0] * a + A1[1, 1] * b)
    return (grid.d_theta(flux_t) + grid.d_xi(flux_x)) / J


def divergence(v: VectorField) -> ScalarField:
    _require_nodes(v)
    return ScalarField(v.grid, _conservative_div(v.grid, v.values[0], v.values[1]))


def rot(v: VectorField) -> ScalarField:
    """alpha = v_{2,1} - v_{1,2}, written as div(v2, -v1)."""
    _require_nodes(v)
    return ScalarField(v.grid, _conservative_div(v.grid, v.values[1], -v.values[0]))


def hessian(phi: ScalarField):
    _require_nodes(phi)
    d = phi.grid.cartesian_derivs(phi.values, 2)
    return d[(2, 0)], d[(1, 1)], d[(0, 2)]


def laplacian(phi: ScalarField) -> ScalarField:
    hxx, _, hyy = hessian(phi)
    return ScalarField(phi.grid, hxx + hyy)


def vector_gradient(v: VectorField):
    """(v1_x, v1_y, v2_x, v2_y) at the nodes."""
    _require_nodes(v)
    d1 = v.grid.cartesian_derivs(v.values[0], 1)
    d2 = v.grid.cartesian_derivs(v.values[1], 1)
    return d1[(1, 0)], d1[(0, 1)], d2[(1, 0)], d2[(0, 1)]


def sym_gradient(v: VectorField) -> np.ndarray:
    """D(v) = v_{i,j} + v_{j,i} (no factor 1/2), shape (2, 2, ...)."""
    a, b, c, d = vector_gradient(v)
    off = b + c
    return np.stack([np.stack([2 * a, off]), np.stack([off, 2 * d])])


def integrate_domain(f: ScalarField) -> float:
    """Quadrature of a nodal field (cubic spline in xi, trapezoid in theta) or a quadrature-point field."""
    if f.rule is not None:
        return f.rule.integrate(f.values)
    g = f.grid
    integrand = f.values * np.abs(g.jet.jac)
    col = CubicSpline(g.xi, integrand, axis=1).integrate(0.0, 1.0)
    return float(np.sum(col) * g.h_theta)


def integrate_boundary(g_values, grid: CurvilinearGrid, which: str = "obstacle",
                       rule: QuadratureRule | None = None) -> float:
    """Arc-length integral of boundary samples (at theta nodes, or at rule.theta)."""
    g_values = np.asarray(g_values, dtype=float)
    if rule is not None:
        return float(np.sum(g_values * rule.boundary_weights(which)))
    radius = grid.inner if which == "obstacle" else grid.outer
    speed = np.hypot(radius(grid.theta), radius(grid.theta, 1))
    return float(np.sum(g_values * speed) * grid.h_theta)


def _boundary_index(which: str) -> int:
    if which not in ("obstacle", "outer"):
        raise ValueError(f"unknown boundary {which!r}")
    return 0 if which == "obstacle" else -1


def boundary_trace(v: VectorField, which: str = "obstacle"):
    """(v . tau, v . n) at the boundary nodes in the curve's own (tau, n) frame."""
    j = _boundary_index(which)
    tau, n, _ = v.grid.boundary_frame(which)
    v1, v2 = v.values[0][:, j], v.values[1][:, j]
    return v1 * tau[0] + v2 * tau[1], v1 * n[0] + v2 * n[1]


def normal_derivative(phi: ScalarField, which: str = "obstacle"):
    """d phi / dn at the boundary nodes (one-sided differences in xi)."""
    g = gradient(phi).values
    j = _boundary_index(which)
    _, n, _ = phi.grid.boundary_frame(which)
    return g[0][:, j] * n[0] + g[1][:, j] * n[1]


def dump_csv(path, grid: CurvilinearGrid, fields: dict) -> None:
    """Write nodal fields as theta_index, sigma_index, x1, x2, <field columns>."""
    names, cols = [], []
    for name, fld in fields.items():
        vals = fld.values if isinstance(fld, (ScalarField, VectorField)) else np.asarray(fld)
        if vals.ndim == 3:
            names += [f"{name}_1", f"{name}_2"]
            cols += [vals[0], vals[1]]
        else:
            names.append(name)
            cols.append(vals)
    ti, si = np.meshgrid(np.arange(grid.n_theta), np.arange(grid.n_sigma), indexing="ij")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta_index", "sigma_index", "x1", "x2"] + names)
        for row in zip(ti.ravel(), si.ravel(), grid.x.ravel(), grid.y.ravel(),
                       *[c.ravel() for c in cols]):
            w.writerow([row[0], row[1]] + [f"{v:.17g}" for v in row[2:]])
