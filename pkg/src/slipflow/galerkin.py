"""Galerkin discretization of the stream-function problem on Omega_R.

Trial and test functions are tensor products of periodic cubic B-splines in
theta and clamped cubic B-splines in xi with the two end functions removed,
so every basis function vanishes on the obstacle and on the outer circle while
its normal derivative stays free.  The basis is orthonormalized in the
``int grad^2 w_i : grad^2 w_j`` inner product by a Cholesky factorization of the
Gram matrix (the same triangular change of basis that Gram-Schmidt produces).

For ``phi = sum c_j w_j``, ``v = grad_perp(phi) + v0t`` and
``alpha = Lap(phi) + rot(v0t)``, the residual map is

    P_i = int (v . grad w_i) alpha + nu int alpha Lap(w_i)
          + nu oint_obstacle ((2 chi - f/nu) v.tau + b) dw_i/dn
          - int F . grad_perp(w_i)

with ``n`` pointing from the obstacle into the fluid.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg, sparse
from scipy.interpolate import BSpline

from .geometry import TWO_PI, circle
from .grid import (CurvilinearGrid, FunctionSample, MapJet, QuadratureRule, ScalarField,
                   VectorField, gauss_on_breaks, inverse_stretch, map_jet, merge_breaks)

_CARDINAL = BSpline.basis_element(np.arange(5.0), extrapolate=False)
_CARDINAL_D = [_CARDINAL] + [_CARDINAL.derivative(k) for k in (1, 2, 3)]


class BasisError(ValueError):
    """The requested basis cannot be built on this grid."""


class NonConvergenceError(RuntimeError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


# --------------------------------------------------------------------------
# one-dimensional factors
# --------------------------------------------------------------------------
def periodic_bspline(theta, n: int, deriv: int = 0) -> np.ndarray:
    """Values (len(theta), n) of the n periodic cubic B-splines on uniform knots."""
    theta = np.mod(np.asarray(theta, float), TWO_PI)
    h = TWO_PI / n
    u = theta[:, None] / h - np.arange(n)[None, :]
    out = np.zeros(u.shape)
    lo = int(np.floor(-4.0 / n)) - 1
    for j in range(lo, 2 + int(np.ceil(4.0 / n))):
        uu = u + j * n
        vals = _CARDINAL_D[deriv](np.where((uu >= 0) & (uu < 4), uu, 0.5))
        out += np.where((uu >= 0) & (uu < 4), np.nan_to_num(vals), 0.0)
    return out / h ** deriv


def clamped_knots(n_modes: int) -> np.ndarray:
    m = max(n_modes - 1, 1)
    inner = np.linspace(0.0, 1.0, m + 1)
    return np.concatenate([[0.0] * 3, inner, [1.0] * 3])


def clamped_bspline(xi, n_modes: int, deriv: int = 0) -> np.ndarray:
    """Clamped cubic B-splines on [0, 1] without the two end functions."""
    t = clamped_knots(n_modes)
    n_all = len(t) - 4
    spl = BSpline(t, np.eye(n_all), 3, extrapolate=False)
    if deriv:
        spl = spl.derivative(deriv)
    vals = np.nan_to_num(spl(np.clip(np.asarray(xi, float), 0.0, 1.0)))
    inner = vals[:, 1:-1]
    if n_modes == 1:
        inner = inner.sum(axis=1, keepdims=True)
    return inner


def _factor_matrices(theta, xi, n_t, n_s, order):
    T = [sparse.csr_matrix(periodic_bspline(theta, n_t, d)) for d in range(order + 1)]
    S = [sparse.csr_matrix(clamped_bspline(xi, n_s, d)) for d in range(order + 1)]
    return T, S


def _cartesian_design(jet: MapJet, T, S, order: int, grid_shape=None) -> dict:
    """Sparse design matrices of Cartesian derivatives, keyed by (nx, ny)."""
    comp = {}
    for n in range(order + 1):
        for i in range(n, -1, -1):
            comp[(i, n - i)] = sparse.kron(T[i], S[n - i], format="csr")
    ones = np.ones(jet.x.shape)
    zero = np.zeros(jet.x.shape)
    keys = [k for k in comp if sum(k) >= 1]
    out = {(0, 0): comp[(0, 0)]}
    coef = {}
    for key in keys:
        unit = {k: (ones if k == key else zero) for k in comp}
        unit[(0, 0)] = zero
        coef[key] = jet.cartesian(unit, order)
    targets = [t for t in coef[keys[0]] if t != (0, 0)]
    for tgt in targets:
        mat = None
        for key in keys:
            c = coef[key][tgt].ravel()
            if not np.any(c):
                continue
            term = sparse.diags(c) @ comp[key]
            mat = term if mat is None else mat + term
        out[tgt] = mat.tocsr()
    return out


# --------------------------------------------------------------------------
# basis
# --------------------------------------------------------------------------
@dataclass
class GalerkinBasis:
    grid: CurvilinearGrid
    n_theta_modes: int
    n_sigma_modes: int
    rule: QuadratureRule
    design: dict
    boundary_rule_theta: np.ndarray
    boundary_weights: np.ndarray
    boundary_dn: sparse.csr_matrix
    gram: np.ndarray
    chol: np.ndarray

    @property
    def size(self) -> int:
        return self.n_theta_modes * self.n_sigma_modes

    @property
    def theta_knots(self):
        return TWO_PI * np.arange(self.n_theta_modes + 1) / self.n_theta_modes

    @property
    def xi_knots(self):
        return np.unique(clamped_knots(self.n_sigma_modes))

    def to_raw(self, c):
        """Orthonormal coefficients -> B-spline coefficients."""
        return linalg.solve_triangular(self.chol, np.asarray(c, float), lower=True, trans="T")

    def to_orthonormal(self, a):
        return self.chol.T @ np.asarray(a, float)

    def orthonormal_gram(self) -> np.ndarray:
        Li = linalg.solve_triangular(self.chol, np.eye(self.size), lower=True)
        return Li @ self.gram @ Li.T

    def evaluate(self, a, theta, xi, order: int = 2, jet: MapJet | None = None) -> dict:
        """Cartesian derivatives of sum a_i w_i at (theta, xi) points (raw coefficients)."""
        theta = np.asarray(theta, float)
        xi = np.asarray(xi, float)
        if jet is None:
            jet = map_jet(self.grid.inner, self.grid.outer, self.grid.stretch, theta, xi,
                          order=max(order, 2))
        A = np.asarray(a, float).reshape(self.n_theta_modes, self.n_sigma_modes)
        comp = {}
        tf = theta.ravel()
        xf = xi.ravel()
        for n in range(order + 1):
            for i in range(n, -1, -1):
                Tm = periodic_bspline(tf, self.n_theta_modes, i)
                Sm = clamped_bspline(xf, self.n_sigma_modes, n - i)
                comp[(i, n - i)] = np.einsum("pk,kl,pl->p", Tm, A, Sm).reshape(theta.shape)
        if order == 0:
            return {(0, 0): comp[(0, 0)]}
        return jet.cartesian(comp, order)

    def evaluate_at(self, a, x, y, order: int = 2) -> dict:
        theta, xi = self.grid.to_computational(x, y)
        if np.any(np.isnan(xi)):
            raise ValueError("evaluation point outside Omega_R")
        return self.evaluate(a, theta, xi, order)

    def sample(self, c) -> FunctionSample:
        """phi = sum c_j w_j (orthonormal coefficients) as a FunctionSample on the basis rule."""
        a = self.to_raw(c)
        d = {k: (m @ a).reshape(self.rule.shape) for k, m in self.design.items()}
        trace = self.evaluate(a, self.rule.theta, np.zeros_like(self.rule.theta), order=0)[(0, 0)]
        return FunctionSample(self.rule, d, trace)


def basis_rule(grid: CurvilinearGrid, n_theta_modes: int, n_sigma_modes: int,
               quad_order: int = 6, subdivide: int = 2, extra_xi=(), jet_order: int = 3,
               extra_theta=()) -> QuadratureRule:
    tk = TWO_PI * np.arange(n_theta_modes + 1) / n_theta_modes
    xk = np.unique(clamped_knots(n_sigma_modes))
    tb = np.concatenate([np.linspace(tk[i], tk[i + 1], subdivide + 1) for i in range(len(tk) - 1)])
    xb = np.concatenate([np.linspace(xk[i], xk[i + 1], subdivide + 1) for i in range(len(xk) - 1)])
    tb = merge_breaks(tb, np.mod(np.asarray(extra_theta, float), TWO_PI), [TWO_PI])
    xb = merge_breaks(xb, np.clip(np.asarray(extra_xi, float), 0.0, 1.0))
    tq, wt = gauss_on_breaks(tb, quad_order)
    xq, wx = gauss_on_breaks(xb, quad_order)
    T, X = np.meshgrid(tq, xq, indexing="ij")
    jet = map_jet(grid.inner, grid.outer, grid.stretch, T, X, order=jet_order)
    return QuadratureRule(grid, tq, wt, xq, wx, jet)


def layer_breaks(grid: CurvilinearGrid, width: float, n: int = 8) -> np.ndarray:
    """xi levels resolving a boundary layer of the given physical width."""
    if width <= 0:
        return np.array([])
    theta = np.linspace(0, TWO_PI, 64, endpoint=False)
    rin, rout = grid.inner(theta), grid.outer(theta)
    sig = np.clip(width / np.min(rout - rin), 0.0, 1.0)
    levels = sig * np.geomspace(1e-3, 1.5, n)
    return inverse_stretch(np.clip(levels, 0.0, 1.0), grid.stretch)


def build_basis(grid: CurvilinearGrid, n_theta_modes: int, n_sigma_modes: int,
                quad_order: int = 6, subdivide: int = 2, extra_xi=(), jet_order: int = 3,
                extra_theta=()) -> GalerkinBasis:
    if n_theta_modes < 1 or n_sigma_modes < 1:
        raise BasisError("need at least one mode in each direction")
    rule = basis_rule(grid, n_theta_modes, n_sigma_modes, quad_order, subdivide, extra_xi, jet_order,
                      extra_theta)
    T, S = _factor_matrices(rule.theta, rule.xi, n_theta_modes, n_sigma_modes, jet_order)
    design = _cartesian_design(rule.jet, T, S, jet_order)
    W = sparse.diags(rule.weights.ravel())
    hxx, hxy, hyy = design[(2, 0)], design[(1, 1)], design[(0, 2)]
    gram = (hxx.T @ W @ hxx + 2 * (hxy.T @ W @ hxy) + hyy.T @ W @ hyy).toarray()
    gram = 0.5 * (gram + gram.T)
    try:
        chol = linalg.cholesky(gram, lower=True)
    except linalg.LinAlgError as exc:
        raise BasisError("Gram matrix is not positive definite; raise quadrature resolution") from exc
    if np.min(np.diag(chol)) ** 2 < 1e-13 * np.max(np.diag(gram)):
        raise BasisError("Gram matrix is numerically rank deficient")
    # boundary data: d w / d n on the obstacle at Gauss points in theta
    tb = rule.theta
    jb = map_jet(grid.inner, grid.outer, grid.stretch, tb, np.zeros_like(tb), order=2)
    Tb = [sparse.csr_matrix(periodic_bspline(tb, n_theta_modes, d)) for d in (0, 1)]
    Sb = [sparse.csr_matrix(clamped_bspline(np.zeros(1), n_sigma_modes, d)) for d in (0, 1)]
    g_t = sparse.kron(Tb[1], Sb[0])
    g_x = sparse.kron(Tb[0], Sb[1])
    _, n, _ = grid.boundary_frame("obstacle", tb)
    cx = jb.A1[0, 0] * n[0] + jb.A1[0, 1] * n[1]
    cxi = jb.A1[1, 0] * n[0] + jb.A1[1, 1] * n[1]
    dn = (sparse.diags(cx) @ g_t + sparse.diags(cxi) @ g_x).tocsr()
    return GalerkinBasis(grid, n_theta_modes, n_sigma_modes, rule, design, tb,
                         rule.boundary_weights("obstacle"), dn, gram, chol)


# --------------------------------------------------------------------------
# data and assembly
# --------------------------------------------------------------------------
def _zero_field(x, y):
    return np.zeros_like(x), np.zeros_like(x)


def _zero_boundary(theta):
    return np.zeros_like(theta)


@dataclass
class GalerkinData:
    """Physical data: viscosity, friction, boundary datum b(theta), body force F(x, y), extension."""

    nu: float
    friction: float = 0.0
    b: Callable = _zero_boundary
    F: Callable = _zero_field
    extension: object | None = None
    include_boundary_term: bool = True

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"viscosity nu must be positive, got {self.nu}")
        if self.friction < 0:
            raise ValueError(f"friction f must be non-negative, got {self.friction}")


@dataclass
class Assembly:
    """Everything P needs at the quadrature points, precomputed once per (basis, data)."""

    basis: GalerkinBasis
    data: GalerkinData
    w: np.ndarray
    v0: np.ndarray
    omega0: np.ndarray
    load: np.ndarray
    chi: np.ndarray
    b_vals: np.ndarray
    wb: np.ndarray


def prepare(basis: GalerkinBasis, data: GalerkinData) -> Assembly:
    rule = basis.rule
    x, y = rule.jet.x.ravel(), rule.jet.y.ravel()
    w = rule.weights.ravel()
    if data.extension is not None:
        v0 = np.asarray(data.extension.velocity(x, y))
        omega0 = np.asarray(data.extension.vorticity(x, y))
    else:
        v0 = np.zeros((2, x.size))
        omega0 = np.zeros(x.size)
    F1, F2 = data.F(x, y)
    F1 = np.broadcast_to(F1, x.shape)
    F2 = np.broadcast_to(F2, x.shape)
    D = basis.design
    # grad_perp w = (-w_y, w_x)
    load = -(D[(0, 1)].T @ (-w * F1) + D[(1, 0)].T @ (w * F2))
    _, _, chi = basis.grid.boundary_frame("obstacle", basis.boundary_rule_theta)
    b_vals = np.asarray(data.b(basis.boundary_rule_theta), float) * np.ones_like(chi)
    return Assembly(basis, data, w, v0, omega0, np.asarray(load), chi, b_vals,
                    basis.boundary_weights)


def _fields(asm: Assembly, a):
    D = asm.basis.design
    px, py = D[(1, 0)] @ a, D[(0, 1)] @ a
    lap = D[(2, 0)] @ a + D[(0, 2)] @ a
    v1 = -py + asm.v0[0]
    v2 = px + asm.v0[1]
    alpha = lap + asm.omega0
    return v1, v2, alpha


def residual_raw(asm: Assembly, a, nu: float | None = None) -> np.ndarray:
    """P in the raw B-spline basis (entries tested against w_i)."""
    nu = asm.data.nu if nu is None else nu
    D = asm.basis.design
    w = asm.w
    v1, v2, alpha = _fields(asm, a)
    conv = D[(1, 0)].T @ (w * v1 * alpha) + D[(0, 1)].T @ (w * v2 * alpha)
    visc = nu * (D[(2, 0)].T @ (w * alpha) + D[(0, 2)].T @ (w * alpha))
    out = conv + visc + asm.load
    if asm.data.include_boundary_term:
        dn = asm.basis.boundary_dn
        kappa = 2.0 * asm.chi - asm.data.friction / nu
        vt = dn @ a  # v . tau = d phi / dn on the obstacle; v0t vanishes there
        out = out + nu * (dn.T @ (asm.wb * (kappa * vt + asm.b_vals)))
    return np.asarray(out)


def jacobian_raw(asm: Assembly, a, nu: float | None = None) -> np.ndarray:
    nu = asm.data.nu if nu is None else nu
    D = asm.basis.design
    w = asm.w
    v1, v2, alpha = _fields(asm, a)
    Dx, Dy = D[(1, 0)], D[(0, 1)]
    Lap = D[(2, 0)] + D[(0, 2)]
    wa = sparse.diags(w * alpha)
    J = Dx.T @ wa @ (-Dy) + Dy.T @ wa @ Dx
    J = J + (Dx.T @ sparse.diags(w * v1) + Dy.T @ sparse.diags(w * v2)) @ Lap
    J = J + nu * (Lap.T @ sparse.diags(w) @ Lap)
    J = J.toarray()
    if asm.data.include_boundary_term:
        dn = asm.basis.boundary_dn
        kappa = 2.0 * asm.chi - asm.data.friction / nu
        J = J + nu * (dn.T @ sparse.diags(asm.wb * kappa) @ dn).toarray()
    return J


def residual(asm: Assembly, c, nu: float | None = None) -> np.ndarray:
    """P in the orthonormal basis: P_j = P(phi) tested against the orthonormal w_j."""
    b = asm.basis
    return linalg.solve_triangular(b.chol, residual_raw(asm, b.to_raw(c), nu), lower=True)


def assemble_P(c, basis: GalerkinBasis, data: GalerkinData) -> np.ndarray:
    return residual(prepare(basis, data), c)


def _residual_from_derivs(asm: Assembly, px, py, lap, dn_phi, nu: float) -> np.ndarray:
    """Raw residual on asm.basis for a stream function given by its derivatives there."""
    D = asm.basis.design
    w = asm.w
    v1 = -py + asm.v0[0]
    v2 = px + asm.v0[1]
    alpha = lap + asm.omega0
    out = D[(1, 0)].T @ (w * v1 * alpha) + D[(0, 1)].T @ (w * v2 * alpha)
    out = out + nu * ((D[(2, 0)] + D[(0, 2)]).T @ (w * alpha)) + asm.load
    if asm.data.include_boundary_term:
        kappa = 2.0 * asm.chi - asm.data.friction / nu
        out = out + nu * (asm.basis.boundary_dn.T @ (asm.wb * (kappa * dn_phi + asm.b_vals)))
    return np.asarray(out)


# --------------------------------------------------------------------------
# solver
# --------------------------------------------------------------------------
@dataclass
class SolverOptions:
    tol: float = 1e-9
    max_newton: int = 40
    damping: float = 1.0
    continuation_ratio: float = 0.5
    nu_start: float | None = None
    max_picard: int = 30
    max_continuation: int = 40


@dataclass
class GalerkinState:
    """Orthonormal coefficients c, residual P(c), iteration log and the viscosity reached."""

    coefficients: np.ndarray
    residual: np.ndarray
    nu: float
    converged: bool
    history: list = field(default_factory=list)

    @property
    def norm(self) -> float:
        """||grad^2 phi||_{L2(Omega_R)}, equal to |c| for the orthonormal basis."""
        return float(np.linalg.norm(self.coefficients))

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residual))

    @property
    def iterations(self) -> int:
        return len(self.history)


def _ortho_jac(asm, c, nu):
    b = asm.basis
    J = jacobian_raw(asm, b.to_raw(c), nu)
    Li_J = linalg.solve_triangular(b.chol, J, lower=True)
    return linalg.solve_triangular(b.chol, Li_J.T, lower=True).T


def _picard_jac(asm, c, nu):
    b = asm.basis
    D = b.design
    v1, v2, _ = _fields(asm, b.to_raw(c))
    Dx, Dy = D[(1, 0)], D[(0, 1)]
    Lap = D[(2, 0)] + D[(0, 2)]
    w = asm.w
    J = (Dx.T @ sparse.diags(w * v1) + Dy.T @ sparse.diags(w * v2)) @ Lap
    J = (J + nu * (Lap.T @ sparse.diags(w) @ Lap)).toarray()
    if asm.data.include_boundary_term:
        dn = b.boundary_dn
        kappa = 2.0 * asm.chi - asm.data.friction / nu
        J = J + nu * (dn.T @ sparse.diags(asm.wb * kappa) @ dn).toarray()
    Li_J = linalg.solve_triangular(b.chol, J, lower=True)
    return linalg.solve_triangular(b.chol, Li_J.T, lower=True).T


def _iterate(asm, c, nu, threshold, opts, history, method):
    """Damped Newton (or Picard) with backtracking on ||P||; returns (c, converged)."""
    jac = _ortho_jac if method == "newton" else _picard_jac
    max_it = opts.max_newton if method == "newton" else opts.max_picard
    r = residual(asm, c, nu)
    for _ in range(max_it):
        rn = float(np.linalg.norm(r))
        history.append({"method": method, "nu": nu, "residual": rn})
        if rn <= threshold:
            return c, True
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", linalg.LinAlgWarning)
                step = linalg.solve(jac(asm, c, nu), -r, assume_a="gen")
        except linalg.LinAlgError:
            return c, False
        t = opts.damping
        accepted = False
        while t >= 1.0 / 1024:
            trial = c + t * step
            rt = residual(asm, trial, nu)
            if np.linalg.norm(rt) < (1.0 - 1e-4 * t) * rn:
                c, r, accepted = trial, rt, True
                break
            t *= 0.5
        if not accepted:
            return c, False
    rn = float(np.linalg.norm(r))
    history.append({"method": method, "nu": nu, "residual": rn})
    return c, rn <= threshold


def solve(basis: GalerkinBasis, data: GalerkinData, options: SolverOptions | None = None,
          c0=None) -> GalerkinState:
    """Find c with P(c) = 0: Newton, then Picard-preconditioned Newton, then viscosity continuation."""
    opts = options or SolverOptions()
    asm = prepare(basis, data)
    nu = data.nu
    c = np.zeros(basis.size) if c0 is None else np.asarray(c0, float).copy()
    ref = float(np.linalg.norm(residual(asm, np.zeros(basis.size), nu)))
    threshold = opts.tol * ref + 1e-14
    history: list = []

    c1, ok = _iterate(asm, c, nu, threshold, opts, history, "newton")
    if not ok:
        c2, _ = _iterate(asm, c, nu, threshold, opts, history, "picard")
        c1, ok = _iterate(asm, c2, nu, threshold, opts, history, "newton")
    if ok:
        return GalerkinState(c1, residual(asm, c1, nu), nu, True, history)

    # continuation: find a viscosity where Newton converges, then march down
    nu_k = opts.nu_start if opts.nu_start else 2.0 * nu
    c_k = np.zeros(basis.size)
    for _ in range(opts.max_continuation):
        thr = opts.tol * float(np.linalg.norm(residual(asm, np.zeros(basis.size), nu_k))) + 1e-14
        c_k, ok = _iterate(asm, np.zeros(basis.size), nu_k, thr, opts, history, "newton")
        if ok:
            break
        nu_k *= 2.0
    if not ok:
        state = GalerkinState(c_k, residual(asm, c_k, nu_k), nu_k, False, history)
        raise NonConvergenceError(f"no converged start found up to nu = {nu_k:.3g}", state)
    ratio = opts.continuation_ratio
    for _ in range(opts.max_continuation):
        if nu_k <= nu:
            break
        nu_next = max(nu, nu_k * ratio)
        thr = opts.tol * float(np.linalg.norm(residual(asm, np.zeros(basis.size), nu_next))) + 1e-14
        c_next, ok = _iterate(asm, c_k, nu_next, thr, opts, history, "newton")
        if ok:
            c_k, nu_k = c_next, nu_next
        else:
            ratio = np.sqrt(ratio)
            if ratio > 0.99:
                break
    if nu_k > nu or not ok:
        state = GalerkinState(c_k, residual(asm, c_k, nu_k), nu_k, False, history)
        raise NonConvergenceError(f"continuation stalled at nu = {nu_k:.3g}", state)
    return GalerkinState(c_k, residual(asm, c_k, nu), nu, True, history)


# --------------------------------------------------------------------------
# post-processing
# --------------------------------------------------------------------------
def reconstruct(state: GalerkinState, basis: GalerkinBasis, extension=None,
                grid: CurvilinearGrid | None = None) -> dict:
    """phi, v = grad_perp(phi) + v0t and alpha = Lap(phi) + rot(v0t) at the grid nodes."""
    grid = basis.grid if grid is None else grid
    T, X = np.meshgrid(grid.theta, grid.xi, indexing="ij")
    d = basis.evaluate(basis.to_raw(state.coefficients), T, X, order=2, jet=grid.jet)
    v1, v2 = -d[(0, 1)], d[(1, 0)].copy()
    alpha = d[(2, 0)] + d[(0, 2)]
    if extension is not None:
        w = extension.velocity(grid.x, grid.y)
        v1, v2 = v1 + w[0], v2 + w[1]
        alpha = alpha + extension.vorticity(grid.x, grid.y)
    return {"phi": ScalarField(grid, d[(0, 0)]),
            "v": VectorField(grid, np.stack([v1, v2])),
            "alpha": ScalarField(grid, alpha)}


def velocity_at(state: GalerkinState, basis: GalerkinBasis, x, y, extension=None):
    d = basis.evaluate_at(basis.to_raw(state.coefficients), x, y, order=1)
    v = np.stack([-d[(0, 1)], d[(1, 0)]])
    if extension is not None:
        v = v + np.asarray(extension.velocity(x, y))
    return v


def positivity_probe(basis: GalerkinBasis, data: GalerkinData, k: float, radii=(2.0, 4.0),
                     n_samples: int = 16, seed: int = 0) -> dict:
    """(P(phi), phi) on random spheres |c| = r k."""
    asm = prepare(basis, data)
    rng = np.random.default_rng(seed)
    out = {}
    for r in radii:
        vals = []
        for _ in range(n_samples):
            c = rng.standard_normal(basis.size)
            c *= r * k / np.linalg.norm(c)
            vals.append(float(residual(asm, c) @ c))
        out[float(r)] = vals
    min_val = min(min(v) for v in out.values())
    return {"k": float(k), "values": out, "min": min_val, "pass": bool(min_val > 0)}


def independent_basis(trial: GalerkinBasis, n_theta_modes: int, n_sigma_modes: int,
               quad_order: int = 6) -> GalerkinBasis:
    """An independent basis whose quadrature also breaks at the trial knots.

    Trial fields are only piecewise smooth across their own knots, so a rule that
    ignores those breaks would add an O(h) quadrature error to the weak residual.
    """
    return build_basis(trial.grid, n_theta_modes, n_sigma_modes, quad_order=quad_order,
                       extra_xi=trial.xi_knots,
                       extra_theta=trial.theta_knots)


def weak_residual(state: GalerkinState, basis: GalerkinBasis, data: GalerkinData,
                  test_basis: GalerkinBasis) -> float:
    """|P| of the solution tested against an independent (orthonormal) test basis, relative to the load."""
    asm = prepare(test_basis, data)
    rule = test_basis.rule
    T, X = np.meshgrid(rule.theta, rule.xi, indexing="ij")
    a = basis.to_raw(state.coefficients)
    d = basis.evaluate(a, T, X, order=2, jet=rule.jet)
    jb = map_jet(basis.grid.inner, basis.grid.outer, basis.grid.stretch, test_basis.boundary_rule_theta,
                 np.zeros_like(test_basis.boundary_rule_theta), order=2)
    db = basis.evaluate(a, test_basis.boundary_rule_theta, np.zeros_like(test_basis.boundary_rule_theta),
                        order=1, jet=jb)
    _, n, _ = test_basis.grid.boundary_frame("obstacle", test_basis.boundary_rule_theta)
    dn_phi = db[(1, 0)] * n[0] + db[(0, 1)] * n[1]
    raw = _residual_from_derivs(asm, d[(1, 0)].ravel(), d[(0, 1)].ravel(),
                                (d[(2, 0)] + d[(0, 2)]).ravel(), dn_phi, data.nu)
    p = linalg.solve_triangular(test_basis.chol, raw, lower=True)
    ref = linalg.solve_triangular(test_basis.chol, asm.load, lower=True)
    return float(np.linalg.norm(p) / max(np.linalg.norm(ref), 1e-300))


def _grad_diff(b1: GalerkinBasis, s1: GalerkinState, b2: GalerkinBasis, s2: GalerkinState,
               rule: QuadratureRule) -> float:
    T, X = np.meshgrid(rule.theta, rule.xi, indexing="ij")
    d1 = b1.evaluate(b1.to_raw(s1.coefficients), T, X, order=1, jet=rule.jet)
    d2 = b2.evaluate(b2.to_raw(s2.coefficients), T, X, order=1, jet=rule.jet)
    e = (d1[(1, 0)] - d2[(1, 0)]) ** 2 + (d1[(0, 1)] - d2[(0, 1)]) ** 2
    return float(np.sqrt(rule.integrate(e)))


def interior_rule(grid: CurvilinearGrid, radius: float, n_theta: int = 64, n_xi: int = 16,
                  order: int = 4) -> QuadratureRule:
    """Quadrature on {obstacle < r < radius} (an unstretched blend to the circle of that radius)."""
    sub = CurvilinearGrid(grid.inner, radius, max(n_theta, 8), max(n_xi, 8), quad_order=order)
    return sub.quad


def refine_study(grid_factory, data_factory, modes_sequence, R_sequence=(), R_modes=None,
                 options: SolverOptions | None = None, interior_radius: float = 2.0,
                 basis_kwargs: dict | None = None) -> dict:
    """N-refinement on a fixed Omega_R and R-sensitivity of the interior solution.

    ``grid_factory(R)`` builds a grid (``R=None`` for the default truncation);
    ``data_factory(grid)`` builds GalerkinData on it.
    """
    basis_kwargs = basis_kwargs or {}
    report = {"N": [], "modes": [], "norm": [], "residual": [], "iterations": [],
              "grad_diff": [], "R": [], "interior_change": [], "failed": []}
    grid = grid_factory(None)
    data = data_factory(grid)
    solved = []
    for nt, ns in modes_sequence:
        try:
            b = build_basis(grid, nt, ns, **basis_kwargs)
            s = solve(b, data, options)
        except (NonConvergenceError, BasisError) as exc:
            report["failed"].append({"modes": [nt, ns], "error": str(exc)})
            continue
        solved.append((b, s))
        report["N"].append(b.size)
        report["modes"].append([nt, ns])
        report["norm"].append(s.norm)
        report["residual"].append(s.residual_norm)
        report["iterations"].append(s.iterations)
    if solved:
        fine = solved[-1][0].rule
        for (b1, s1), (b2, s2) in zip(solved[:-1], solved[1:]):
            report["grad_diff"].append(_grad_diff(b1, s1, b2, s2, fine))
    if R_sequence:
        nt, ns = R_modes or modes_sequence[-1]
        fields = []
        rule0 = None
        for R in R_sequence:
            g = grid_factory(R)
            d = data_factory(g)
            try:
                b = build_basis(g, nt, ns, **basis_kwargs)
                s = solve(b, d, options)
            except (NonConvergenceError, BasisError) as exc:
                report["failed"].append({"R": R, "error": str(exc)})
                continue
            if rule0 is None:
                rule0 = interior_rule(g, interior_radius)
            v = velocity_at(s, b, rule0.jet.x, rule0.jet.y, d.extension)
            fields.append(v)
            report["R"].append(float(R))
        for v1, v2 in zip(fields[:-1], fields[1:]):
            num = np.sqrt(rule0.integrate(np.sum((v1 - v2) ** 2, axis=0)))
            den = np.sqrt(rule0.integrate(np.sum(v2 ** 2, axis=0)))
            report["interior_change"].append(float(num / den) if den > 0 else float(num))
    report["partial"] = bool(report["failed"])
    return report


__all__ = [
    "BasisError", "NonConvergenceError", "GalerkinBasis", "GalerkinData", "GalerkinState",
    "SolverOptions", "build_basis", "prepare", "assemble_P", "residual", "residual_raw",
    "jacobian_raw", "solve", "reconstruct", "velocity_at", "positivity_probe",
    "weak_residual", "independent_basis", "refine_study", "interior_coefficients", "compact_coefficients",
    "manufactured_data", "interior_rule", "layer_breaks", "periodic_bspline",
    "clamped_bspline",
]


def manufactured_data(basis: GalerkinBasis, a_star, nu: float, friction: float = 0.0,
                      include_boundary_term: bool = True) -> GalerkinData:
    """Data (F, b) for which phi* = sum a*_i w_i solves the problem exactly (no extension field).

    F = alpha (-v2, v1) - nu grad_perp(alpha) reproduces the vorticity equation and b closes
    the slip condition.  phi* must vanish near the outer circle so that alpha = 0 there.
    """
    a_star = np.asarray(a_star, float)
    grid = basis.grid

    def F(x, y):
        d = basis.evaluate_at(a_star, x, y, order=3)
        alpha = d[(2, 0)] + d[(0, 2)]
        ax = d[(3, 0)] + d[(1, 2)]
        ay = d[(2, 1)] + d[(0, 3)]
        v1, v2 = -d[(0, 1)], d[(1, 0)]
        return -alpha * v2 + nu * ay, alpha * v1 - nu * ax

    def b(theta):
        theta = np.asarray(theta, float)
        d = basis.evaluate(a_star, theta, np.zeros_like(theta), order=2)
        _, n, chi = grid.boundary_frame("obstacle", theta)
        dn = d[(1, 0)] * n[0] + d[(0, 1)] * n[1]
        return d[(2, 0)] + d[(0, 2)] - (2 * chi - friction / nu) * dn

    return GalerkinData(nu=nu, friction=friction, b=b, F=F,
                        include_boundary_term=include_boundary_term)


def interior_coefficients(basis: GalerkinBasis, rng, scale: float = 1.0) -> np.ndarray:
    """Random raw coefficients whose xi-support stays off the last knot interval."""
    A = rng.standard_normal((basis.n_theta_modes, basis.n_sigma_modes)) * scale
    A[:, max(basis.n_sigma_modes - 3, 0):] = 0.0
    return A.ravel()


def compact_coefficients(basis: GalerkinBasis, rng, scale: float = 1.0) -> np.ndarray:
    """Random raw coefficients with phi = d_n phi = 0 on the obstacle and support off R.

    Only the first kept xi-function has a nonzero slope at xi = 0, so dropping it
    (and the last three) leaves combinations in the closure of compactly supported
    functions.
    """
    if basis.n_sigma_modes < 5:
        raise BasisError("compactly supported samples need n_sigma_modes >= 5")
    A = interior_coefficients(basis, rng, scale).reshape(basis.n_theta_modes, basis.n_sigma_modes)
    A[:, 0] = 0.0
    return A.ravel()
