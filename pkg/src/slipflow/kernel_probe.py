"""Kernel function of the rot-div system on a doubly connected domain.

Psi is harmonic between an inner curve Gamma1 (Psi = 0) and an outer curve
Gamma2 (Psi = 1).  Any divergence-free, curl-free field tangent to both
components is a multiple of grad_perp(Psi); a slip condition then forces
``(2 chi - f/nu) dPsi/dn = 0`` on the boundary, and the probe reports whether
that can hold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .geometry import RadiusFunction, circle
from .grid import CurvilinearGrid, ScalarField, gradient


class KernelSolveError(RuntimeError):
    pass


@dataclass
class AnnularDomain:
    inner: RadiusFunction
    outer: RadiusFunction
    n_theta: int = 128
    n_sigma: int = 128

    def __post_init__(self):
        if isinstance(self.outer, (int, float)):
            self.outer = circle(float(self.outer))
        if isinstance(self.inner, (int, float)):
            self.inner = circle(float(self.inner))
        th = np.linspace(0, 2 * np.pi, 1024, endpoint=False)
        if np.any(self.outer(th) <= self.inner(th)):
            raise ValueError("Gamma2 must enclose Gamma1 without touching it")
        self.grid = CurvilinearGrid(self.inner, self.outer, self.n_theta, self.n_sigma)


def laplacian_matrix(grid: CurvilinearGrid) -> sparse.csr_matrix:
    """Sparse nodal Laplacian (fourth-order differences mapped through the grid metric)."""
    nt, ns = grid.shape
    It, Is = sparse.identity(nt), sparse.identity(ns)
    Dt, Dtt = sparse.kron(grid.D1t, Is), sparse.kron(grid.D2t, Is)
    Dx, Dxx = sparse.kron(It, grid.D1x), sparse.kron(It, grid.D2x)
    ops = {(1, 0): Dt, (0, 1): Dx, (2, 0): Dtt, (1, 1): Dx @ Dt, (0, 2): Dxx}
    one, zero = np.ones(grid.shape), np.zeros(grid.shape)
    L = sparse.csr_matrix((nt * ns, nt * ns))
    for key, op in ops.items():
        unit = {k: (one if k == key else zero) for k in ops}
        d = grid.jet.cartesian(unit, 2)
        coef = (d[(2, 0)] + d[(0, 2)]).ravel()
        L = L + sparse.diags(coef) @ op
    return L.tocsr()


def solve_kernel_Psi(domain: AnnularDomain) -> ScalarField:
    g = domain.grid
    nt, ns = g.shape
    L = laplacian_matrix(g).tolil()
    rhs = np.zeros(nt * ns)
    idx = np.arange(nt * ns).reshape(nt, ns)
    for j, value in ((0, 0.0), (ns - 1, 1.0)):
        rows = idx[:, j]
        for r in rows:
            L.rows[r] = [r]
            L.data[r] = [1.0]
        rhs[rows] = value
    A = L.tocsc()
    try:
        sol = splinalg.spsolve(A, rhs)
    except RuntimeError as exc:
        raise KernelSolveError(f"sparse solve failed: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        cond = splinalg.onenormest(A)
        raise KernelSolveError(f"sparse solve produced non-finite values (||A||_1 ~ {cond:.3e})")
    return ScalarField(g, sol.reshape(nt, ns))


def normal_derivative_profile(psi: ScalarField) -> dict:
    """dPsi/dn with n pointing into the domain, on Gamma1 and Gamma2, plus outward-normal values."""
    grad = gradient(psi).values
    g = psi.grid
    out = {}
    for name, which, j, sign in (("gamma1", "obstacle", 0, 1.0), ("gamma2", "outer", -1, -1.0)):
        _, n, chi = g.boundary_frame(which)
        radial = grad[0][:, j] * n[0] + grad[1][:, j] * n[1]
        out[name] = {"theta": g.theta, "dpsi_dn": sign * radial, "dpsi_dn_outward": -sign * radial,
                     "chi": chi, "flux": float(np.sum(sign * radial * np.hypot(
                         g.boundary_curve(which).radius(g.theta),
                         g.boundary_curve(which).radius(g.theta, 1))) * g.h_theta)}
    out["flux_balance"] = out["gamma1"]["flux"] + out["gamma2"]["flux"]
    return out


def slip_kernel_residual(psi: ScalarField, friction: float, nu: float,
                         threshold: float = 1e-6, fraction: float = 0.05) -> dict:
    """Left side of (2 chi - f/nu) dPsi/dn = 0 on both components.

    ``chi`` is the curve's own curvature (positive for a convex curve); the
    coefficient C of psi = C Psi must vanish when the residual exceeds
    ``threshold`` on at least ``fraction`` of the boundary samples.
    """
    if friction < 0 or nu <= 0:
        raise ValueError("need f >= 0 and nu > 0")
    prof = normal_derivative_profile(psi)
    report = {"friction": float(friction), "nu": float(nu), "components": {}}
    all_res = []
    annihilated = []
    for name in ("gamma1", "gamma2"):
        p = prof[name]
        factor = 2.0 * p["chi"] - friction / nu
        res = np.abs(factor * p["dpsi_dn"])
        all_res.append(res)
        report["components"][name] = {
            "max_residual": float(res.max()),
            "min_residual": float(res.min()),
            "max_abs_factor": float(np.abs(factor).max()),
        }
        if np.max(np.abs(factor)) <= threshold:
            annihilated.append(name)
    res = np.concatenate(all_res)
    frac = float(np.mean(res > threshold))
    report.update({
        "max_residual": float(res.max()),
        "fraction_above_threshold": frac,
        "kernel_coefficient_must_vanish": bool(frac >= fraction),
        "annihilated_components": annihilated,
        "threshold": threshold,
    })
    return report


def annulus_error(psi: ScalarField, r_in: float = 1.0, r_out: float = 2.0) -> float:
    """max |Psi - ln(r/r_in)/ln(r_out/r_in)| for a circular annulus."""
    g = psi.grid
    exact = np.log(np.hypot(g.x, g.y) / r_in) / np.log(r_out / r_in)
    return float(np.max(np.abs(psi.values - exact)))


def probe(inner: RadiusFunction, outer: RadiusFunction, friction: float, nu: float,
          n_theta: int = 128, n_sigma: int = 128) -> dict:
    dom = AnnularDomain(inner, outer, n_theta, n_sigma)
    psi = solve_kernel_Psi(dom)
    prof = normal_derivative_profile(psi)
    rep = slip_kernel_residual(psi, friction, nu)
    rep["flux_balance"] = float(prof["flux_balance"])
    rep["psi_min"] = float(psi.values.min())
    rep["psi_max"] = float(psi.values.max())
    for name in ("gamma1", "gamma2"):
        d = prof[name]["dpsi_dn"]
        rep["components"][name].update({"dpsi_dn_min": float(d.min()), "dpsi_dn_max": float(d.max())})
    return rep


__all__ = ["AnnularDomain", "KernelSolveError", "laplacian_matrix", "solve_kernel_Psi",
           "normal_derivative_profile", "slip_kernel_residual", "annulus_error", "probe"]
