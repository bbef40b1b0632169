"""Numerical checks of the integral identities, Korn quotient, decay and energy of solutions.

Conventions used throughout: ``D(v) = grad v + grad v^T`` (no factor 1/2), the
obstacle normal points into the fluid and ``chi > 0`` on a convex obstacle.  On
the outer circle of radius R the fluid-side curvature is ``-1/R``.

The two constants in

    int alpha^2 = c_D int |D(v)|^2 + kappa * oint chi_fluid (v . tau)^2

are fixed once by :func:`calibrate` from exact radial integrals; both the plain
identity and the slip-weighted vorticity identity then use the same pair.
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, linalg
from scipy.interpolate import CubicSpline

from .grid import (CurvilinearGrid, ScalarField, VectorField, boundary_trace, integrate_boundary,
                   integrate_domain, sym_gradient, vector_gradient)


# --------------------------------------------------------------------------
# calibration
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class Calibration:
    c_D: float
    kappa: float
    profiles: tuple = ()

    def as_dict(self):
        return {"c_D": self.c_D, "kappa": self.kappa}


def _radial_terms(g, dg, r_in, r_out):
    """Exact integrals for v = g(r) e_theta on r_in < r < r_out."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        a2 = integrate.quad(lambda r: (dg(r) + g(r) / r) ** 2 * 2 * np.pi * r, r_in, r_out,
                            epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        d2 = integrate.quad(lambda r: 2 * (dg(r) - g(r) / r) ** 2 * 2 * np.pi * r, r_in, r_out,
                            epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    bnd = (1.0 / r_in) * g(r_in) ** 2 * 2 * np.pi * r_in + (-1.0 / r_out) * g(r_out) ** 2 * 2 * np.pi * r_out
    return a2, d2, bnd


def calibrate(r_in: float = 1.0, r_out: float = 3.0) -> Calibration:
    """Solve for (c_D, kappa) from two radial swirls with different boundary speeds."""
    profiles = [
        (lambda r: (r_out - r) ** 2 * np.exp(-r), lambda r: -(r_out - r) * np.exp(-r) * (2 + r_out - r)),
        (lambda r: np.sin(np.pi * (r - r_in) / (r_out - r_in)) / r + 0.5 / r,
         lambda r: (np.pi / (r_out - r_in)) * np.cos(np.pi * (r - r_in) / (r_out - r_in)) / r
         - (np.sin(np.pi * (r - r_in) / (r_out - r_in)) + 0.5) / r ** 2),
    ]
    rows, rhs = [], []
    for g, dg in profiles:
        a2, d2, bnd = _radial_terms(g, dg, r_in, r_out)
        rows.append([d2, bnd])
        rhs.append(a2)
    c_D, kappa = np.linalg.solve(np.array(rows), np.array(rhs))
    return Calibration(float(c_D), float(kappa), ("(r_out-r)^2 e^-r", "sin/r + 1/(2r)"))


_DEFAULT_CAL: Calibration | None = None


def default_calibration() -> Calibration:
    global _DEFAULT_CAL
    if _DEFAULT_CAL is None:
        _DEFAULT_CAL = calibrate()
    return _DEFAULT_CAL


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------
@dataclass
class CheckResult:
    name: str
    statement: str
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float
    tolerance: float
    passed: bool
    applicable: bool = True
    orientation: str = "ccw"
    note: str = ""

    def as_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def _result(name, statement, lhs, rhs, tol, **kw) -> CheckResult:
    ab = abs(lhs - rhs)
    scale = max(abs(lhs), abs(rhs))
    rel = ab / scale if scale > 0 else 0.0
    return CheckResult(name, statement, float(lhs), float(rhs), float(ab), float(rel), tol,
                       bool(rel <= tol or ab <= 1e-14), **kw)


@dataclass
class DiagnosticsReport:
    checks: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    calibration: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def add(self, check: CheckResult):
        self.checks.append(check)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks if c.applicable)

    def as_dict(self):
        return {"calibration": self.calibration, "metadata": self.metadata,
                "checks": [c.as_dict() for c in self.checks], "extras": self.extras,
                "all_passed": self.all_passed}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.as_dict(), indent=2, sort_keys=True, default=_jsonable)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o)}")


def data_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, default=_jsonable)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# --------------------------------------------------------------------------
# identity checks on nodal fields
# --------------------------------------------------------------------------
@dataclass
class _Terms:
    alpha2: float
    d2: float
    chi_obst: float
    chi_outer: float
    alpha_vt: float
    vt2: float
    b_vt: float
    max_vn: float


def _terms(v: VectorField, alpha: ScalarField, b_vals=None, sign: float = 1.0) -> _Terms:
    g = v.grid
    D = sym_gradient(v)
    d2 = integrate_domain(ScalarField(g, np.sum(D ** 2, axis=(0, 1))))
    a2 = integrate_domain(ScalarField(g, alpha.values ** 2))
    vt, vn = boundary_trace(v, "obstacle")
    vt = sign * vt
    _, _, chi = g.boundary_frame("obstacle")
    vt_o, vn_o = boundary_trace(v, "outer")
    _, _, chi_o = g.boundary_frame("outer")
    a_b = alpha.values[:, 0]
    b_vals = np.zeros_like(vt) if b_vals is None else np.asarray(b_vals, float)
    return _Terms(
        alpha2=a2, d2=d2,
        chi_obst=integrate_boundary(chi * vt ** 2, g, "obstacle"),
        chi_outer=integrate_boundary(-chi_o * vt_o ** 2, g, "outer"),
        alpha_vt=integrate_boundary(a_b * vt, g, "obstacle"),
        vt2=integrate_boundary(vt ** 2, g, "obstacle"),
        b_vt=integrate_boundary(b_vals * vt, g, "obstacle"),
        max_vn=float(max(np.max(np.abs(vn)), np.max(np.abs(vn_o)))),
    )


def check_solonnikov_identity(v: VectorField, alpha: ScalarField | None = None,
                              calibration: Calibration | None = None, tol: float = 1e-3) -> CheckResult:
    """int alpha^2 = c_D int |D|^2 + kappa (oint_obstacle chi (v.tau)^2 + oint_outer chi_fluid (v.tau)^2)."""
    from .grid import rot
    cal = calibration or default_calibration()
    alpha = rot(v) if alpha is None else alpha
    t = _terms(v, alpha)
    rhs = cal.c_D * t.d2 + cal.kappa * (t.chi_obst + t.chi_outer)
    statement = "int alpha^2 = c_D int |D(v)|^2 + kappa oint chi (v.tau)^2"
    return _result("solonnikov_identity", statement, t.alpha2, rhs, tol,
                   note=f"max |v.n| on boundaries = {t.max_vn:.2e}")


def check_alpha_identity(v: VectorField, alpha: ScalarField, nu: float, friction: float,
                         b_vals=None, calibration: Calibration | None = None,
                         tol: float = 1e-3, vn_tol: float = 1e-6) -> CheckResult:
    """int alpha^2 - oint alpha v.tau = c_D int|D|^2 + (kappa - 2) oint chi (v.tau)^2
    + oint ((f/nu)(v.tau)^2 - b v.tau) + kappa oint_outer chi_fluid (v.tau)^2.

    Valid when alpha obeys the slip relation on the obstacle.  If the check fails
    it is repeated with the tangent reversed and the passing orientation reported.
    """
    cal = calibration or default_calibration()
    statement = ("int alpha^2 - oint alpha v.tau = c_D int |D|^2 + (kappa-2) oint chi (v.tau)^2 "
                 "+ oint ((f/nu)(v.tau)^2 - b v.tau)")
    results = []
    for sign, orient in ((1.0, "ccw"), (-1.0, "cw")):
        t = _terms(v, alpha, b_vals, sign)
        lhs = t.alpha2 - t.alpha_vt
        rhs = (cal.c_D * t.d2 + (cal.kappa - 2.0) * t.chi_obst + (friction / nu) * t.vt2 - t.b_vt
               + cal.kappa * t.chi_outer)
        res = _result("alpha_identity", statement, lhs, rhs, tol, orientation=orient)
        if t.max_vn > vn_tol * max(1.0, np.sqrt(abs(t.alpha2))):
            res.applicable = False
            res.note = f"v.n = {t.max_vn:.2e} on the boundary; identity not applicable"
        results.append(res)
        if res.passed:
            break
    return results[-1] if not results[0].passed and results[-1].passed else results[0]


def check_boundary_vorticity(v: VectorField, alpha: ScalarField, nu: float, friction: float,
                             b_vals=None, tol: float = 1e-6) -> CheckResult:
    """sup over obstacle nodes of |alpha - (2 chi - f/nu) v.tau - b|."""
    g = v.grid
    vt, _ = boundary_trace(v, "obstacle")
    _, _, chi = g.boundary_frame("obstacle")
    b_vals = np.zeros_like(vt) if b_vals is None else np.asarray(b_vals, float)
    lhs = alpha.values[:, 0]
    rhs = (2 * chi - friction / nu) * vt + b_vals
    err = float(np.max(np.abs(lhs - rhs)))
    scale = float(max(np.max(np.abs(lhs)), np.max(np.abs(rhs))))
    rel = err / scale if scale > 0 else 0.0
    return CheckResult("slip_vorticity_relation", "alpha = (2 chi - f/nu) v.tau + b on the obstacle",
                       float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))), err, rel, tol,
                       bool(err <= tol * max(1.0, scale)))


# --------------------------------------------------------------------------
# Korn
# --------------------------------------------------------------------------
def korn_quotient(sample) -> float:
    """int |D(u)|^2 / int |grad u|^2 for u = grad_perp(w), w given as a FunctionSample."""
    d = sample.d
    rule = sample.rule
    hxx, hxy, hyy = d[(2, 0)], d[(1, 1)], d[(0, 2)]
    dd = 2 * (hxx - hyy) ** 2 + 8 * hxy ** 2
    gg = hxx ** 2 + 2 * hxy ** 2 + hyy ** 2
    return float(rule.integrate(dd) / rule.integrate(gg))


def estimate_korn_constant(basis) -> dict:
    """Smallest generalized Rayleigh quotient int |D(u)|^2 / int |grad u|^2 over u = grad_perp(span)."""
    D = basis.design
    W = basis.rule.weights.ravel()
    lap = D[(2, 0)] + D[(0, 2)]
    L = (lap.T @ (lap.multiply(W[:, None]))).toarray()
    G = basis.gram
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        # |D(grad_perp w)|^2 = 4 |grad^2 w|^2 - 2 (Lap w)^2 and |grad grad_perp w|^2 = |grad^2 w|^2
        A = 4.0 * G - 2.0 * 0.5 * (L + L.T)
        try:
            vals = linalg.eigh(A, G, eigvals_only=True)
        except linalg.LinAlgError as exc:
            raise ValueError("Gram matrices are not definite") from exc
    return {"K": float(vals[0]), "K_calibrated": float(default_calibration().c_D * vals[0]),
            "N": basis.size, "largest": float(vals[-1])}


# --------------------------------------------------------------------------
# decay and energy
# --------------------------------------------------------------------------
def nodal_velocity_interpolator(v: VectorField) -> Callable:
    """Evaluate a nodal velocity at (r, theta_i) along each grid column by cubic splines in xi."""
    g = v.grid
    splines = [CubicSpline(g.xi, v.values[k], axis=1) for k in range(2)]

    def at_radius(r: float):
        x, y = r * np.cos(g.theta), r * np.sin(g.theta)
        _, xi = g.to_computational(x, y)
        if np.any(np.isnan(xi)):
            return None
        vals = np.empty((2, g.n_theta))
        for k in range(2):
            table = splines[k](xi)  # (n_theta_eval, n_theta_nodes)
            vals[k] = table[np.arange(g.n_theta), np.arange(g.n_theta)]
        return vals

    return at_radius


def decay_profile(velocity, v_inf, radii, n_theta: int = 256, r_min=None, r_max=None) -> dict:
    """D(r) = int_0^{2 pi} |v(r, theta) - c|^2 dtheta for c = v_inf and c = mean of v on the largest circle.

    ``velocity`` is a nodal VectorField or a callable (x, y) -> (2, ...).
    """
    v_inf = np.asarray(v_inf, float)
    notes = []
    if isinstance(velocity, VectorField):
        interp = nodal_velocity_interpolator(velocity)
        theta = velocity.grid.theta

        def ring(r):
            return interp(r)
    else:
        theta = 2 * np.pi * np.arange(n_theta) / n_theta

        def ring(r):
            if (r_min is not None and r < r_min) or (r_max is not None and r > r_max):
                return None
            try:
                return np.asarray(velocity(r * np.cos(theta), r * np.sin(theta)))
            except ValueError:
                return None

    rows = []
    for r in radii:
        vals = ring(float(r))
        if vals is None:
            notes.append(f"radius {r} outside the computational domain; skipped")
            continue
        rows.append((float(r), vals))
    if not rows:
        return {"radius": [], "D_v_inf": [], "D_empirical": [], "v_tilde_inf": None, "notes": notes}
    dtheta = 2 * np.pi / len(theta)
    v_tilde = rows[-1][1].mean(axis=1)
    d_inf = [float(np.sum((vals - v_inf[:, None]) ** 2) * dtheta) for _, vals in rows]
    d_emp = [float(np.sum((vals - v_tilde[:, None]) ** 2) * dtheta) for _, vals in rows]
    return {"radius": [r for r, _ in rows], "D_v_inf": d_inf, "D_empirical": d_emp,
            "v_tilde_inf": v_tilde.tolist(), "notes": notes}


def dirichlet_integral(v: VectorField) -> float:
    """int_{Omega_R} |grad v|^2 by nodal quadrature."""
    a, b, c, d = vector_gradient(v)
    return integrate_domain(ScalarField(v.grid, a ** 2 + b ** 2 + c ** 2 + d ** 2))


def dirichlet_growth(velocity: Callable, grid_factory: Callable, radii) -> dict:
    """int_{Omega_R} |grad v|^2 for each R, with the tail slope in ln R.

    A bounded energy shows a tail slope that is small relative to the value.
    """
    rows = []
    for R in radii:
        g = grid_factory(R)
        v = g.sample_vector(velocity)
        rows.append((float(R), dirichlet_integral(v)))
    Rs = np.array([r for r, _ in rows])
    Is = np.array([i for _, i in rows])
    slope = float((Is[-1] - Is[-2]) / np.log(Rs[-1] / Rs[-2])) if len(rows) > 1 else 0.0
    rel = abs(slope) / abs(Is[-1]) if Is[-1] != 0 else 0.0
    return {"R": Rs.tolist(), "dirichlet": Is.tolist(), "tail_slope": slope,
            "relative_tail_slope": float(rel), "bounded": bool(rel < 0.1)}


__all__ = ["Calibration", "calibrate", "default_calibration", "CheckResult", "DiagnosticsReport",
           "data_hash", "check_solonnikov_identity", "check_alpha_identity",
           "check_boundary_vorticity", "korn_quotient", "estimate_korn_constant",
           "decay_profile", "dirichlet_integral", "dirichlet_growth",
           "nodal_velocity_interpolator"]
