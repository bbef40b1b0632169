"""Command-line entry point: ``slipflow {solve,study,kernel-probe,diagnose}``."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass

import numpy as np
import scipy

from . import __version__
from . import diagnostics as dg
from . import extension as ext_mod
from . import galerkin as gk
from . import kernel_probe as kp
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .data import FourierBoundary, force_from_config
from .geometry import arc_length_parameterize, circle, radius_from_config, tubular_map
from .grid import CurvilinearGrid, dump_csv

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_IO = 0, 2, 3, 4


# --------------------------------------------------------------------------
# building blocks
# --------------------------------------------------------------------------
@dataclass
class Problem:
    config: RunConfig
    grid: CurvilinearGrid
    basis: gk.GalerkinBasis
    data: gk.GalerkinData
    extension: object | None
    manufactured: np.ndarray | None = None


def default_stretch(R: float, rho) -> float:
    """Exponential stretching that makes the radial spacing geometric for a circle."""
    return float(np.log(R / rho.min_radius()))


def make_grid(cfg: RunConfig, R: float | None = None) -> CurvilinearGrid:
    d = cfg.discretization
    rho = radius_from_config(cfg.geometry.as_table())
    R = d.R if R is None else float(R)
    beta = d.stretch if d.stretch is not None else default_stretch(R, rho)
    return CurvilinearGrid(rho, R, d.n_theta, d.n_sigma, quad_order=4, stretch=beta)


def make_extension(cfg: RunConfig, grid: CurvilinearGrid, epsilon: float | None = None):
    v_inf = np.asarray(cfg.physics.v_infinity, float)
    if not np.any(v_inf):
        return None
    tm = tubular_map(grid.curve)
    eps = cfg.extension.epsilon if epsilon is None else epsilon
    return ext_mod.build_v0(ext_mod.ExtensionParams(tuple(v_inf), eps, tm.zeta), tm)


def make_data(cfg: RunConfig, grid: CurvilinearGrid, extension=None) -> gk.GalerkinData:
    p = cfg.physics
    b = FourierBoundary(tuple(p.b.get("cos", ())), tuple(p.b.get("sin", ())))
    return gk.GalerkinData(nu=p.nu, friction=p.friction_f, b=b, F=force_from_config(p.F),
                           extension=extension, include_boundary_term=cfg.include_boundary_term)


def make_basis(cfg: RunConfig, grid: CurvilinearGrid, modes=None, extension=None) -> gk.GalerkinBasis:
    d = cfg.discretization
    nt, ns = modes or (d.n_theta_modes, d.n_sigma_modes)
    extra = gk.layer_breaks(grid, extension.params.layer, 10) if extension is not None else ()
    return gk.build_basis(grid, nt, ns, quad_order=d.quad_order, extra_xi=extra)


def build_problem(cfg: RunConfig) -> Problem:
    grid = make_grid(cfg)
    if cfg.manufactured.enabled:
        basis = make_basis(cfg, grid)
        rng = np.random.default_rng(cfg.seed)
        a_star = gk.interior_coefficients(basis, rng, cfg.manufactured.scale)
        data = gk.manufactured_data(basis, a_star, cfg.physics.nu, cfg.physics.friction_f,
                                    cfg.include_boundary_term)
        return Problem(cfg, grid, basis, data, None, a_star)
    extension = make_extension(cfg, grid)
    basis = make_basis(cfg, grid, extension=extension)
    return Problem(cfg, grid, basis, make_data(cfg, grid, extension), extension)


def solver_options(cfg: RunConfig) -> gk.SolverOptions:
    s = cfg.solver
    return gk.SolverOptions(tol=s.tol, max_newton=s.max_newton, damping=s.damping,
                            continuation_ratio=s.continuation_ratio, nu_start=s.nu_start)


def versions() -> dict:
    return {"slipflow": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=dg._jsonable)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in row])


# --------------------------------------------------------------------------
# diagnostics of a solved state
# --------------------------------------------------------------------------
def diagnose_state(problem: Problem, state: gk.GalerkinState) -> dg.DiagnosticsReport:
    cfg, grid, basis, data = problem.config, problem.grid, problem.basis, problem.data
    fields = gk.reconstruct(state, basis, problem.extension, grid)
    v, alpha = fields["v"], fields["alpha"]
    b_nodes = data.b(grid.theta)
    cal = dg.default_calibration()
    report = dg.DiagnosticsReport(calibration=cal.as_dict())
    report.metadata = {"N": basis.size, "modes": [basis.n_theta_modes, basis.n_sigma_modes],
                       "R": grid.R, "grid": [grid.n_theta, grid.n_sigma],
                       "config_hash": cfg.hash(), "versions": versions()}
    report.add(dg.check_boundary_vorticity(v, alpha, data.nu, data.friction, b_nodes, tol=1e-6))
    report.add(dg.check_alpha_identity(v, alpha, data.nu, data.friction, b_nodes, cal, tol=1e-3))
    sol = dg.check_solonnikov_identity(v, alpha, cal, tol=1e-3)
    if problem.extension is not None:
        sol.applicable = False
        sol.note = "v.n != 0 on the truncation circle when v_inf != 0"
    report.add(sol)
    k = max(state.norm, 1e-12)
    report.extras["positivity"] = gk.positivity_probe(basis, data, k, n_samples=8, seed=cfg.seed)
    report.extras["dirichlet_integral"] = dg.dirichlet_integral(v)
    rho_max = grid.inner.max_radius()
    radii = np.linspace(rho_max + 0.25 * (grid.R - rho_max), 0.95 * grid.R, 8)
    report.extras["decay"] = dg.decay_profile(v, cfg.physics.v_infinity, radii)
    return report


def hard_checks_pass(problem: Problem, state: gk.GalerkinState, diag: dg.DiagnosticsReport) -> bool:
    # identities hold exactly only for manufactured data; otherwise they are refinement diagnostics
    hard = [diag.extras["positivity"]["pass"] or state.norm == 0.0]
    if problem.manufactured is not None:
        hard += [c.passed for c in diag.checks if c.applicable]
    return bool(all(hard))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------
def run_solve(cfg: RunConfig, out_dir: str) -> int:
    os.makedirs(out_dir, exist_ok=True)
    problem = build_problem(cfg)
    status = EXIT_OK
    try:
        state = gk.solve(problem.basis, problem.data, solver_options(cfg))
    except gk.NonConvergenceError as exc:
        state = exc.state
        status = EXIT_NONCONVERGED
    report = {"config_hash": cfg.hash(), "versions": versions(), "seed": cfg.seed,
              "solver": {"converged": state.converged, "iterations": state.iterations,
                         "residual_norm": state.residual_norm, "nu_reached": state.nu,
                         "norm_hessian": state.norm}}
    if problem.manufactured is not None:
        err = float(np.max(np.abs(problem.basis.to_raw(state.coefficients) - problem.manufactured)))
        c_err = float(np.max(np.abs(state.coefficients - problem.basis.to_orthonormal(problem.manufactured))))
        report["manufactured"] = {"coefficient_error": c_err, "bspline_coefficient_error": err,
                                  "pass": bool(c_err <= 1e-6)}
        if c_err > 1e-6 and status == EXIT_OK:
            status = EXIT_NONCONVERGED
    diag = diagnose_state(problem, state)
    report["diagnostics"] = diag.as_dict()
    report["hard_checks_pass"] = hard_checks_pass(problem, state, diag)
    if status == EXIT_OK and not report["hard_checks_pass"]:
        status = EXIT_NONCONVERGED
    report["exit_status"] = status
    _write_json(os.path.join(out_dir, "report.json"), report)
    _write_json(os.path.join(out_dir, "solution.json"), {
        "config": cfg.as_dict(), "n_theta_modes": problem.basis.n_theta_modes,
        "n_sigma_modes": problem.basis.n_sigma_modes,
        "coefficients": state.coefficients.tolist(),
        "bspline_coefficients": problem.basis.to_raw(state.coefficients).tolist(),
        "manufactured": None if problem.manufactured is None else problem.manufactured.tolist()})
    _write_csv(os.path.join(out_dir, "convergence.csv"), ["step", "method", "nu", "residual"],
               [(i, h["method"], h["nu"], h["residual"]) for i, h in enumerate(state.history)])
    dec = diag.extras["decay"]
    _write_csv(os.path.join(out_dir, "decay.csv"), ["radius", "D_v_inf", "D_empirical"],
               list(zip(dec["radius"], dec["D_v_inf"], dec["D_empirical"])))
    if cfg.outputs.dump_fields:
        os.makedirs(os.path.join(out_dir, "fields"), exist_ok=True)
        f = gk.reconstruct(state, problem.basis, problem.extension, problem.grid)
        dump_csv(os.path.join(out_dir, "fields", "solution.csv"), problem.grid,
                 {"phi": f["phi"], "v": f["v"], "alpha": f["alpha"]})
    return status


def run_study(cfg: RunConfig, out_dir: str, kind: str) -> int:
    os.makedirs(out_dir, exist_ok=True)
    st = cfg.study
    result = {"config_hash": cfg.hash(), "versions": versions(), "study": kind}
    status = EXIT_OK
    if kind in ("N", "R"):
        def grid_factory(R):
            return make_grid(cfg, R)

        def data_factory(g):
            return make_data(cfg, g, make_extension(cfg, g))

        modes = [tuple(m) for m in st.N_sequence] or [(cfg.discretization.n_theta_modes,
                                                     cfg.discretization.n_sigma_modes)]
        rep = gk.refine_study(grid_factory, data_factory, modes if kind == "N" else modes[-1:],
                              R_sequence=st.R_sequence if kind == "R" else (),
                              R_modes=tuple(st.R_modes) if st.R_modes else None,
                              options=solver_options(cfg), interior_radius=st.interior_radius,
                              basis_kwargs={"quad_order": cfg.discretization.quad_order})
        result.update(rep)
        if kind == "N":
            diffs = rep["grad_diff"] + [float("nan")]
            rows = list(zip(rep["N"], [m[0] for m in rep["modes"]], [m[1] for m in rep["modes"]],
                            rep["norm"], diffs, rep["residual"]))
            _write_csv(os.path.join(out_dir, "study.csv"),
                       ["N", "n_theta_modes", "n_sigma_modes", "norm_hessian", "grad_diff_next",
                        "residual_norm"], rows)
        else:
            changes = [float("nan")] + rep["interior_change"]
            _write_csv(os.path.join(out_dir, "study.csv"), ["R", "interior_change_from_previous"],
                       list(zip(rep["R"], changes)))
        if rep["partial"]:
            status = EXIT_NONCONVERGED
    elif kind == "epsilon":
        grid = make_grid(cfg)
        tm = tubular_map(grid.curve)
        v_inf = tuple(cfg.physics.v_infinity) if any(cfg.physics.v_infinity) else (1.0, 0.0)
        eps_seq = st.epsilon_sequence or [0.2, 0.1, 0.05, 0.025]
        params = [ext_mod.ExtensionParams(v_inf, e, tm.zeta) for e in eps_seq]
        scal = ext_mod.grad_V_eps_scaling(params, tm)
        layers = np.concatenate([gk.layer_breaks(grid, p.layer, 10) for p in params])
        basis = gk.build_basis(grid, cfg.discretization.n_theta_modes, cfg.discretization.n_sigma_modes,
                               quad_order=cfg.discretization.quad_order, extra_xi=layers)
        rng = np.random.default_rng(cfg.seed)
        samples = [basis.sample(basis.to_orthonormal(gk.compact_coefficients(basis, rng)))
                   for _ in range(st.n_v0_samples)]
        ratios = []
        for p in params:
            r = ext_mod.verify_v0_inequality(ext_mod.build_v0(p, tm), samples, cfg.extension.epsilon_target)
            r.pop("ratios")
            ratios.append(r)
        result.update({"grad_V_eps": scal, "v0_inequality": ratios})
        _write_csv(os.path.join(out_dir, "study.csv"),
                   ["epsilon", "grad_V_eps_norm", "v0_max_ratio", "v0_pass"],
                   [(e, n, r["max_ratio"], r["pass"]) for e, n, r in
                    zip(scal["epsilon"], scal["grad_norm"], ratios)])
    else:
        raise ConfigError(f"unknown study kind {kind!r}")
    _write_json(os.path.join(out_dir, "study.json"), result)
    return status


def run_kernel_probe(inner: float, outer: float, friction: float, nu: float, n: int,
                     out_dir: str) -> int:
    if not 0 < inner < outer:
        raise ConfigError("kernel probe needs 0 < inner radius < outer radius")
    if friction < 0 or nu <= 0:
        raise ConfigError("kernel probe needs friction >= 0 and nu > 0")
    os.makedirs(out_dir, exist_ok=True)
    rep = kp.probe(circle(inner), circle(outer), friction, nu, n, n)
    rep.update({"inner_radius": inner, "outer_radius": outer, "n": n, "versions": versions()})
    _write_json(os.path.join(out_dir, "report.json"), rep)
    return EXIT_OK


def run_diagnose(out_dir: str) -> int:
    with open(os.path.join(out_dir, "solution.json")) as fh:
        sol = json.load(fh)
    cfg = config_from_dict(_strip_config(sol["config"]))
    problem = build_problem(cfg)
    c = np.asarray(sol["coefficients"], float)
    asm = gk.prepare(problem.basis, problem.data)
    r = gk.residual(asm, c)
    state = gk.GalerkinState(c, r, cfg.physics.nu, True, [])
    diag = diagnose_state(problem, state)
    out = diag.as_dict()
    out["residual_norm"] = float(np.linalg.norm(r))
    out["hard_checks_pass"] = hard_checks_pass(problem, state, diag)
    _write_json(os.path.join(out_dir, "diagnostics.json"), out)
    dec = diag.extras["decay"]
    _write_csv(os.path.join(out_dir, "decay.csv"), ["radius", "D_v_inf", "D_empirical"],
               list(zip(dec["radius"], dec["D_v_inf"], dec["D_empirical"])))
    return EXIT_OK if out["hard_checks_pass"] else EXIT_NONCONVERGED


def _strip_config(d: dict) -> dict:
    """Drop None entries so a dumped config round-trips through validation."""
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out[k] = {kk: vv for kk, vv in v.items() if vv is not None}
        else:
            out[k] = v
    return out


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------
def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slipflow", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="run config (TOML)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--include-boundary-term", type=_bool, default=None)

    common(sub.add_parser("solve", help="solve and write report.json, solution.json, fields/*.csv"))
    p = sub.add_parser("study", help="N, R or epsilon refinement study")
    common(p)
    p.add_argument("--kind", choices=("N", "R", "epsilon"), default="N")
    p = sub.add_parser("kernel-probe", help="kernel function on a circular annulus")
    common(p, config_required=False)
    p.add_argument("--inner-radius", type=float, default=1.0)
    p.add_argument("--outer-radius", type=float, default=2.0)
    p.add_argument("--friction", type=float, default=0.0)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--n", type=int, default=128)
    p = sub.add_parser("diagnose", help="re-run diagnostics on a solution directory")
    common(p, config_required=False)
    return ap


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.include_boundary_term is not None:
        cfg.include_boundary_term = args.include_boundary_term
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "kernel-probe":
            return run_kernel_probe(args.inner_radius, args.outer_radius, args.friction, args.nu,
                                    args.n, args.out or "out")
        if args.command == "diagnose":
            return run_diagnose(args.out or "out")
        cfg = _apply_overrides(load_config(args.config), args)
        out = args.out or cfg.outputs.directory
        if args.command == "solve":
            return run_solve(cfg, out)
        return run_study(cfg, out, args.kind)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        if args.command in ("solve", "study") and exc.filename == getattr(args, "config", None):
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
