"""Acceptance suite: one pass/fail line per criterion.

Run ``python3 tests/test_acceptance.py`` for the ten lines alone, or
``pytest tests/test_acceptance.py`` (the lines are repeated in the terminal summary).
"""
from __future__ import annotations

import functools
import json
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
import sympy as sp

from slipflow import cli
from slipflow import diagnostics as dg
from slipflow import galerkin as gk
from slipflow import kernel_probe as kp
from slipflow.config import load_config
from slipflow.geometry import circle, ellipse
from slipflow.grid import CurvilinearGrid, divergence, perp_gradient, rot

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
LINES: dict[int, str] = {}


def _cfg(name: str, **disc):
    cfg = load_config(CONFIGS / f"{name}.toml")
    if disc:
        cfg = replace(cfg, discretization=replace(cfg.discretization, **disc))
    return cfg


@functools.lru_cache(maxsize=None)
def _study(kind: str) -> dict:
    with tempfile.TemporaryDirectory() as tmp:
        t0 = time.perf_counter()
        status = cli.run_study(_cfg("canonical"), tmp, kind)
        out = json.loads(Path(tmp, "study.json").read_text())
    out["_status"], out["_seconds"] = status, time.perf_counter() - t0
    return out


def _orders(errs):
    return [float(np.log2(a / b)) for a, b in zip(errs, errs[1:])]


# --------------------------------------------------------------------------
def criterion_1():
    X, Y = sp.symbols("x y")
    exprs = [sp.sin(X) * sp.cos(Y), sp.exp(-(X ** 2 + Y ** 2) / 4), X ** 3 * Y - Y ** 2,
             sp.log(X ** 2 + Y ** 2) * sp.cos(Y / 2), Y / sp.sqrt(X ** 2 + Y ** 2)]
    t0 = time.perf_counter()
    worst_order, worst_div = np.inf, 0.0
    for e in exprs:
        f = sp.lambdify((X, Y), e, "numpy")
        lap = sp.lambdify((X, Y), sp.diff(e, X, 2) + sp.diff(e, Y, 2), "numpy")
        for geo in (circle(1.0), ellipse(1.5, 1.0)):
            errs = []
            for n in (64, 128, 256):
                g = CurvilinearGrid(geo, 3.0, n, n)
                u = perp_gradient(g.sample_scalar(f))
                exact = lap(g.x, g.y) * np.ones(g.shape)
                errs.append(np.max(np.abs(rot(u).values - exact)) / np.max(np.abs(exact)))
                worst_div = max(worst_div, float(np.max(np.abs(divergence(u).values))))
            worst_order = min(worst_order, min(_orders(errs)))
    dt = time.perf_counter() - t0
    ok = worst_order >= 2 and worst_div <= 1e-9 and dt < 30
    return ok, f"min order {worst_order:.2f} (>= 2), max |div grad_perp| {worst_div:.1e}, {dt:.1f} s (< 30)"


def criterion_2():
    t0 = time.perf_counter()
    dom = kp.AnnularDomain(circle(1.0), circle(2.0), 256, 256)
    psi = kp.solve_kernel_Psi(dom)
    err = kp.annulus_error(psi, 1.0, 2.0)
    flux = abs(kp.normal_derivative_profile(psi)["flux_balance"])
    vanish = kp.slip_kernel_residual(psi, 0.0, 1.0)["kernel_coefficient_must_vanish"]
    dt = time.perf_counter() - t0
    ok = err <= 1e-6 and flux <= 1e-6 and vanish and dt < 20
    return ok, f"max error {err:.1e} (<= 1e-6), flux balance {flux:.1e}, must_vanish={vanish}, {dt:.1f} s (< 20)"


def criterion_3():
    rep = _study("epsilon")
    slope = rep["grad_V_eps"]["slope"]
    ok = abs(slope + 0.5) <= 0.05 and rep["_seconds"] < 60
    return ok, f"slope {slope:.3f} (-0.5 +- 0.05), {rep['_seconds']:.1f} s"


def criterion_4():
    rep = _study("epsilon")
    eps = rep["grad_V_eps"]["epsilon"]
    ratios = [r["max_ratio"] for r in rep["v0_inequality"]]
    tested = [r for e, r in zip(eps, ratios) if e >= 0.05 - 1e-12]
    monotone = all(b <= a for a, b in zip(tested, tested[1:]))
    n = rep["v0_inequality"][0]["n_samples"]
    ok = max(tested) <= 0.1 and monotone and n == 100 and rep["_seconds"] < 120
    pretty = ", ".join(f"{r:.1e}" for r in tested)
    return ok, f"max ratios [{pretty}] over eps 0.2/0.1/0.05, {n} samples, monotone={monotone}"


def criterion_5():
    t0 = time.perf_counter()
    cfg = _cfg("manufactured")
    prob = cli.build_problem(cfg)
    state = gk.solve(prob.basis, prob.data, cli.solver_options(cfg))
    c_err = float(np.max(np.abs(state.coefficients - prob.basis.to_orthonormal(prob.manufactured))))
    dt = time.perf_counter() - t0
    # weak residual of canonical solutions against a finer, non-nested test space
    can = _cfg("canonical")
    grid = cli.make_grid(can)
    data = cli.make_data(can, grid)
    weak = []
    for modes in [(8, 4), (16, 4), (16, 8)]:
        b = cli.make_basis(can, grid, modes)
        test = gk.independent_basis(b, 23, 11)
        weak.append(gk.weak_residual(gk.solve(b, data, cli.solver_options(can)), b, data, test))
    dec = all(b < a for a, b in zip(weak, weak[1:]))
    ok = c_err <= 1e-6 and dec and dt < 120
    pretty = ", ".join(f"{w:.3f}" for w in weak)
    return ok, (f"coefficient error {c_err:.1e} (<= 1e-6) at N={prob.basis.size}, {dt:.1f} s; "
                f"weak residual N=32/64/128: [{pretty}]")


def criterion_6():
    cal = dg.default_calibration()
    res = {"alpha": [], "solonnikov": []}
    for n in (64, 128, 256):
        cfg = _cfg("manufactured", n_theta=n, n_sigma=n)
        prob = cli.build_problem(cfg)
        state = gk.solve(prob.basis, prob.data, cli.solver_options(cfg))
        f = gk.reconstruct(state, prob.basis, None, prob.grid)
        b = prob.data.b(prob.grid.theta)
        a = dg.check_alpha_identity(f["v"], f["alpha"], prob.data.nu, prob.data.friction, b, cal, tol=1e-3)
        s = dg.check_solonnikov_identity(f["v"], f["alpha"], cal, tol=1e-3)
        res["alpha"].append(a.rel_residual)
        res["solonnikov"].append(s.rel_residual)
    ok = all(r[1] <= 1e-3 and r[0] > r[1] > r[2] for r in res.values())
    fmt = {k: "/".join(f"{x:.1e}" for x in v) for k, v in res.items()}
    return ok, (f"c_D={cal.c_D}, kappa={cal.kappa}; alpha identity {fmt['alpha']}, "
                f"Solonnikov {fmt['solonnikov']} at 64/128/256 (<= 1e-3 at 128)")


def criterion_7():
    rep = _study("N")
    norms, diffs = rep["norm"], rep["grad_diff"]
    var = abs(norms[-1] - norms[-2]) / norms[-1]
    mono = all(b < a for a, b in zip(diffs, diffs[1:]))
    ok = var <= 0.05 and mono and not rep["failed"]
    return ok, (f"N={rep['N']}, |hess phi| variation {100 * var:.2f}% (<= 5%), "
                f"grad diffs [{', '.join(f'{d:.3f}' for d in diffs)}] monotone={mono}")


def criterion_8():
    grid = CurvilinearGrid(ellipse(2.0, 1.0), 4.0, 64, 64)
    ks = [dg.estimate_korn_constant(gk.build_basis(grid, *m))["K"] for m in [(4, 4), (8, 8), (16, 15)]]
    stable = abs(ks[-1] - ks[-2]) / ks[-2] <= 0.10
    mono = all(b <= a + 1e-10 * abs(a) for a, b in zip(ks, ks[1:]))
    ok = min(ks) > 0 and stable and mono
    return ok, f"K = [{', '.join(f'{k:.4f}' for k in ks)}] for N=16/64/240, stable={stable}, monotone={mono}"


def criterion_9():
    cfg = _cfg("trivial")
    prob = cli.build_problem(cfg)
    asm = gk.prepare(prob.basis, prob.data)
    p0 = float(np.linalg.norm(gk.residual(asm, np.zeros(prob.basis.size))))
    state = gk.solve(prob.basis, prob.data, cli.solver_options(cfg))
    ok = p0 <= 1e-12 and state.norm == 0.0
    return ok, f"|P(0)| = {p0:.1e} (<= 1e-12), |c| = {state.norm:.1e}"


def criterion_10():
    rep = _study("R")
    change = rep["interior_change"][-1]
    cfg = _cfg("canonical")
    cfg = replace(cfg, discretization=replace(cfg.discretization, R=16.0, n_theta_modes=16, n_sigma_modes=16))
    prob = cli.build_problem(cfg)
    state = gk.solve(prob.basis, prob.data, cli.solver_options(cfg))
    fields = gk.reconstruct(state, prob.basis, None, prob.grid)
    dec = dg.decay_profile(fields["v"], cfg.physics.v_infinity, [2.0, 4.0, 8.0, 14.0])
    ok = change <= 0.02 and not rep["failed"]
    prof = ", ".join(f"D({r:g})={a:.2e}/{b:.2e}" for r, a, b in
                     zip(dec["radius"], dec["D_v_inf"], dec["D_empirical"]))
    return ok, f"interior change R=8->16 {100 * change:.2f}% (<= 2%); reported v_inf/empirical: {prof}"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 11)}


def run(idx: int) -> bool:
    ok, detail = CRITERIA[idx]()
    LINES[idx] = f"criterion {idx:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(LINES[idx])
    return ok


@pytest.mark.parametrize("idx", list(CRITERIA))
def test_criterion(idx):
    assert run(idx), LINES[idx]


if __name__ == "__main__":
    results = [run(i) for i in CRITERIA]
    sys.exit(0 if all(results) else 1)
