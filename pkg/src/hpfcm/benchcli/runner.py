"""Run single benchmarks and parameter sweeps; write reports, CSVs and text tables."""
from __future__ import annotations

import csv
import json
import logging
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..assembly import energy_error, l2_error, sample_solution
from ..mgsolver import (GAUSS_SEIDEL, JACOBI, CGCoarseSolver, DirectCoarseSolver, GaussSeidelSmoother,
                        JacobiSmoother, SolveReport, VCycle, build_hierarchy, build_smoothers, solve_mg,
                        solve_pcg, schwarz_preconditioner)
from .config import MODE_CG, MODE_CG_MG, MODE_MG, NO_PRECONDITIONER, PLATE, dump_config
from .problems import build_problem

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("benchmark", "angle_deg", "p", "h", "k", "smoother", "mode", "iterations",
                 "rho_max", "converged", "diverged", "n_dofs", "error")


def _preconditioner(problem, s):
    """One-level preconditioner for plain CG."""
    A = problem.A
    if s.smoother == NO_PRECONDITIONER:
        return None
    if s.smoother == JACOBI:
        return JacobiSmoother(A, s.omega or 1.0).apply
    if s.smoother == GAUSS_SEIDEL:
        return GaussSeidelSmoother(A, s.omega or 1.0, symmetric=True).apply
    M = schwarz_preconditioner(A, problem.mesh, problem.dofmap, s.smoother)
    if s.omega is not None:
        M.omega = s.omega
    return M.apply


def solve_problem(problem, s=None):
    """Solve ``problem`` with solver settings ``s`` (defaults to the problem's config).

    Returns ``(x, SolveReport)``. Setup times are added to the report.
    """
    s = s or problem.config.solver
    A, b = problem.A, problem.b
    timings = dict(problem.timings)
    meta = {"n_dofs": int(A.shape[0]), "mode": s.mode, "smoother": s.smoother}
    if s.mode == MODE_CG:
        t0 = time.perf_counter()
        M = _preconditioner(problem, s)
        timings["smoother"] = time.perf_counter() - t0
        x, rep = solve_pcg(A, b, M, s.tol, s.max_it)
    else:
        t0 = time.perf_counter()
        hierarchy = build_hierarchy(problem.dofmap, A)
        t1 = time.perf_counter()
        smoothers = build_smoothers(hierarchy, s.smoother, problem.mesh, problem.dofmap, s.omega,
                                    symmetric_gs=s.mode == MODE_CG_MG)
        t2 = time.perf_counter()
        if s.coarse == "direct":
            coarse = DirectCoarseSolver(hierarchy[0].A)
        else:
            coarse = CGCoarseSolver(hierarchy[0].A, problem.mesh, problem.dofmap, hierarchy[0].dofs)
        cycle = VCycle(hierarchy, smoothers, coarse, s.n_s)
        timings.update(hierarchy=t1 - t0, smoother=t2 - t1, coarse=time.perf_counter() - t2)
        meta["levels"] = [{"p": l.p_cap, "k": l.k_cap, "n": l.n} for l in hierarchy.levels]
        if s.mode == MODE_CG_MG:
            x, rep = solve_pcg(A, b, cycle, s.tol, s.max_it)
        else:
            x, rep = solve_mg(A, b, cycle, s.tol, s.max_it)
    rep.timings = {**timings, **rep.timings}
    rep.meta.update(meta)
    return x, rep


def _failed_report(exc, problem=None):
    meta = {"error": f"{type(exc).__name__}: {exc}"}
    if problem is not None:
        meta["n_dofs"] = int(problem.A.shape[0])
    return SolveReport(0, [1.0], False, False, {}, meta)


def run(cfg, out_dir=None):
    """Build and solve one benchmark; returns the ``SolveReport``.

    Solver errors (indefinite preconditioner, singular blocks, ...) are caught
    and recorded in ``report.meta["error"]``; configuration and geometry errors
    propagate.
    """
    problem = build_problem(cfg)
    try:
        x, rep = solve_problem(problem)
    except (RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("solver failed: %s", exc)
        x, rep = None, _failed_report(exc, problem)
    if x is not None and problem.exact is not None and rep.converged:
        rep.meta["energy_error"] = energy_error(problem.mesh, problem.dofmap, problem.domain, x,
                                                problem.exact.grad, problem.physics, problem.quad)
        rep.meta["l2_error"] = l2_error(problem.mesh, problem.dofmap, problem.domain, x,
                                        problem.exact.u, problem.quad)
    out_dir = out_dir or cfg.output.dir
    if out_dir:
        write_run(Path(out_dir), cfg, problem, x, rep)
    return rep


def write_run(out, cfg, problem, x, rep):
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.yaml")
    (out / "report.json").write_text(rep.to_json(indent=2) + "\n")
    with open(out / "residuals.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "relative_residual", "contraction"])
        rho = [""] + rep.contraction_history
        for i, (r, c) in enumerate(zip(rep.residual_history, rho)):
            w.writerow([i, repr(r), "" if c == "" else repr(c)])
    m = cfg.output.solution_grid
    if m and x is not None:
        x0, y0, x1, y1 = problem.mesh.grid.bounds
        xs = np.linspace(x0, x1, m)
        ys = np.linspace(y0, y1, m)
        pts = np.array([(a, b) for b in ys for a in xs])
        vals = sample_solution(problem.mesh, problem.dofmap, x, pts)
        inside = problem.domain.inside(pts)
        names = ["u"] if vals.shape[1] == 1 else ["ux", "uy"]
        with open(out / "solution.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "physical", *names])
            for pt, phys, v in zip(pts, inside, vals):
                w.writerow([repr(pt[0]), repr(pt[1]), int(phys), *map(repr, v)])


def format_h(h):
    return str(Fraction(h).limit_denominator(1 << 12))


def _row(cfg, rep):
    d, s = cfg.discretization, cfg.solver
    return {
        "benchmark": cfg.problem.kind,
        "angle_deg": cfg.problem.angle_deg if cfg.problem.kind != PLATE else "",
        "p": d.p, "h": format_h(d.h), "k": d.k, "smoother": s.smoother, "mode": s.mode,
        "iterations": "err" if "error" in rep.meta else rep.cell,
        "rho_max": f"{rep.rho_max:.4g}",
        "converged": int(rep.converged), "diverged": int(rep.diverged),
        "n_dofs": rep.meta.get("n_dofs", ""), "error": rep.meta.get("error", ""),
    }


def _run_cell(cfg):
    try:
        rep = run(cfg)
    except Exception as exc:  # noqa: BLE001 - recorded per cell, sweep continues
        rep = _failed_report(exc)
    return _row(cfg, rep), rep


def _sort_key(row):
    return (row["benchmark"], str(row["angle_deg"]), row["smoother"], row["mode"],
            int(row["k"]), int(row["p"]), Fraction(row["h"]))


def sweep(spec, out_dir=None, threads=1, strict=False):
    """Run every point of ``spec``; returns rows sorted by (benchmark, smoother, mode, k, p, h).

    Cells that raise are kept as rows marked ``err``; with ``strict`` the first
    such error aborts the sweep. Non-convergence is a result, not an error.
    With ``threads > 1`` cells run in separate processes.
    """
    configs = spec.configs()
    if threads > 1 and not strict:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_cell, configs))
    else:
        results = []
        for cfg in configs:
            row, rep = _run_cell(cfg)
            if strict and row["iterations"] == "err":
                raise RuntimeError(f"sweep cell {cfg.key()} failed: {row['error']}")
            results.append((row, rep))
    rows = sorted((r for r, _ in results), key=_sort_key)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(rows, out / "sweep.csv")
        (out / "tables.txt").write_text(render_tables(rows))
    return rows


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    missing = set(SWEEP_COLUMNS) - set(rows[0] if rows else SWEEP_COLUMNS)
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    return rows


def render_tables(rows, value="iterations"):
    """Plain-text grids, one per (benchmark, angle, smoother, mode).

    Rows are polynomial degrees, or refinement depths when a block varies
    ``k`` at a single ``p``; columns are element sizes.
    """
    blocks = defaultdict(list)
    for r in rows:
        blocks[(r["benchmark"], str(r["angle_deg"]), r["smoother"], r["mode"])].append(r)
    parts = []
    for (bench, angle, smoother, mode), rs in sorted(blocks.items()):
        ps = sorted({int(r["p"]) for r in rs})
        ks = sorted({int(r["k"]) for r in rs})
        by_k = len(ks) > 1 and len(ps) == 1
        row_name, row_vals = ("k", ks) if by_k else ("p", ps)
        hs = sorted({r["h"] for r in rs}, key=Fraction, reverse=True)
        cells = {}
        for r in rs:
            cells[(int(r[row_name]), r["h"])] = r[value]
        title = f"{bench}" + (f" psi={angle}" if angle else "") + f" | {mode} | {smoother}"
        if not by_k and len(ks) == 1 and ks[0]:
            title += f" | k={ks[0]}"
        if by_k:
            title += f" | p={ps[0]}"
        width = max(6, *(len(h) for h in hs), *(len(str(c)) for c in cells.values()))
        head = f"{row_name:>3} |" + "".join(f" {h:>{width}}" for h in hs)
        lines = [title, head, "-" * len(head)]
        for v in row_vals:
            lines.append(f"{v:>3} |" + "".join(f" {str(cells.get((v, h), '')):>{width}}" for h in hs))
        parts.append("\n".join(lines))
    return "\n\n".join(parts) + "\n"


def tables_from_csv(path, value="iterations"):
    return render_tables(read_sweep_csv(path), value)


def report_from_json(path):
    data = json.loads(Path(path).read_text())
    return SolveReport(data["iterations"], data["residual_history"], data["converged"],
                       data["diverged"], data.get("timings", {}), data.get("meta", {}))
