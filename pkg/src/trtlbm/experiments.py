"""Experiment drivers behind the command-line subcommands.

Each driver takes an :class:`ExperimentConfig` and an output directory,
writes CSV/PGM artifacts plus ``manifest.cfg``, and returns an in-memory
summary for programmatic use.
"""
from __future__ import annotations

import csv
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .config import (ExperimentConfig, build_datum, build_flux, build_grid, build_relax, build_scheme,
                     n_ladder, relax_line, relax_list, write_manifest)
from .kernel import GridSpec, InitialDatum, cell_averages, run, write_field_csv
from .monotonicity import (MonotonicityProblem, apex_cells, bgk_upper_bound, diagonal_last_inside,
                           is_monotone, magic_line_last_inside, magic_max_omega_a, rasterize,
                           structural_checks)
from .reference import burgers_hat_exact, burgers_indicator_exact, godunov_reference
from .scheme import FluxModel, RelaxPair, SchemeSpec


def relax_label(relax: RelaxPair) -> str:
    if relax.is_bgk:
        return f"bgk_{relax.omega_a:.6g}"
    if relax.is_magic:
        return f"magic_{relax.omega_a:.6g}"
    return f"trt_{relax.omega_s:.6g}_{relax.omega_a:.6g}"


def problem_for(cfg: ExperimentConfig) -> MonotonicityProblem:
    spec = build_scheme(cfg)
    flux = build_flux(cfg, spec.d)
    m = cfg.number("check.m") if cfg.has("check.m") else build_datum(cfg).m
    return MonotonicityProblem(spec, flux, m)


def _out_dir(out) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_rows(path, header, rows) -> None:
    """RFC-4180 CSV with 17 significant digits for floats."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


# ---------------------------------------------------------------- check


def cmd_check(cfg: ExperimentConfig, out=None, echo=print) -> dict:
    problem = problem_for(cfg)
    relax = build_relax(cfg)
    verdict = is_monotone(problem, relax)
    bound = bgk_upper_bound(problem)
    magic = magic_max_omega_a(problem)
    echo(f"relaxation  omega_s={relax.omega_s:.17g} omega_a={relax.omega_a:.17g}")
    echo(f"verdict     {'inside' if verdict.inside else 'outside'}")
    echo(f"margin zero-velocity  {verdict.zero_margin:.17g}")
    for j, mg in enumerate(verdict.link_margins):
        echo(f"margin link {j + 1}        {mg:.17g}")
    echo(f"G           {', '.join(f'{g:.17g}' for g in problem.G)}")
    echo("bgk_upper_bound  " + ("empty" if bound is None else f"{bound:.17g}"))
    if magic is None:
        echo("magic_max_omega_a  empty")
    else:
        echo(f"magic_max_omega_a  {magic.omega_a:.17g}" + ("" if magic.attained else " (supremum, not attained)"))
    result = {"verdict": verdict, "bgk_upper_bound": bound, "magic": magic, "relax": relax}
    if out is not None:
        path = _out_dir(out)
        write_manifest(path / "manifest.cfg", cfg)
        write_rows(path / "check.csv", ["constraint", "margin"],
                   [("zero", verdict.zero_margin)] + [(f"link_{j + 1}", v) for j, v in enumerate(verdict.link_margins)])
    return result


# ---------------------------------------------------------------- run


def reference_for(cfg: ExperimentConfig, spec: SchemeSpec, flux: FluxModel, datum: InitialDatum,
                  grid: GridSpec, T: float, refine: int | None = None):
    """Analytic solution when one is known for this setting, refined Godunov otherwise."""
    kind = cfg.string("run.reference")
    if kind == "none":
        return None
    exact = None
    if spec.d == 1 and flux.name == "burgers" and (cfg.number("grid.low"), cfg.number("grid.high")) == (-1.0, 1.0):
        if datum.name == "indicator" and T < 1.0:
            exact = burgers_indicator_exact()
        elif datum.name == "hat" and T < 0.5:
            exact = burgers_hat_exact()
    if kind == "exact":
        if exact is None:
            raise cfg.error("run.reference", "no analytic solution for this setting")
        return exact
    if kind == "auto" and exact is not None:
        return exact
    if kind not in ("auto", "godunov"):
        raise cfg.error("run.reference", f"expected exact, godunov, auto or none, got {kind!r}")
    r = refine or cfg.integer("run.oracle_refine")
    return godunov_reference(flux, datum, grid, T, r=r)


def cmd_run(cfg: ExperimentConfig, out, oracle_refine: int | None = None, echo=print):
    spec = build_scheme(cfg)
    flux = build_flux(cfg, spec.d)
    datum = build_datum(cfg)
    grid = build_grid(cfg)
    relax = build_relax(cfg)
    T = cfg.number("run.T")
    ref = reference_for(cfg, spec, flux, datum, grid, T, oracle_refine)
    report = run(spec, flux, datum, grid, relax, T, reference=ref,
                 observe_every=cfg.integer("run.observe_every"))
    path = _out_dir(out)
    write_manifest(path / "manifest.cfg", cfg)
    report.write_csv(path / "timeseries.csv")
    if cfg.raw("output.fields"):
        f = report.final_f if cfg.raw("output.distributions") else None
        write_field_csv(path / "field_final.csv", grid, report.final_u, f)
        write_field_csv(path / "field_initial.csv", grid, cell_averages(datum, grid))
    outside = int(np.sum(np.abs(report.final_u) > datum.m + 1e-10)) if not report.blew_up else -1
    echo(f"steps {report.final_step}  max_u {report.max_u:.17g}  min_u {report.min_u:.17g}")
    if report.linf_l1_err is not None:
        echo(f"linf_l1_err {report.linf_l1_err:.17g}")
    if report.blew_up:
        echo(f"blow-up: {report.message}")
    write_rows(path / "summary.csv", ["key", "value"], [
        ("steps", report.final_step), ("max_u", report.max_u), ("min_u", report.min_u),
        ("linf_l1_err", "" if report.linf_l1_err is None else report.linf_l1_err),
        ("blew_up", int(report.blew_up)), ("cells_outside_final", outside),
    ])
    return report


# ---------------------------------------------------------------- convergence


@dataclass
class ConvergenceRow:
    relax: RelaxPair
    n: int
    dx: float
    error: float
    blew_up: bool


def cmd_convergence(cfg: ExperimentConfig, out, threads: int = 1, oracle_refine: int | None = None,
                    quick: bool = False, echo=print) -> dict:
    spec = build_scheme(cfg)
    flux = build_flux(cfg, spec.d)
    datum = build_datum(cfg)
    T = cfg.number("run.T")
    relaxes = relax_list(cfg)
    if not relaxes:
        raise cfg.error("relax.sweep", "convergence needs relax.sweep or relax.preset")
    ns = n_ladder(cfg, quick)
    grids = {n: build_grid(cfg, n) for n in ns}
    refs: dict[int, object] = {}
    lock = threading.Lock()

    def reference(n):
        # one oracle per resolution, shared by every relaxation setting
        with lock:
            if n not in refs:
                refs[n] = reference_for(cfg, spec, flux, datum, grids[n], T, oracle_refine)
            return refs[n]

    def job(args):
        relax, n = args
        rep = run(spec, flux, datum, grids[n], relax, T, reference=reference(n), keep_final_f=False)
        return ConvergenceRow(relax, n, grids[n].dx, rep.linf_l1_err, rep.blew_up)

    jobs = [(r, n) for r in relaxes for n in ns]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(job, jobs))

    path = _out_dir(out)
    write_manifest(path / "manifest.cfg", cfg, {"grid.resolved.n_list": ns})
    tables = {}
    for relax in relaxes:
        mine = [row for row in rows if row.relax == relax]
        label = relax_label(relax)
        dg.write_convergence_csv(path / f"convergence_{label}.csv", [r.dx for r in mine], [r.error for r in mine])
        orders = dg.convergence_order([r.error for r in mine])
        tables[relax] = mine
        echo(f"{label}")
        for i, r in enumerate(mine):
            order = "" if i == 0 else f"{orders[i - 1]:6.2f}"
            flag = "  blow-up" if r.blew_up else ""
            echo(f"  dx={r.dx:.2e}  error={r.error:.3e}  {order}{flag}")
    write_rows(path / "blowups.csv", ["relax", "dx", "blew_up"],
               [(relax_label(r.relax), r.dx, int(r.blew_up)) for r in rows])
    return tables


# ---------------------------------------------------------------- region


def cmd_region(cfg: ExperimentConfig, out, quick: bool = False, echo=print):
    problem = problem_for(cfg)
    res = 64 if quick else cfg.integer("region.resolution")
    raster = rasterize(problem, res)
    bound = bgk_upper_bound(problem)
    magic = magic_max_omega_a(problem)
    report = structural_checks(raster, bound, apex_cells(problem))
    path = _out_dir(out)
    write_manifest(path / "manifest.cfg", cfg, {"region.resolved.resolution": res})
    raster.write_csv(path / "region.csv")
    raster.write_pgm(path / "region.pgm")
    diag = diagonal_last_inside(raster)
    mline = magic_line_last_inside(raster)
    rows = [
        ("convexity_ok", int(report.convexity_ok)),
        ("no_omega_two_ok", int(report.no_omega_two_ok)),
        ("diagonal_interior_ok", int(report.diagonal_interior_ok)),
        ("diagonal_checked", int(report.diagonal_checked)),
        ("bgk_upper_bound", "" if bound is None else bound),
        ("magic_max_omega_a", "" if magic is None else magic.omega_a),
        ("diagonal_last_inside", "" if diag is None else diag),
        ("magic_line_last_inside", "" if mline is None else mline),
    ]
    write_rows(path / "structure.csv", ["key", "value"], rows)
    for k, v in rows:
        echo(f"{k:24s} {v}")
    return raster, report


# ---------------------------------------------------------------- eqdist


def cmd_eqdist(cfg: ExperimentConfig, out, threads: int = 1, quick: bool = False, echo=print) -> dict:
    spec = build_scheme(cfg)
    flux = build_flux(cfg, spec.d)
    relax = build_relax(cfg)
    T = cfg.number("run.T")
    ns = [int(v) for v in cfg.list("grid.n_list")] or [64, 128, 256]
    if quick:
        ns = ns[:2]
    data = [str(v) for v in cfg.list("datum.variants")] or [cfg.string("datum.name")]
    grids = {n: build_grid(cfg, n) for n in ns}

    def job(args):
        n, name = args
        datum = build_datum(cfg, name)
        rep = run(spec, flux, datum, grids[n], relax, T, keep_final_f=False)
        return n, name, datum, rep

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(job, [(n, name) for n in ns for name in data]))

    path = _out_dir(out)
    write_manifest(path / "manifest.cfg", cfg, {"grid.resolved.n_list": ns, "datum.resolved.variants": data})
    summary = {}
    rows = []
    for n, name, datum, rep in results:
        write_rows(path / f"eqdist_n{n}_{name}.csv", ["step", "t", "eq_dist"],
                   zip(rep.steps, rep.times, rep.eq_dist))
        tv0 = rep.tv_u[0]
        plateau = rep.plateau("eq_dist")
        summary[(n, name)] = {"plateau": plateau, "tv0": tv0, "report": rep}
        rows.append((n, grids[n].dx, name, tv0, plateau))
        echo(f"n={n:5d} datum={name:18s} TV0={tv0:.3f} plateau={plateau:.4e}")
    write_rows(path / "plateaus.csv", ["n", "dx", "datum", "tv0", "plateau"], rows)
    scal = []
    for name in data:
        for a, b in zip(ns, ns[1:]):
            scal.append(("dx_halving", name, a, b, summary[(b, name)]["plateau"] / summary[(a, name)]["plateau"]))
    for n in ns:
        for a, b in zip(data, data[1:]):
            scal.append(("datum_change", f"{a}->{b}", n, n, summary[(n, b)]["plateau"] / summary[(n, a)]["plateau"]))
    write_rows(path / "scaling.csv", ["kind", "datum", "n_from", "n_to", "ratio"], scal)
    for row in scal:
        echo(f"{row[0]:13s} {row[1]:30s} {row[2]}->{row[3]}  ratio {row[4]:.3f}")
    return summary


# ---------------------------------------------------------------- maxprinciple


def cmd_maxprinciple(cfg: ExperimentConfig, out, threads: int = 1, quick: bool = False, echo=print) -> list:
    spec = build_scheme(cfg)
    flux = build_flux(cfg, spec.d)
    datum = build_datum(cfg)
    grid = build_grid(cfg)
    T = cfg.number("run.T")
    line, values = relax_line(cfg)
    if quick:
        values = values[:: max(1, len(values) // 8)]
    threshold = cfg.number("maxprinciple.threshold")
    problem = MonotonicityProblem(spec, flux, datum.m)

    def job(w):
        relax = RelaxPair.bgk(float(w)) if line == "bgk" else RelaxPair.magic(float(w))
        rep = run(spec, flux, datum, grid, relax, T, keep_final_f=False)
        return float(w), rep.max_u, rep.min_u, rep.blew_up, is_monotone(problem, relax).inside

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(job, values))
    path = _out_dir(out)
    write_manifest(path / "manifest.cfg", cfg, {"relax.resolved.values": [float(v) for v in values]})
    out_rows = []
    for w, mx, mn, blew, inside in rows:
        violated = (not math.isfinite(mx)) or mx > datum.m + threshold or mn < -datum.m - threshold or blew
        out_rows.append((w, mx, mn, int(violated), int(inside)))
    write_rows(path / "maxprinciple.csv", ["omega_a", "max_u", "min_u", "violated", "inside_M"], out_rows)
    first = next((r[0] for r in out_rows if r[3]), None)
    echo(f"line {line}: first violation at " + ("none" if first is None else f"{first:.6g}"))
    return out_rows


def first_violation(rows) -> float | None:
    return next((r[0] for r in rows if r[3]), None)
