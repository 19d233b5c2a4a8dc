"""Command line front end: solve, wave, selfsim, converge, verify.

Exit codes: 0 ok, 1 verification failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import platform
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy

from bfburgers import exact_solutions as ex
from bfburgers import initial_data as idata
from bfburgers import io
from bfburgers import limit_analysis as la
from bfburgers.config import ConfigError, RunConfig, build_run_config, load_config
from bfburgers.model import ModelError, ModelSpec, builtin_model, validate_model
from bfburgers.viscous_solver import (DiagnosticsReport, Grid, GridField, NumericalInstability,
                                      SolverConfig, Trajectory, l1_distance, solve)

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

__version__ = "0.1.0"


class VerificationFailure(RuntimeError):
    pass


# {{{ building blocks from a config

def build_model(cfg: RunConfig) -> ModelSpec:
    try:
        model = builtin_model(cfg.model_name, cfg.q_bar, cfg.beta)
    except (ModelError, ValueError) as exc:
        raise ConfigError(str(exc), key="model.name") from None
    rep = validate_model(model)
    if not rep.passed:
        raise ConfigError(f"model fails validation: {rep.failures()}", key="model.name")
    return model


def build_datum(cfg: RunConfig) -> idata.InitialDatum:
    try:
        if cfg.datum_csv is not None:
            return idata.read_csv_datum(cfg.datum_csv, cfg.datum_jumps)
        params = dict(cfg.datum_params)
        if "n_teeth" in params:
            params["n_teeth"] = int(params["n_teeth"])
        return idata.preset(cfg.datum_preset, **params)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc), key="datum.csv" if cfg.datum_csv else "datum.preset") from None


def build_grid(cfg: RunConfig) -> Grid:
    return Grid(cfg.x_left, cfg.x_right, cfg.n)


def initial_field(cfg: RunConfig, datum: idata.InitialDatum, grid: Grid) -> GridField:
    """Sampled datum, mollified at width ``h`` when asked (``auto``: 2 dx for
    discontinuous data, no smoothing otherwise)."""
    h = cfg.mollify_h
    if h == "auto":
        h = 2.0 * grid.dx if datum.jumps else None
    if h is None:
        return datum.sample(grid)
    return idata.mollify(datum, idata.bump_kernel(), h, grid, strict=False)


def solver_config(cfg: RunConfig, snapshot_times=None, epsilon=None) -> SolverConfig:
    return SolverConfig(epsilon=cfg.epsilon if epsilon is None else epsilon,
                        cfl_safety=cfg.cfl_safety, boundary=cfg.boundary, t_end=cfg.t_end,
                        snapshot_times=tuple(cfg.snapshot_times if snapshot_times is None
                                             else snapshot_times))


def _versions():
    return {"bfburgers": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}

# }}}


# {{{ run directory

def snap_name(t):
    return f"snap_{io.time_tag(t)}.csv"


def write_snapshot(out, state: GridField):
    io.write_csv(os.path.join(out, snap_name(state.t)), ["x", "u", "t"],
                 [state.x, state.u, np.full(state.u.size, state.t)])


def read_snapshot(path) -> GridField:
    cols = io.read_csv(path)
    x, u, t = cols["x"], cols["u"], cols["t"]
    if x.size < 16:
        raise ValueError(f"{path}: too few nodes")
    grid = Grid(float(x[0]), float(x[-1]), int(x.size))
    if not np.allclose(grid.x, x, rtol=0, atol=1e-9 * max(1.0, abs(grid.x_right - grid.x_left))):
        raise ValueError(f"{path}: nodes are not uniform")
    return GridField(grid, float(t[0]), u)


def write_run(out, cfg: RunConfig, model: ModelSpec, traj: Trajectory, command: str,
              svg: bool) -> dict:
    io.ensure_dir(out)
    states = [traj.initial] + [s for s in traj.snapshots if s.t != traj.initial.t]
    for st in states:
        write_snapshot(out, st)
    io.write_rows(os.path.join(out, "diag.csv"),
                  ["step", "t", "dt", "sup", "l1", "tv", "qbv", "mass"], traj.report.rows())
    g = traj.initial.grid
    meta = {
        "command": command,
        "config": cfg.raw,
        "model": {"name": model.name, "q_bar": model.q_bar, "beta": model.beta,
                  "q_minus_inf": model.q_minus_inf, "q_plus_inf": model.q_plus_inf},
        "grid": {"x_left": g.x_left, "x_right": g.x_right, "n": g.n, "dx": g.dx},
        "solver": dataclasses.asdict(traj.config),
        "constants": dataclasses.asdict(traj.constants) if traj.constants else None,
        "steps": len(traj.report),
        "snapshots": [{"t": st.t, "file": snap_name(st.t)} for st in states],
        "versions": _versions(),
    }
    io.write_json(os.path.join(out, "meta.json"), meta)
    if svg:
        plots = io.ensure_dir(os.path.join(out, "plots"))
        for st in states:
            tag = io.time_tag(st.t)
            io.svg_polyline(os.path.join(plots, f"u_{tag}.svg"), [(f"t={st.t:g}", st.x, st.u)],
                            title=f"u at t = {st.t:g}")
            q = la.q_lim_profile(st, model)
            io.svg_polyline(os.path.join(plots, f"q_{tag}.svg"), [(f"t={st.t:g}", q.x, q.q_values)],
                            title=f"q_lim at t = {st.t:g}", ylabel="q")
    return meta


def load_run(run_dir) -> tuple:
    """``(cfg, model, trajectory)`` from a run directory."""
    meta_path = os.path.join(run_dir, "meta.json")
    if not os.path.isfile(meta_path):
        raise ConfigError(f"{run_dir} has no meta.json")
    try:
        meta = io.read_json(meta_path)
        values = {str(k): str(v) for k, v in meta["config"].items()}
        files = [s["file"] for s in meta["snapshots"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"malformed meta.json: {exc}") from None
    cfg = build_run_config(values)
    model = build_model(cfg)
    try:
        states = [read_snapshot(os.path.join(run_dir, f)) for f in files]
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"malformed snapshot: {exc}") from None
    if not states:
        raise ConfigError("run directory lists no snapshots")
    states.sort(key=lambda s: s.t)
    grids = {(s.grid.x_left, s.grid.x_right, s.grid.n) for s in states}
    if len(grids) != 1:
        raise ConfigError("snapshots live on different grids")
    initial = states[0]
    snaps = [s for s in states if s.t > initial.t] or states
    traj = Trajectory(initial, snaps, DiagnosticsReport(), model, solver_config(cfg), None)
    return cfg, model, traj

# }}}


# {{{ subcommands

def run_solve(cfg: RunConfig, out, svg=True) -> Trajectory:
    model = build_model(cfg)
    datum = build_datum(cfg)
    grid = build_grid(cfg)
    u0 = initial_field(cfg, datum, grid)
    traj = solve(u0, model, solver_config(cfg))
    write_run(out, cfg, model, traj, "solve", svg)
    return traj


def run_wave(cfg: RunConfig, out, svg=True) -> dict:
    model = build_model(cfg)
    io.ensure_dir(out)
    cls = ex.classify_wave(model, cfg.b_minus, cfg.b_plus)
    report = {"classification": cls.kind, "b_minus": cls.b_minus, "b_plus": cls.b_plus,
              "speed": cls.speed, "m": cls.m, "argmin": cls.argmin, "b1": cls.b1, "b2": cls.b2,
              "q_minus_inf": model.q_minus_inf}
    if cls.kind != ex.NO_WAVE:
        xi = np.linspace(cfg.wave_xi[0], cfg.wave_xi[1], int(cfg.wave_xi[2]))
        prof = ex.wave_profile(model, cfg.b_minus, cfg.b_plus, xi)
        qh = prof.q_hat(model)
        io.write_csv(os.path.join(out, "wave.csv"), ["xi", "b", "q_hat"], [xi, prof.b_values, qh])
        _, res = ex.wave_residual(prof, model, exclude=2.0 * (xi[1] - xi[0]))
        report.update({"quad_error": prof.quad_error, "ode_residual": float(np.max(np.abs(res)))
                       if res.size else 0.0, "tail_rates": list(prof.tail_rates)})
        if svg:
            plots = io.ensure_dir(os.path.join(out, "plots"))
            io.svg_polyline(os.path.join(plots, "wave.svg"), [("b", xi, prof.b_values)],
                            title=f"traveling wave ({cls.kind})", xlabel="xi", ylabel="b")
            io.svg_polyline(os.path.join(plots, "wave_q.svg"), [("Q(b')", xi, qh)],
                            title="Q of the profile slope", xlabel="xi", ylabel="q")
    io.write_json(os.path.join(out, "report.json"), report)
    return report


@dataclass
class StudyResult:
    rows: list                       # (dx, epsilon, l1_error, observed_order)
    oracle: str
    drift: list = field(default_factory=list)     # shock drift in cells, per row
    kind: Optional[str] = None

    @property
    def errors(self):
        return [r[2] for r in self.rows]

    @property
    def orders(self):
        return [r[3] for r in self.rows[1:]]


def _front_position(x, u, level):
    i = np.flatnonzero((u[:-1] - level) * (u[1:] - level) <= 0)
    if not i.size:
        return float("nan")
    i = int(i[np.argmax(np.abs(np.diff(u))[i])])
    du = u[i + 1] - u[i]
    return float(x[i] + (level - u[i]) / du * (x[i + 1] - x[i])) if du else float(x[i])


def run_converge(cfg: RunConfig, out, svg=True) -> StudyResult:
    model = build_model(cfg)
    if not cfg.resolutions:
        raise ConfigError("converge needs study.resolutions", key="study.resolutions")
    res = sorted(cfg.resolutions, reverse=True)
    if cfg.eps_list:
        pairs = sorted(zip(cfg.resolutions, cfg.eps_list), key=lambda p: -p[0])
        eps = [e for _, e in pairs]
    else:
        eps = list(res)      # epsilon = dx
    io.ensure_dir(out)
    rows, drift = [], []
    kind = None
    if cfg.study_oracle == "wave":
        cls = ex.classify_wave(model, cfg.b_minus, cfg.b_plus)
        if cls.kind == ex.NO_WAVE:
            raise ConfigError(f"no traveling wave connects {cfg.b_minus} to {cfg.b_plus}",
                              key="wave.b_minus")
        kind = cls.kind
        prof = ex.wave_profile(model, cfg.b_minus, cfg.b_plus, np.linspace(-1.0, 1.0, 3))
        s = prof.speed
        errs = []
        for dx, e in zip(res, eps):
            grid = Grid.from_spacing(cfg.x_left, cfg.x_right, dx)
            u0 = GridField(grid, 0.0, ex.profile_at(prof, grid.x))
            traj = solve(u0, model, SolverConfig(epsilon=e, cfl_safety=cfg.cfl_safety,
                                                 boundary=cfg.boundary, t_end=cfg.t_end))
            exact = GridField(grid, cfg.t_end, ex.profile_at(prof, grid.x - s * cfg.t_end))
            errs.append(l1_distance(traj.final, exact))
            if kind == ex.DISCONTINUOUS:
                level = 0.5 * (prof.b1 + prof.b2)
                drift.append((_front_position(grid.x, traj.final.u, level) - s * cfg.t_end) / dx)
        oracle = f"traveling wave {cfg.b_minus} -> {cfg.b_plus} ({kind}), shifted by s t_end"
    else:
        datum = build_datum(cfg)
        finals = []
        for dx, e in zip(res, eps):
            grid = Grid.from_spacing(cfg.x_left, cfg.x_right, dx)
            u0 = initial_field(cfg, datum, grid)
            traj = solve(u0, model, SolverConfig(epsilon=e, cfl_safety=cfg.cfl_safety,
                                                 boundary=cfg.boundary, t_end=cfg.t_end))
            finals.append(traj.final)
        ref = finals[-1]
        errs = []
        for st in finals[:-1]:
            r = np.interp(st.x, ref.x, ref.u)
            errs.append(float(np.sum(np.abs(st.u - r)) * st.grid.dx))
        res, eps = res[:-1], eps[:-1]
        oracle = f"finest run dx = {ref.grid.dx!r}"
    for k, (dx, e, err) in enumerate(zip(res, eps, errs)):
        order = math.nan
        if k > 0 and err > 0 and errs[k - 1] > 0:
            order = math.log(errs[k - 1] / err) / math.log(res[k - 1] / dx)
        rows.append((dx, e, err, order))
    study = StudyResult(rows, oracle, drift, kind)
    io.write_rows(os.path.join(out, "study.csv"), ["dx", "epsilon", "l1_error", "observed_order"], rows)
    io.write_json(os.path.join(out, "report.json"),
                  {"oracle": oracle, "kind": kind, "rows": rows, "drift_cells": drift,
                   "config": cfg.raw, "versions": _versions()})
    if svg and len(rows) > 0:
        plots = io.ensure_dir(os.path.join(out, "plots"))
        io.svg_polyline(os.path.join(plots, "convergence.svg"),
                        [("log10 L1 error", np.log10([r[0] for r in rows]),
                          np.log10([max(r[2], 1e-300) for r in rows]))],
                        title="L1 error against dx", xlabel="log10 dx", ylabel="log10 error")
    return study


def run_selfsim(cfg: RunConfig, out, svg=True) -> ex.SelfSimilarFit:
    model = build_model(cfg)
    if cfg.model_name != "zero_flux_beta":
        raise ConfigError("selfsim needs model.name = zero_flux_beta", key="model.name")
    if cfg.beta is None or cfg.beta <= 2:
        raise ConfigError("the self-similar regime needs model.beta > 2", key="model.beta")
    if cfg.datum_preset != "step":
        raise ConfigError("selfsim needs datum.preset = step", key="datum.preset")
    datum = build_datum(cfg)
    grid = build_grid(cfg)
    u0 = datum.sample(grid)
    traj = solve(u0, model, solver_config(cfg))
    write_run(out, cfg, model, traj, "selfsim", svg)
    opts = {}
    for key in ("z_hi", "z_lo_cells", "min_jump_fraction", "jump_floor"):
        if f"selfsim.{key}" in cfg.raw:
            opts[key] = float(cfg.raw[f"selfsim.{key}"])
    try:
        fit = ex.fit_similarity(traj.snapshots, beta=cfg.beta, u_left=cfg.datum_params.get("u", 1.0),
                                **opts)
    except ValueError as exc:
        # the run itself is kept; only the grid/snapshot choice is unusable
        raise ConfigError(f"{exc}; refine the grid or widen selfsim.z_hi", key="grid.n") from None
    series = []
    floor = opts.get("jump_floor", 0.05) * fit.u_left
    for snap in traj.snapshots:
        i = int(np.searchsorted(snap.x, 0.0))
        sq = math.sqrt(snap.t)
        z, h = snap.x[i:] / sq, snap.u[i:] / sq
        io.write_csv(os.path.join(out, f"collapse_{io.time_tag(snap.t)}.csv"), ["z", "h"], [z, h])
        series.append((f"t={snap.t:g}", z, h))
    transitions = [{"t": t, "jump": j, "predicted_jump": pj, "has_jump": bool(j >= floor),
                    "before_t_star": bool(t < fit.t_star_est)} for t, j, pj in fit.jumps]
    payload = dataclasses.asdict(fit)
    payload["transitions"] = transitions
    io.write_json(os.path.join(out, "fit.json"), payload)
    if svg:
        plots = io.ensure_dir(os.path.join(out, "plots"))
        io.svg_polyline(os.path.join(plots, "collapse.svg"), series[:7],
                        title="rescaled profiles u/sqrt(t) against x/sqrt(t)", xlabel="z", ylabel="h")
    return fit


def run_verify(run_dir, out=None, svg=False) -> dict:
    """Aggregate the post-processing checks; raises VerificationFailure on a failed check."""
    cfg, model, traj = load_run(run_dir)
    out = run_dir if out is None else io.ensure_dir(out)
    opts = cfg.verify
    thr = opts.get("slope_threshold")
    snaps = sorted(traj.snapshots, key=lambda s: s.t)
    profiles = [la.q_lim_profile(s, model) for s in snaps]
    moduli = [{"t": p.t, "modulus": la.continuity_modulus(p)} for p in profiles]

    records = la.track_and_check_hugoniot(traj, model, slope_threshold=thr)
    thr_used = la.tracking_threshold(traj) if thr is None else thr
    verdicts, failures = [], []
    for s in snaps:
        for sh in la.detect_shocks(s, model, thr_used):
            v = la.condition_E_check(model.f, sh.u_minus, sh.u_plus)
            verdicts.append({"t": s.t, "x": sh.x, "u_minus": sh.u_minus, "u_plus": sh.u_plus,
                             "satisfied": v.satisfied, "worst_violation": v.worst_violation,
                             "worst_at": v.worst_at})
            if not v.satisfied:
                failures.append(f"condition E violated at t={s.t:g}, x={sh.x:.6g} "
                                f"({sh.u_minus:.6g} -> {sh.u_plus:.6g})")
    for r in records:
        if r.max_residual > opts["hugoniot_tol"]:
            failures.append(f"Hugoniot residual {r.max_residual:.3g} exceeds "
                            f"{opts['hugoniot_tol']:g} on the shock starting at x={r.locations[0]:.6g}")

    weak, weak_note = [], ""
    try:
        res = la.weak_residual(traj, model, profiles)
        weak = [{"xc": w.bump.xc, "sx": w.bump.sx, "tc": w.bump.tc, "st": w.bump.st,
                 "residual": w.residual, "relative": w.relative} for w in res]
        worst = max(w.relative for w in res)
        if worst > opts["weak_tol"]:
            failures.append(f"weak-form residual {worst:.3g} exceeds {opts['weak_tol']:g}")
    except ValueError as exc:
        weak_note = str(exc)

    trace = la.initial_trace_check(traj, traj.initial)
    report = {
        "run_dir": os.fspath(run_dir),
        "qlim_modulus": moduli[-1]["modulus"] if moduli else None,
        "qlim_moduli": moduli,
        "shocks": [r.as_dict() for r in records],
        "condition_E": verdicts,
        "weak_residuals": weak,
        "weak_note": weak_note,
        "initial_trace": [{"t": t, "l1": d} for t, d in trace],
        "failures": failures,
        "passed": not failures,
    }
    io.write_json(os.path.join(out, "report.json"), report)
    if svg:
        plots = io.ensure_dir(os.path.join(out, "plots"))
        io.svg_polyline(os.path.join(plots, "qlim_final.svg"),
                        [("q_lim", profiles[-1].x, profiles[-1].q_values)],
                        title=f"q_lim at t = {snaps[-1].t:g}", ylabel="q")
    if failures:
        raise VerificationFailure("; ".join(failures))
    return report

# }}}


# {{{ entry point

def _parser():
    p = argparse.ArgumentParser(prog="bfburgers",
                                description="Bounded-flux Burgers solver and verification harness")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("solve", "run the viscous solver"),
                           ("wave", "tabulate a traveling-wave profile"),
                           ("selfsim", "step run with f = 0 and similarity fit"),
                           ("converge", "refinement study against an oracle")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True, help="flat section.key = value file or meta.json")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--svg", choices=("on", "off"), default=None)
    sp = sub.add_parser("verify", help="check a run directory")
    sp.add_argument("run_dir", nargs="?")
    sp.add_argument("--config", help="unused; the run directory carries its config")
    sp.add_argument("--out", help="report directory (default: the run directory)")
    sp.add_argument("--svg", choices=("on", "off"), default="off")
    return p


def _write_failure(out, exc):
    if out:
        try:
            io.ensure_dir(out)
            io.write_json(os.path.join(out, "failure.json"),
                          {"error": type(exc).__name__, "message": str(exc)})
        except OSError:
            pass


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out = args.out
    try:
        if args.command == "verify":
            run_dir = args.run_dir or out
            if not run_dir:
                raise ConfigError("verify needs a run directory")
            report = run_verify(run_dir, out, svg=args.svg == "on")
            print(f"verify: passed ({len(report['shocks'])} tracked shocks)")
            return EXIT_OK
        values, lines = load_config(args.config)
        need_grid = args.command not in ("wave", "converge")
        need_datum = args.command in ("solve", "selfsim") or values.get("study.oracle") == "self"
        cfg = build_run_config(values, lines, need_grid=need_grid, need_datum=need_datum)
        svg = cfg.svg if args.svg is None else args.svg == "on"
        if args.command == "solve":
            traj = run_solve(cfg, out, svg)
            print(f"solve: {len(traj.report)} steps, {len(traj.snapshots)} snapshots -> {out}")
        elif args.command == "wave":
            rep = run_wave(cfg, out, svg)
            print(f"wave: {rep['classification']}, speed {rep['speed']!r}")
        elif args.command == "selfsim":
            fit = run_selfsim(cfg, out, svg)
            print(f"selfsim: alpha {fit.alpha_est:.4f} (theory {fit.alpha_theory}), "
                  f"h(0) {fit.h0_est:.4f}, t* {fit.t_star_est:.4g}, jump gone at {fit.t_disappear:.4g}")
        elif args.command == "converge":
            study = run_converge(cfg, out, svg)
            for dx, e, err, order in study.rows:
                print(f"dx={dx:.6g} eps={e:.6g} L1={err:.6e} order={order:.3f}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerificationFailure as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (NumericalInstability, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        _write_failure(out, exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

# }}}

# vim: foldmethod=marker
