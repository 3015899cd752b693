"""Command-line front end: ``chiralchaos <command> [--config F | --preset N] --out DIR``.

Every command writes plot-ready CSV/JSON into ``--out``; ``--figures`` also
renders PNGs next to them.  Exit status is 0 when everything completed, 1 if
some grid points failed (a summary is printed), 2 for configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import metric_C, metric_S, observe
from .analytic import (achievable_region, delta_intensity_steady, region_boundary,
                       steady_residual, steady_state, tip_scale_ratios, write_region_csv)
from .config import ConfigError, RunConfig, load_config, load_preset, preset_names
from .integrator import StiffnessError, integrate
from .lyapunov import max_lyapunov
from .model import DivergenceError, Port
from .sensing import NoTransitionError, RateRow, RateTable, SensingWindow, build_window
from .sweep import (Axis, SweepGrid, TaskConfig, TaskKind, assemble_phase_diagram, lambda_table,
                    metrics_rows, run_sweep, write_bifurcation_csv, write_rows_csv)

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


# ---------------------------------------------------------------------------
# helpers


def _write_json(obj, path: Path) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return path


def _grid(cfg: RunConfig, command: str) -> SweepGrid:
    if cfg.grid is None:
        raise ConfigError(f"'{command}' needs a 'grid' section")
    return SweepGrid(cfg.grid, cfg.params, cfg.drive)


def _task(cfg: RunConfig, kind: TaskKind, **extra) -> TaskConfig:
    return TaskConfig(kind=kind, ports=cfg.ports, run=cfg.sensing_config(), **extra)


def _report_failures(result) -> int:
    bad = result.failures
    if not bad:
        return EXIT_OK
    print(f"{len(bad)} of {len(result.rows)} rows failed:", file=sys.stderr)
    for r in bad[:10]:
        print(f"  {r.get('error')}", file=sys.stderr)
    return EXIT_PARTIAL


def _window(cfg: RunConfig) -> SensingWindow:
    w = cfg.window
    if w is None:
        raise ConfigError("this command needs a 'window' section")
    if w.explicit:
        return SensingWindow.from_critical(w.control, w.crit_port1, w.crit_port2, w.working_point)
    return build_window(cfg.params, w.control, w.range, w.resolution, drive=cfg.drive,
                        working_point=w.working_point, config=cfg.sensing_config())


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: RunConfig, out: Path, args) -> int:
    traj = integrate(cfg.params, cfg.drive, cfg.integration)
    cols = ["tau", "i_a", "i_b", "q", "p"]
    data = [traj.taus, traj.i_a, traj.i_b, traj.q, traj.p]
    if args.raw:
        cols += ["re_a_cw", "im_a_cw", "re_a_ccw", "im_a_ccw",
                 "re_b_cw", "im_b_cw", "re_b_ccw", "im_b_ccw"]
        data += [traj.states[:, k] for k in range(8)]
    with open(out / "trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in zip(*data):
            w.writerow([repr(float(v)) for v in row])
    if args.figures:
        from . import plotting

        plotting.timeseries(traj, out / "trajectory.png", f"port {int(cfg.drive.port)}")
    return EXIT_OK


def cmd_classify(cfg: RunConfig, out: Path, args) -> int:
    obs = observe(cfg.params, cfg.drive, cfg.integration, cfg.lyapunov, cfg.thresholds)
    ph = obs.phase
    _write_json({"port": int(cfg.drive.port), "label": ph.label.value,
                 "lambda_max": ph.lambda_max, "n_clusters": ph.n_clusters,
                 "flatness": ph.flatness, "flags": list(ph.flags), "i_a_max": obs.i_a_max},
                out / "classify.json")
    print(ph.label.value)
    return EXIT_OK


def cmd_phase_diagram(cfg: RunConfig, out: Path, args) -> int:
    result = run_sweep(_grid(cfg, "phase-diagram"), _task(cfg, TaskKind.CLASSIFY),
                       args.workers, out)
    if set(cfg.ports) == {1, 2}:
        diagram = assemble_phase_diagram(result)
        _write_json({"n_cells": int(diagram.dual_chaos.size),
                     "n_dual_chaos": int(diagram.dual_chaos.sum()),
                     "n_chaos_port1": int(diagram.chaotic(1).sum()),
                     "n_chaos_port2": int(diagram.chaotic(2).sum()),
                     "partial": diagram.partial}, out / "phase_summary.json")
        if args.figures:
            from . import plotting

            plotting.phase_diagram(diagram, out / "phase_diagram.png")
    return _report_failures(result)


def cmd_bifurcation(cfg: RunConfig, out: Path, args) -> int:
    grid = _grid(cfg, "bifurcation")
    if len(grid.axes) != 1:
        raise ConfigError("bifurcation needs a one-axis grid")
    result = run_sweep(grid, _task(cfg, TaskKind.BIFURCATION), args.workers, out)
    for port in cfg.ports:
        write_bifurcation_csv(result, out / f"bifurcation_port{port}.csv", port)
    if args.figures:
        from . import plotting

        plotting.bifurcation(result.rows, out / "bifurcation.png", grid.names[0])
    return _report_failures(result)


def cmd_lyapunov(cfg: RunConfig, out: Path, args) -> int:
    if cfg.grid is None:
        est = max_lyapunov(cfg.params, cfg.drive, cfg.lyapunov)
        _write_json({"port": int(cfg.drive.port), "lambda_max": est.lambda_max,
                     "converged": est.converged, "window": list(est.window)},
                    out / "lyapunov.json")
        print(repr(est.lambda_max))
        return EXIT_OK
    grid = _grid(cfg, "lyapunov")
    result = run_sweep(grid, _task(cfg, TaskKind.LYAPUNOV), args.workers, out)
    if args.figures and len(grid.axes) == 1:
        from . import plotting

        lam = {p: v[0] for p, v in lambda_table(result).items()}
        plotting.lyapunov_lines(grid.axes[0].values, lam, out / "lyapunov.png", grid.names[0])
    return _report_failures(result)


def cmd_metrics(cfg: RunConfig, out: Path, args) -> int:
    m = cfg.metrics
    if m.lambda_1 is not None or m.lambda_2 is not None:
        if m.lambda_1 is None or m.lambda_2 is None:
            raise ConfigError("metrics needs both lambda_1 and lambda_2")
        a, b = np.asarray(m.lambda_1, float), np.asarray(m.lambda_2, float)
        _write_json({"S": metric_S(a, b), "C": metric_C(a, b), "n": len(a)}, out / "metrics.json")
        return EXIT_OK
    grid = _grid(cfg, "metrics")
    if len(grid.axes) != 2 or grid.names[0] != "xi_mag":
        raise ConfigError("metrics sweeps need grid axes (xi_mag, <control>)")
    task = TaskConfig(kind=TaskKind.LYAPUNOV, ports=(1, 2), run=cfg.sensing_config())
    result = run_sweep(grid, task, args.workers, out)
    rows = metrics_rows(result)
    write_rows_csv(rows, ("xi", "S", "C"), out / "metrics.csv")
    if args.figures:
        from . import plotting

        plotting.metrics(rows, out / "metrics.png")
    return _report_failures(result)


def cmd_steady(cfg: RunConfig, out: Path, args) -> int:
    eps = cfg.steady.eps
    res = {"eps": eps, "self_consistent": cfg.steady.self_consistent, "ports": {}}
    for port in Port:
        sol = steady_state(cfg.params, port, eps, self_consistent=cfg.steady.self_consistent)
        res["ports"][str(int(port))] = {
            "i_a": sol.i_a_s, "i_b": sol.i_b_s, "q": sol.q_s,
            "residual": steady_residual(cfg.params, sol, port, eps,
                                        include_self_shift=cfg.steady.self_consistent)}
    res["delta_i_a"] = delta_intensity_steady(cfg.params, eps)
    _write_json(res, out / "steady.json")
    return EXIT_OK


def cmd_tipmap(cfg: RunConfig, out: Path, args) -> int:
    t = cfg.tip
    pts = achievable_region(t.base, t.r1_range, t.r2_range, t.beta_range, t.counts, t.omega)
    write_region_csv(pts, out / "tip_region.csv")
    bnd = region_boundary(pts, t.n_phi_bins)
    write_rows_csv([{"phi": r[0], "xi_min": r[1], "xi_max": r[2]} for r in bnd],
                   ("phi", "xi_min", "xi_max"), out / "tip_boundary.csv")
    ratios = tip_scale_ratios(t.base, t.r1_range, t.r2_range, t.beta_range, t.counts)
    _write_json({"n_points": len(pts), "scale_ratios": ratios,
                 "xi_range": [float(pts[:, 0].min()), float(pts[:, 0].max())]},
                out / "tip_summary.json")
    if args.figures:
        from . import plotting

        plotting.tip_region(pts, bnd, out / "tip_region.png")
    return EXIT_OK


def cmd_window(cfg: RunConfig, out: Path, args) -> int:
    w = cfg.window
    if w is None:
        raise ConfigError("window needs a 'window' section")
    if cfg.grid is None:
        win = _window(cfg)
        _write_json(win.to_dict(), out / "window.json")
        return EXIT_OK
    if w.explicit:
        raise ConfigError("a window sweep needs range and resolution, not fixed critical points")
    task = _task(cfg, TaskKind.WINDOW, control=w.control, control_range=w.range,
                 resolution=w.resolution)
    result = run_sweep(_grid(cfg, "window"), task, args.workers, out)
    return _report_failures(result)


def cmd_sense(cfg: RunConfig, out: Path, args) -> int:
    s = cfg.sensing
    win = _window(cfg)
    thetas = np.array([s.theta]) if s.theta is not None else \
        2 * math.pi * np.arange(s.n_theta) / s.n_theta
    seconds = np.asarray(s.second_values, dtype=float)
    th_axis = Axis("theta", float(thetas[0]), float(thetas[-1]), len(thetas))
    sec_axis = Axis(s.second_axis, float(seconds[0]), float(seconds[-1]), len(seconds))
    drive = cfg.drive.with_(d_eps=s.d_eps, d_omega=s.d_omega)
    grid = SweepGrid((th_axis, sec_axis), cfg.params, drive)
    task = _task(cfg, TaskKind.SENSING, window=win)
    result = run_sweep(grid, task, args.workers, out)
    # re-read the rows as a rate table: second axis outermost for the rate curves
    rows = [RateRow(r["theta"], r["second_axis"], bool(r["port1_success"]),
                    bool(r["port2_success"]), r["delta_i_a_1"], r["delta_i_a_2"])
            for r in result.rows if "theta" in r]
    rows.sort(key=lambda r: (r.second_axis, r.theta))
    table = RateTable(s.second_axis, th_axis.values, sec_axis.values, rows, win)
    table.write_csv(out / "sense.csv")
    table.write_json(out / "sense_summary.json")
    if args.figures:
        from . import plotting

        plotting.success_map(table, out / "sense.png")
    return _report_failures(result)


COMMANDS = {
    "simulate": (cmd_simulate, "integrate one trajectory (tau, i_a, i_b, q, p)"),
    "classify": (cmd_classify, "label one parameter point"),
    "phase-diagram": (cmd_phase_diagram, "classify a 1-2 axis grid for the configured ports"),
    "bifurcation": (cmd_bifurcation, "local maxima of q along one axis"),
    "lyapunov": (cmd_lyapunov, "lambda_max at one point or over a grid"),
    "metrics": (cmd_metrics, "S and C from fixtures or from a (xi_mag, control) sweep"),
    "steady": (cmd_steady, "closed-form steady state for both ports"),
    "tipmap": (cmd_tipmap, "achievable (|xi|, phi) region of the two tips"),
    "window": (cmd_window, "sensing window (D, P, critical points), optionally swept"),
    "sense": (cmd_sense, "single- and dual-port success maps over theta"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chiralchaos", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("presets", help="list the bundled presets")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", type=Path, help="JSON run configuration")
        src.add_argument("--preset", help="name of a bundled configuration")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
        p.add_argument("--figures", action="store_true", help="also render PNG figures")
        if name == "simulate":
            p.add_argument("--raw", action="store_true", help="append the raw mode amplitudes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        for n in preset_names():
            print(n)
        return EXIT_OK
    try:
        if args.preset:
            cfg = load_preset(args.preset)
        elif args.config:
            cfg = load_config(args.config)
        else:
            cfg = RunConfig()
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        args.out.mkdir(parents=True, exist_ok=True)
        fn = COMMANDS[args.command][0]
        return fn(cfg, args.out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, StiffnessError, NoTransitionError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
