"""Parameter grids, parallel execution, resumable persistence and the
assembly of phase diagrams, bifurcation data and S/C curves.

Every point of a grid is an independent job.  Results are always stored in
row-major grid order, floats are written with ``repr`` and nothing depends on
which worker ran which point, so output files are a pure function of the
grid and the task configuration.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from ._parallel import parallel_map
from .analysis import Phase, extract_extrema, metric_C, metric_S, observe
from .integrator import StiffnessError
from .lyapunov import max_lyapunov
from .model import DivergenceError, DriveSpec, Port, SystemParams
from .sensing import (NoTransitionError, SensingConfig, SensingWindow, build_window, compare,
                      compute_baselines, run_port, working_point)

SCHEMA_VERSION = 1

_PARAM_AXES = {f.name for f in fields(SystemParams)}
_DRIVE_AXES = {"eps", "d_eps", "d_omega", "theta"}
AXIS_NAMES = sorted(_PARAM_AXES | _DRIVE_AXES | {"delta"})


class TaskKind(str, enum.Enum):
    CLASSIFY = "classify"
    LYAPUNOV = "lyapunov"
    BIFURCATION = "bifurcation"
    WINDOW = "window"
    SENSING = "sensing"

    @classmethod
    def parse(cls, value) -> "TaskKind":
        if isinstance(value, TaskKind):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown task kind {value!r}") from None


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    count: int

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ValueError(f"unknown axis {self.name!r}")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"axis {self.name}: count must be an integer >= 1")
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise ValueError(f"axis {self.name}: bounds must be finite")
        if self.count > 1 and not self.max > self.min:
            raise ValueError(f"axis {self.name}: max must exceed min")

    @property
    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([float(self.min)])
        return np.linspace(self.min, self.max, int(self.count))

    def to_dict(self) -> dict:
        return {"name": self.name, "min": float(self.min), "max": float(self.max),
                "count": int(self.count)}


def apply_point(params: SystemParams, drive: DriveSpec, names: Sequence[str],
                values: Sequence[float]) -> tuple[SystemParams, DriveSpec]:
    pch, dch = {}, {}
    for n, v in zip(names, values):
        v = float(v)
        if n == "delta":
            pch["delta_a"] = pch["delta_b"] = v
        elif n in _DRIVE_AXES:
            dch[n] = v
        else:
            pch[n] = v
    return (params.with_(**pch) if pch else params), (drive.with_(**dch) if dch else drive)


@dataclass(frozen=True)
class SweepGrid:
    axes: tuple[Axis, ...]
    params: SystemParams = field(default_factory=SystemParams)
    drive: DriveSpec = field(default_factory=DriveSpec)

    def __post_init__(self):
        axes = tuple(a if isinstance(a, Axis) else Axis(**a) for a in self.axes)
        if not 1 <= len(axes) <= 2:
            raise ValueError("a sweep grid has one or two axes")
        if len(axes) == 2 and axes[0].name == axes[1].name:
            raise ValueError("axes must be distinct")
        object.__setattr__(self, "axes", axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(a.count) for a in self.axes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    def __len__(self) -> int:
        return int(np.prod(self.shape))

    def coords(self) -> list[tuple[float, ...]]:
        """Row-major: the last axis varies fastest."""
        vals = [a.values for a in self.axes]
        if len(vals) == 1:
            return [(float(v),) for v in vals[0]]
        return [(float(u), float(v)) for u in vals[0] for v in vals[1]]

    def point(self, index: int) -> tuple[SystemParams, DriveSpec]:
        return apply_point(self.params, self.drive, self.names, self.coords()[index])

    def to_dict(self) -> dict:
        return {"axes": [a.to_dict() for a in self.axes], "params": self.params.to_dict(),
                "drive": self.drive.to_dict()}


@dataclass(frozen=True)
class TaskConfig:
    """What to compute at each grid point.

    ``run`` carries the integration, Lyapunov, threshold and amplitude
    settings.  Window tasks need ``control``, ``control_range`` and
    ``resolution``; sensing tasks need ``window`` (grid axes are then
    theta and d_eps or d_omega).
    """

    kind: TaskKind = TaskKind.CLASSIFY
    ports: tuple[int, ...] = (1, 2)
    run: SensingConfig = field(default_factory=SensingConfig)
    control: str | None = None
    control_range: tuple[float, float] | None = None
    resolution: float | None = None
    window: SensingWindow | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", TaskKind.parse(self.kind))
        object.__setattr__(self, "ports", tuple(int(Port.parse(p)) for p in self.ports))
        if not self.ports:
            raise ValueError("at least one port is required")
        if isinstance(self.run, dict):
            object.__setattr__(self, "run", SensingConfig(**self.run))
        if isinstance(self.window, dict):
            w = dict(self.window)
            object.__setattr__(self, "window", SensingWindow.from_critical(
                w["control"], w["crit_port1"], w["crit_port2"], w.get("F")))
        if self.control_range is not None:
            object.__setattr__(self, "control_range", tuple(float(v) for v in self.control_range))
        if self.kind is TaskKind.WINDOW and (self.control is None or self.control_range is None
                                             or self.resolution is None):
            raise ValueError("window tasks need control, control_range and resolution")
        if self.kind is TaskKind.SENSING and self.window is None:
            raise ValueError("sensing tasks need a window")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "ports": list(self.ports), "run": self.run.to_dict(),
                "control": self.control,
                "control_range": list(self.control_range) if self.control_range else None,
                "resolution": self.resolution,
                "window": self.window.to_dict() if self.window else None}


COLUMNS = {
    TaskKind.CLASSIFY: ("axis1", "axis2", "port", "lambda_max", "label", "n_clusters"),
    TaskKind.LYAPUNOV: ("axis1", "axis2", "port", "lambda_max", "converged"),
    TaskKind.BIFURCATION: ("control", "port", "extremum"),
    TaskKind.WINDOW: ("axis1", "axis2", "crit_port1", "crit_port2", "D", "P"),
    TaskKind.SENSING: ("theta", "second_axis", "port1_success", "port2_success",
                       "dual_success", "delta_i_a_1", "delta_i_a_2"),
}


def grid_hash(grid: SweepGrid, task: TaskConfig) -> str:
    blob = json.dumps({"grid": grid.to_dict(), "task": task.to_dict(), "schema": SCHEMA_VERSION},
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# per-point work


def _ax(coords: tuple[float, ...]) -> tuple[float, float]:
    return coords[0], (coords[1] if len(coords) > 1 else math.nan)


def _point_rows(job) -> list[dict]:
    """Rows produced by one grid point.  Failures become rows with an error
    message instead of raising."""
    kind, coords, params, drive, task, baselines = job
    a1, a2 = _ax(coords)
    cfg = task.run
    rows: list[dict] = []
    try:
        if kind is TaskKind.CLASSIFY:
            for port in task.ports:
                try:
                    obs = observe(params, drive.with_(port=port), cfg.integration, cfg.lyapunov,
                                  cfg.thresholds)
                    rows.append({"axis1": a1, "axis2": a2, "port": port,
                                 "lambda_max": obs.phase.lambda_max, "label": obs.phase.label.value,
                                 "n_clusters": obs.phase.n_clusters, "error": ""})
                except (DivergenceError, StiffnessError) as exc:
                    rows.append({"axis1": a1, "axis2": a2, "port": port, "lambda_max": math.nan,
                                 "label": "", "n_clusters": -1, "error": _msg(exc)})
        elif kind is TaskKind.LYAPUNOV:
            for port in task.ports:
                try:
                    est = max_lyapunov(params, drive.with_(port=port), cfg.lyapunov)
                    rows.append({"axis1": a1, "axis2": a2, "port": port,
                                 "lambda_max": est.lambda_max, "converged": est.converged,
                                 "error": ""})
                except (DivergenceError, StiffnessError) as exc:
                    rows.append({"axis1": a1, "axis2": a2, "port": port, "lambda_max": math.nan,
                                 "converged": False, "error": _msg(exc)})
        elif kind is TaskKind.BIFURCATION:
            for port in task.ports:
                try:
                    obs = observe(params, drive.with_(port=port), cfg.integration, cfg.lyapunov,
                                  cfg.thresholds, keep_trajectory=True)
                    for e in extract_extrema(obs.trajectory):
                        rows.append({"control": a1, "port": port, "extremum": float(e),
                                     "error": ""})
                except (DivergenceError, StiffnessError) as exc:
                    rows.append({"control": a1, "port": port, "extremum": math.nan,
                                 "error": _msg(exc)})
        elif kind is TaskKind.WINDOW:
            try:
                w = build_window(params, task.control, task.control_range, task.resolution,
                                 drive=drive, config=cfg)
                rows.append({"axis1": a1, "axis2": a2, "crit_port1": w.crit_port1,
                             "crit_port2": w.crit_port2, "D": w.half_width_d, "P": w.center_p,
                             "error": ""})
            except (NoTransitionError, DivergenceError, StiffnessError) as exc:
                rows.append({"axis1": a1, "axis2": a2, "crit_port1": math.nan,
                             "crit_port2": math.nan, "D": math.nan, "P": math.nan,
                             "error": _msg(exc)})
        elif kind is TaskKind.SENSING:
            row = {"theta": drive.theta, "second_axis": a2, "port1_success": False,
                   "port2_success": False, "dual_success": False,
                   "delta_i_a_1": math.nan, "delta_i_a_2": math.nan, "error": ""}
            try:
                p, d = working_point(params, task.window, drive)
                for port in (Port.PORT1, Port.PORT2):
                    run = run_port(p, d.with_(port=port), cfg)
                    o = compare(baselines[port], run, cfg.amp_change_tol)
                    row[f"port{int(port)}_success"] = o.success
                    row[f"delta_i_a_{int(port)}"] = o.delta_i_a
                row["dual_success"] = row["port1_success"] or row["port2_success"]
            except (DivergenceError, StiffnessError) as exc:
                row["error"] = _msg(exc)
            rows.append(row)
    except ValueError as exc:
        rows.append({"error": _msg(exc)})
    return rows


def _msg(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------------------
# execution and persistence


@dataclass
class SweepResult:
    grid: SweepGrid
    task: TaskConfig
    rows_by_point: list[list[dict]]

    @property
    def kind(self) -> TaskKind:
        return self.task.kind

    @property
    def columns(self) -> tuple[str, ...]:
        return COLUMNS[self.kind] + ("error",)

    @property
    def rows(self) -> list[dict]:
        return [r for pts in self.rows_by_point for r in pts]

    @property
    def failures(self) -> list[dict]:
        return [r for r in self.rows if r.get("error")]

    @property
    def complete(self) -> bool:
        return not self.failures

    @property
    def hash(self) -> str:
        return grid_hash(self.grid, self.task)

    def write_csv(self, path) -> Path:
        path = Path(path)
        cols = self.columns
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in self.rows:
                w.writerow([_fmt(r.get(c, "")) for c in cols])
        return path


def _fmt(v) -> str:
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    return str(v)


def manifest_dict(grid: SweepGrid, task: TaskConfig, done: int, failed: int) -> dict:
    return {"schema_version": SCHEMA_VERSION, "software_version": __version__,
            "grid_hash": grid_hash(grid, task), "grid": grid.to_dict(), "task": task.to_dict(),
            "n_points": len(grid), "n_done": done, "n_failed_rows": failed}


def _load_partial(path: Path) -> dict[int, list[dict]]:
    done: dict[int, list[dict]] = {}
    if not path.exists():
        return done
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                break  # torn final line from an interrupted run
            done[int(rec["index"])] = rec["rows"]
    return done


def run_sweep(grid: SweepGrid, task: TaskConfig | str = TaskKind.CLASSIFY, workers: int = 1,
              out_dir=None) -> SweepResult:
    """Run every grid point and return the rows in grid order.

    With ``out_dir`` the sweep is persisted as ``<kind>.csv`` plus
    ``manifest.json``; finished points are checkpointed to
    ``<kind>.partial.jsonl`` and skipped when the same grid and task (same
    hash) are run again.
    """
    if not isinstance(task, TaskConfig):
        task = TaskConfig(kind=task)
    kind = task.kind
    h = grid_hash(grid, task)
    coords = grid.coords()

    done: dict[int, list[dict]] = {}
    partial_path = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        partial_path = out / f"{kind.value}.partial.jsonl"
        man_path = out / "manifest.json"
        if man_path.exists():
            try:
                old = json.loads(man_path.read_text())
            except json.JSONDecodeError:
                old = {}
            if old.get("grid_hash") == h:
                done = _load_partial(partial_path)
            elif partial_path.exists():
                partial_path.unlink()
        elif partial_path.exists():
            partial_path.unlink()
        man_path.write_text(json.dumps(manifest_dict(grid, task, len(done), 0), indent=2,
                                       sort_keys=True) + "\n")

    baselines = None
    if kind is TaskKind.SENSING:
        if grid.names[0] != "theta" or (len(grid.names) == 2
                                        and grid.names[1] not in ("d_eps", "d_omega")):
            raise ValueError("sensing grids are (theta[, d_eps | d_omega])")
        baselines = compute_baselines(grid.params, task.window, grid.drive, task.run, workers)

    todo = [i for i in range(len(coords)) if i not in done]
    jobs = []
    for i in todo:
        p, d = apply_point(grid.params, grid.drive, grid.names, coords[i])
        jobs.append((kind, coords[i], p, d, task, baselines))

    fh = open(partial_path, "a") if partial_path is not None else None

    def checkpoint(k, rows):
        done[todo[k]] = rows
        if fh is not None:
            fh.write(json.dumps({"index": todo[k], "rows": rows}) + "\n")
            fh.flush()

    try:
        parallel_map(_point_rows, jobs, workers, on_result=checkpoint)
    finally:
        if fh is not None:
            fh.close()

    # JSON round-trips floats exactly, so resumed and fresh rows agree
    rows_by_point = [[_normalize(r) for r in done[i]] for i in range(len(coords))]
    result = SweepResult(grid, task, rows_by_point)
    if out_dir is not None:
        result.write_csv(Path(out_dir) / f"{kind.value}.csv")
        (Path(out_dir) / "manifest.json").write_text(json.dumps(
            manifest_dict(grid, task, len(coords), len(result.failures)), indent=2,
            sort_keys=True) + "\n")
    return result


def _normalize(row: dict) -> dict:
    return json.loads(json.dumps(row))


# ---------------------------------------------------------------------------
# assembly


@dataclass
class PhaseDiagram:
    grid: SweepGrid
    labels: dict[int, np.ndarray]
    lambdas: dict[int, np.ndarray]
    errors: list[str] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return bool(self.errors)

    def chaotic(self, port: int) -> np.ndarray:
        return self.labels[int(port)] == Phase.CHAOS.value

    @property
    def dual_chaos(self) -> np.ndarray:
        """Cells that are chaotic whichever port is pumped."""
        return self.chaotic(1) & self.chaotic(2)


def assemble_phase_diagram(results) -> PhaseDiagram:
    """Merge Classify results covering ports 1 and 2 (one result holding
    both, or one per port on the same grid)."""
    if isinstance(results, SweepResult):
        results = [results]
    results = list(results)
    if not results:
        raise ValueError("no results to assemble")
    grid = results[0].grid
    for r in results:
        if r.kind is not TaskKind.CLASSIFY:
            raise ValueError("phase diagrams need Classify results")
        if r.grid.to_dict() != grid.to_dict():
            raise ValueError("grid mismatch between port results")
    shape = grid.shape if len(grid.shape) == 2 else (1, grid.shape[0])
    labels: dict[int, np.ndarray] = {}
    lambdas: dict[int, np.ndarray] = {}
    errors: list[str] = []
    for r in results:
        for idx, rows in enumerate(r.rows_by_point):
            for row in rows:
                if "port" not in row:
                    errors.append(f"point {idx}: {row.get('error', '')}")
                    continue
                port = int(row["port"])
                if port not in labels:
                    labels[port] = np.full(shape, "", dtype=object)
                    lambdas[port] = np.full(shape, np.nan)
                cell = np.unravel_index(idx, shape)
                labels[port][cell] = row["label"]
                lambdas[port][cell] = row["lambda_max"] if row["lambda_max"] is not None else np.nan
                if row.get("error"):
                    errors.append(f"point {idx} port {port}: {row['error']}")
    for port in (1, 2):
        if port not in labels:
            raise ValueError(f"missing port {port} results")
    return PhaseDiagram(grid, labels, lambdas, errors)


def lambda_table(result: SweepResult) -> dict[int, np.ndarray]:
    """lambda_max per port reshaped to the grid (rows = first axis)."""
    shape = result.grid.shape if len(result.grid.shape) == 2 else (1, result.grid.shape[0])
    out: dict[int, np.ndarray] = {}
    for idx, rows in enumerate(result.rows_by_point):
        for row in rows:
            if "port" in row and "lambda_max" in row:
                port = int(row["port"])
                arr = out.setdefault(port, np.full(shape, np.nan))
                v = row["lambda_max"]
                arr[np.unravel_index(idx, shape)] = np.nan if v is None else v
    return out


def metrics_rows(result: SweepResult) -> list[dict]:
    """S and C between the port-1 and port-2 lambda arrays for each value of
    the first axis (the second axis is the swept control, e.g. phi)."""
    lam = lambda_table(result)
    if 1 not in lam or 2 not in lam:
        raise ValueError("metrics need lambda_max for both ports")
    first = result.grid.axes[0].values if len(result.grid.axes) == 2 else np.array([math.nan])
    rows = []
    for k, x in enumerate(first):
        a, b = lam[1][k], lam[2][k]
        if np.any(np.isnan(a)) or np.any(np.isnan(b)):
            rows.append({"xi": float(x), "S": math.nan, "C": math.nan})
            continue
        rows.append({"xi": float(x), "S": metric_S(a, b), "C": metric_C(a, b)})
    return rows


def write_rows_csv(rows: list[dict], columns: Sequence[str], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])
    return path


def write_bifurcation_csv(result: SweepResult, path, port: int = 1) -> Path:
    rows = [r for r in result.rows if r.get("port") == int(port) and not r.get("error")]
    return write_rows_csv(rows, ("control", "extremum"), path)

