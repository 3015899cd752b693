import json
import math

import pytest

from chiralchaos import sweep
from chiralchaos.analysis import observe
from chiralchaos.model import DriveSpec, SystemParams
from chiralchaos.sweep import (Axis, SweepGrid, SweepResult, TaskConfig, TaskKind,
                               assemble_phase_diagram, grid_hash, metrics_rows, run_sweep,
                               write_bifurcation_csv)

from conftest import FAST, FAST_LYAP, FAST_RUN

BASE = SystemParams(xi_mag=3.29)
DRIVE = DriveSpec(port=1, eps=58000.0)


def _grid(n_xi=2, n_phi=3):
    return SweepGrid([Axis("xi_mag", 3.0, 3.5, n_xi), Axis("phi", 0.7 * math.pi, 0.8 * math.pi,
                                                          n_phi)], BASE, DRIVE)


def _task(kind="classify", **kw):
    return TaskConfig(kind=kind, run=FAST_RUN, **kw)


def test_grid_is_row_major():
    g = SweepGrid([Axis("xi_mag", 0, 1, 2), Axis("phi", 0, 2, 3)])
    assert g.shape == (2, 3) and len(g) == 6
    assert g.coords()[:4] == [(0.0, 0.0), (0.0, 1.0), (0.0, 2.0), (1.0, 0.0)]
    p, d = g.point(5)
    assert (p.xi_mag, p.phi) == (1.0, 2.0)


def test_grid_validation():
    with pytest.raises(ValueError):
        Axis("bogus", 0, 1, 2)
    with pytest.raises(ValueError):
        Axis("phi", 0, 1, 0)
    with pytest.raises(ValueError):
        SweepGrid([Axis("phi", 0, 1, 2), Axis("phi", 0, 1, 2)])
    with pytest.raises(ValueError):
        SweepGrid([])
    with pytest.raises(ValueError):
        TaskConfig(kind="window")
    with pytest.raises(ValueError):
        TaskConfig(kind="sensing")
    with pytest.raises(ValueError):
        TaskKind.parse("orbit")


def test_single_point_grid_equals_direct_observation():
    g = SweepGrid([Axis("phi", 0.755 * math.pi, 0.755 * math.pi, 1)], BASE, DRIVE)
    res = run_sweep(g, _task(ports=(1,)))
    row = res.rows[0]
    obs = observe(BASE.with_(phi=0.755 * math.pi), DRIVE, FAST, FAST_LYAP)
    assert row["lambda_max"] == obs.phase.lambda_max
    assert row["label"] == obs.phase.label.value
    assert res.complete and not res.failures


def test_csv_identical_across_worker_counts(tmp_path):
    a = run_sweep(_grid(), _task(), workers=1, out_dir=tmp_path / "a")
    b = run_sweep(_grid(), _task(), workers=2, out_dir=tmp_path / "b")
    ca = (tmp_path / "a" / "classify.csv").read_bytes()
    assert ca == (tmp_path / "b" / "classify.csv").read_bytes()
    assert ca.decode().splitlines()[0] == "axis1,axis2,port,lambda_max,label,n_clusters,error"
    assert len(ca.decode().splitlines()) == 1 + 6 * 2
    assert a.hash == b.hash == grid_hash(_grid(), _task())


def test_resume_skips_finished_points(tmp_path, monkeypatch):
    out = tmp_path / "run"
    first = run_sweep(_grid(), _task(), out_dir=out)
    csv1 = (out / "classify.csv").read_bytes()
    # drop the last two checkpoints as if the run had been interrupted
    part = out / "classify.partial.jsonl"
    lines = part.read_text().splitlines()
    part.write_text("\n".join(lines[:-2]) + "\n")

    calls = []
    real = sweep._point_rows

    def counting(job):
        calls.append(job[1])
        return real(job)
    monkeypatch.setattr(sweep, "_point_rows", counting)
    again = run_sweep(_grid(), _task(), out_dir=out)
    assert len(calls) == 2
    assert (out / "classify.csv").read_bytes() == csv1
    assert again.rows == first.rows
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["grid_hash"] == first.hash


def test_changed_grid_discards_checkpoint(tmp_path):
    out = tmp_path / "run"
    run_sweep(_grid(1, 2), _task(ports=(1,)), out_dir=out)
    res = run_sweep(_grid(1, 3), _task(ports=(1,)), out_dir=out)
    assert len(res.rows) == 3
    assert len((out / "classify.partial.jsonl").read_text().splitlines()) == 3


def _fake_result(lams1, lams2, labels=("Chaos", "Chaos")):
    g = SweepGrid([Axis("xi_mag", 1, 1, 1), Axis("phi", -1, 1, len(lams1))])
    rows = [[{"axis1": 1.0, "axis2": 0.0, "port": 1, "lambda_max": a, "label": labels[0],
              "n_clusters": 3, "error": ""},
             {"axis1": 1.0, "axis2": 0.0, "port": 2, "lambda_max": b, "label": labels[1],
              "n_clusters": 3, "error": ""}] for a, b in zip(lams1, lams2)]
    return SweepResult(g, TaskConfig(), rows)


def test_assemble_phase_diagram_from_stub():
    pd = assemble_phase_diagram(_fake_result([0.1, 0.2], [0.2, 0.1], ("Chaos", "Stationary")))
    assert pd.labels[1].shape == (1, 2)
    assert pd.chaotic(1).all() and not pd.dual_chaos.any()
    assert not pd.partial


def test_assemble_rejects_mismatched_grids():
    a = _fake_result([0.1, 0.2], [0.2, 0.1])
    b = _fake_result([0.1, 0.2, 0.3], [0.2, 0.1, 0.0])
    with pytest.raises(ValueError):
        assemble_phase_diagram([a, b])
    with pytest.raises(ValueError):
        assemble_phase_diagram([])


def test_metrics_rows():
    res = _fake_result([0.1, 0.2, 0.3], [0.3, 0.2, 0.1])
    (row,) = metrics_rows(res)
    assert row["C"] == 1.0 and row["S"] < 1.0


def test_window_task_records_missing_transition():
    g = SweepGrid([Axis("xi_mag", 0.0, 0.0, 1)], SystemParams(), DriveSpec(eps=1.0))
    res = run_sweep(g, _task("window", control="eps", control_range=(1.0, 2.0),
                             resolution=0.5))
    assert len(res.failures) == 1
    assert res.failures[0]["error"].startswith("NoTransitionError")
    assert not res.complete


def test_bifurcation_rows(tmp_path):
    g = SweepGrid([Axis("phi", 0.755 * math.pi, 0.755 * math.pi, 1)], BASE, DRIVE)
    res = run_sweep(g, _task("bifurcation", ports=(1,)))
    assert len(res.rows) > 10
    path = write_bifurcation_csv(res, tmp_path / "b.csv")
    assert path.read_text().splitlines()[0] == "control,extremum"
