import json
import math

import pytest

from chiralchaos.cli import main
from chiralchaos.config import ConfigError, load_preset, loads_config, preset_names

PERIOD = 2 * math.pi
FAST_CFG = {"integration": {"method": "rk4", "t_transient": 40 * PERIOD, "t_record": 40 * PERIOD},
            "lyapunov": {"t_average": 80 * PERIOD}}


def _write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2))
    return path


def _run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path / "out")])


def test_presets_are_listed_and_load(capsys):
    assert main(["presets"]) == 0
    listed = capsys.readouterr().out.split()
    assert listed == preset_names() and "sense_theta" in listed
    for name in listed:
        load_preset(name)


def test_unknown_preset_is_a_config_error(tmp_path):
    assert _run(tmp_path, "steady", "--preset", "nope") == 2


def test_unknown_key_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "params": {\n    "xi_mag": 2.0,\n    "bogus": 1\n  }\n}\n')
    assert _run(tmp_path, "steady", "--config", str(path)) == 2
    err = capsys.readouterr().err
    assert "line 4" in err and "bogus" in err


def test_config_conversions_and_errors():
    cfg = loads_config('{"params": {"phi_over_pi": 0.5}, '
                       '"grid": {"axes": [{"name": "phi_over_pi", "min": 0, "max": 1, "count": 3}]}}')
    assert cfg.params.phi == pytest.approx(1.5707963267948966)
    assert cfg.grid[0].name == "phi" and cfg.grid[0].max == pytest.approx(3.141592653589793)
    for bad in ('{"schema_version": 9}', '{"ports": [3]}', '{"params": {"kappa": -1}}',
                '{"window": {"control": "eps"}}', '{"params": {"phi": 1, "phi_over_pi": 1}}',
                '{"params": '):
        with pytest.raises(ConfigError):
            loads_config(bad)


def test_metrics_fixture(tmp_path):
    path = _write(tmp_path, {"metrics": {"lambda_1": [0.1, -0.2], "lambda_2": [0.1, -0.2]}})
    assert _run(tmp_path, "metrics", "--config", str(path)) == 0
    res = json.loads((tmp_path / "out" / "metrics.json").read_text())
    assert res["S"] == 1.0 and res["n"] == 2


def test_simulate_without_drive_is_zero_and_reproducible(tmp_path):
    path = _write(tmp_path, {"drive": {"eps": 0.0}, "integration": {"t_transient": 1.0,
                                                                  "t_record": 6.0}})
    assert _run(tmp_path, "simulate", "--config", str(path), "--raw") == 0
    first = (tmp_path / "out" / "trajectory.csv").read_bytes()
    lines = first.decode().splitlines()
    assert lines[0].startswith("tau,i_a,i_b,q,p,re_a_cw")
    assert all(float(v) == 0.0 for line in lines[1:] for v in line.split(",")[1:])
    assert _run(tmp_path, "simulate", "--config", str(path), "--raw") == 0
    assert (tmp_path / "out" / "trajectory.csv").read_bytes() == first


def test_steady_preset(tmp_path):
    assert _run(tmp_path, "steady", "--preset", "steady") == 0
    res = json.loads((tmp_path / "out" / "steady.json").read_text())
    assert res["ports"]["1"]["residual"] < 1e-10
    assert res["eps"] == 10.0


def test_tipmap_with_figures(tmp_path):
    path = _write(tmp_path, {"tip": {"counts": [4, 4, 16]}})
    assert _run(tmp_path, "tipmap", "--config", str(path), "--figures") == 0
    out = tmp_path / "out"
    for name in ("tip_region.csv", "tip_boundary.csv", "tip_summary.json", "tip_region.png"):
        assert (out / name).exists()
    assert json.loads((out / "tip_summary.json").read_text())["n_points"] == 256


def test_classify_and_phase_diagram(tmp_path, capsys):
    data = dict(FAST_CFG, params={"xi_mag": 3.29, "phi_over_pi": 0.755},
                drive={"port": 1, "eps": 58000.0})
    path = _write(tmp_path, data)
    assert _run(tmp_path, "classify", "--config", str(path)) == 0
    assert capsys.readouterr().out.strip() == "Chaos"
    data["grid"] = {"axes": [{"name": "phi_over_pi", "min": 0.7, "max": 0.8, "count": 2}]}
    path = _write(tmp_path, data)
    assert _run(tmp_path, "phase-diagram", "--config", str(path), "--figures") == 0
    out = tmp_path / "out"
    assert len((out / "classify.csv").read_text().splitlines()) == 1 + 2 * 2
    assert any(p.suffix == ".png" for p in out.iterdir())


def test_explicit_window(tmp_path):
    path = _write(tmp_path, {"window": {"control": "eps", "crit_port1": 1.0, "crit_port2": 3.0,
                                        "working_point": 2.5}})
    assert _run(tmp_path, "window", "--config", str(path)) == 0
    w = json.loads((tmp_path / "out" / "window.json").read_text())
    assert (w["D"], w["P"], w["F"]) == (1.0, 2.0, 2.5)


def test_sense_writes_rate_table(tmp_path):
    data = dict(FAST_CFG, params={"xi_mag": 5.0, "phi_over_pi": 0.5, "delta_a": 0.5598,
                                  "delta_b": 0.5598},
                window={"control": "eps", "crit_port1": 54886.658, "crit_port2": 54887.539,
                        "working_point": 54887.0},
                sensing={"n_theta": 2, "second_values": [0.0]})
    path = _write(tmp_path, data)
    assert _run(tmp_path, "sense", "--config", str(path)) == 0
    out = tmp_path / "out"
    summary = json.loads((out / "sense_summary.json").read_text())
    assert summary["dual_rate"] == [0.0] and summary["n_theta"] == 2
    assert len((out / "sense.csv").read_text().splitlines()) == 3


def test_bad_workers(tmp_path):
    assert _run(tmp_path, "steady", "--workers", "0") == 2
