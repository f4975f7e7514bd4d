import csv
import json
import math
import os

import pytest

from bhdimer import cli
from bhdimer.cli import ConfigError, main, resolve_config, run

SMALL = [
    ("cutoff", 3),
    ("params.J_over_U", 0.5),
    ("initial_state", [2, 1]),
    ("time_grid.t_max", 200.0),
    ("time_grid.n_points", 21),
    ("frequency_grid.n_points", 51),
    ("semiclassical.t_end", 50.0),
    ("semiclassical.average_T", 50.0),
    ("semiclassical.n_points", 11),
]


def small_args(tmp_path, *extra):
    args = []
    for k, v in SMALL:
        args += ["--set", f"{k}={json.dumps(v)}"]
    for e in extra:
        args += ["--set", e]
    return args + ["--output", str(tmp_path)]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize(
    "overrides, field",
    [
        ([("cutoff", 0)], "cutoff"),
        ([("cutoff", 2.5)], "cutoff"),
        ([("params.U", "big")], "params.U"),
        ([("params.pump_L", 1.0)], "params"),
        ([("initial_state", [30, 0])], "initial_state[0]"),
        ([("time_grid.spacing", "cubic")], "time_grid.spacing"),
        ([("frequency_grid.omega_min", 2.0), ("frequency_grid.omega_max", 1.0)], "frequency_grid.omega_max"),
        ([("steady.method", "magic")], "steady.method"),
        ([("semiclassical.Z0", 5.0)], "semiclassical.Z0"),
        ([("semiclassical.average_T", 1e4)], "semiclassical.average_T"),
        ([("output.format", "xml")], "output.format"),
        ([("params.nope", 1.0)], "params.nope"),
        ([("mode", "sweep")], "sweep.values"),
        ([("mode", "sweep"), ("sweep.values", [1.0, "x"])], "sweep.values[1]"),
        ([("mode", "sweep"), ("sweep.values", [1.0]), ("sweep.mode", "sweep")], "sweep.mode"),
        ([("mode", "sweep"), ("sweep.values", [1.0]), ("sweep.parameter", "params.Q")], "params.Q"),
        ([("mode", "sweep"), ("sweep.values", [-1.0]), ("sweep.parameter", "cutoff")], "cutoff"),
    ],
)
def test_config_errors_name_the_field(overrides, field):
    with pytest.raises(ConfigError) as err:
        resolve_config({}, overrides)
    assert err.value.field == field


def test_file_layer_rejects_unknown_and_non_mapping():
    with pytest.raises(ConfigError) as err:
        resolve_config({"params": {"gamma": 1}})
    assert err.value.field == "params.gamma"
    with pytest.raises(ConfigError):
        resolve_config({"params": 3})


def test_precedence_and_exponent_floats(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("params:\n  gamma_L: 4e-4\n  U: 0.2\ncutoff: 5\n")
    doc = cli._load_file(str(path))
    assert doc["params"]["gamma_L"] == 4e-4
    cfg = resolve_config(doc, [cli.parse_assignment("params.U=0.3")])
    assert cfg["params"]["U"] == 0.3 and cfg["cutoff"] == 5
    assert cfg["params"]["gamma_R"] == cli.DEFAULTS["params"]["gamma_R"]
    assert cli.dimer_params(dict(cfg, params=dict(cfg["params"], J_over_U=2.0))).J == pytest.approx(0.6)


def test_bad_config_file(tmp_path, capsys):
    path = tmp_path / "c.yaml"
    path.write_text("- 1\n- 2\n")
    assert main(["steady", "--config", str(path)]) == cli.EXIT_CONFIG
    assert main(["steady", "--config", str(tmp_path / "missing.yaml")]) == cli.EXIT_CONFIG
    assert main(["steady", "--set", "cutoff"]) == cli.EXIT_CONFIG
    assert "cutoff" in capsys.readouterr().err


@pytest.mark.parametrize("mode, table, cols", [
    ("dynamics", "trajectory", ["t", "n_L", "n_R", "Z", "N"]),
    ("steady", "steady", ["n_L", "n_R", "Z", "N", "current", "kinetic"]),
    ("greens", "greens", ["omega", "A_L", "A_R", "ReC_LR", "ImC_LR"]),
    ("semiclassical", "semiclassical", ["t", "N", "Z", "phi"]),
])
def test_every_mode_writes_csv_and_metadata(tmp_path, mode, table, cols):
    assert main([mode] + small_args(tmp_path)) == cli.EXIT_OK
    rows = read_csv(tmp_path / f"{table}.csv")
    assert list(rows[0]) == cols
    meta = json.loads((tmp_path / f"{mode}_metadata.json").read_text())
    assert meta["config"]["mode"] == mode and meta["config"]["cutoff"] == 3
    assert "summary" in meta and "wall_time_s" in meta
    # the embedded config reproduces the run
    assert resolve_config({k: v for k, v in meta["config"].items()}) == meta["config"]


def test_tables_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["dynamics"] + small_args(d)) == 0
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()


def test_csv_floats_round_trip(tmp_path):
    cfg = resolve_config({}, SMALL + [("output.path", str(tmp_path))])
    res = run(dict(cfg, mode="dynamics"))
    cli.emit(res, str(tmp_path), "csv")
    rows = read_csv(tmp_path / "trajectory.csv")
    assert [float(r["Z"]) for r in rows] == res.tables["trajectory"]["Z"]


def test_json_output_with_infinite_values(tmp_path):
    args = small_args(tmp_path, "params.J_over_U=0.5", "semiclassical.Z0=1.0")
    assert main(["semiclassical"] + args + ["--format", "json"]) == 0
    doc = json.loads((tmp_path / "semiclassical.json").read_text())
    assert doc["metadata"]["summary"]["t_cross"] == "inf"
    assert len(doc["tables"]["semiclassical"]["t"]) == 11


def test_sweep_order_and_per_point_errors(tmp_path):
    args = small_args(tmp_path, "sweep.mode=steady", "sweep.parameter=params.pump_L", "sweep.values=[1e-4, 5e-3, 2e-4]")
    assert main(["sweep"] + args + ["--jobs", "2"]) == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert [r["index"] for r in rows] == ["0", "1", "2"]
    assert [r["status"] for r in rows] == ["ok", "error", "ok"]
    assert "pump_L" in rows[1]["message"]
    assert float(rows[0]["n_L"]) < float(rows[2]["n_L"])
    assert (tmp_path / "steady_000.csv").exists() and not (tmp_path / "steady_001.csv").exists()


def test_sweep_serial_equals_parallel(tmp_path):
    extra = ("sweep.mode=steady", "sweep.values=[0.1, 0.5, 1.5]")
    for d, jobs in ((tmp_path / "s", "1"), (tmp_path / "p", "2")):
        assert main(["sweep"] + small_args(d, *extra) + ["--jobs", jobs]) == 0
    assert (tmp_path / "s" / "sweep.csv").read_bytes() == (tmp_path / "p" / "sweep.csv").read_bytes()


def test_engine_failure_exit_code(tmp_path, monkeypatch, capsys):
    def boom(cfg):
        raise RuntimeError("solver exploded")

    monkeypatch.setitem(cli.PIPELINES, "steady", boom)
    assert main(["steady"] + small_args(tmp_path)) == cli.EXIT_ENGINE
    err = capsys.readouterr().err
    assert "solver exploded" in err and "cutoff=3" in err and "gamma_L=" in err


def test_check_command(tmp_path, monkeypatch, capsys):
    assert main(["check"] + small_args(tmp_path)) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "PASS  spectral_vs_direct_evolution" in out
    doc = json.loads((tmp_path / "check.json").read_text())
    assert all(r["passed"] for r in doc["metadata"]["checks"].values())

    def broken(*a, **k):
        return {"fake": {"value": 1.0, "limit": 0.0, "passed": False}}

    monkeypatch.setattr(cli, "invariant_report", broken)
    assert main(["check"] + small_args(tmp_path)) == cli.EXIT_CHECK


def test_atomic_write_leaves_no_partial_file(tmp_path, monkeypatch):
    target = tmp_path / "x.csv"
    target.write_text("old\n")

    def fail(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", fail)
    with pytest.raises(OSError):
        cli._atomic_write(str(target), "new\n")
    assert target.read_text() == "old\n"
    assert os.listdir(tmp_path) == ["x.csv"]


def test_log_time_grid():
    cfg = resolve_config({}, [("time_grid.spacing", "log"), ("time_grid.n_points", 5), ("time_grid.t_max", 1e4)])
    t = cli.time_grid(cfg)
    assert t[0] == 0 and t[1] == pytest.approx(1.0) and t[-1] == pytest.approx(1e4)


def test_bad_jobs(tmp_path):
    assert main(["steady"] + small_args(tmp_path) + ["--jobs", "0"]) == cli.EXIT_CONFIG


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    proc = subprocess.run(
        [sys.executable, "-m", "bhdimer", "steady"] + small_args(tmp_path), capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr
    assert "n_L = " in proc.stdout
