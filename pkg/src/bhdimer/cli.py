"""Command-line front end: config resolution, runs, sweeps and result files.

Configuration is a nested YAML document. Precedence is ``--set`` flags, then
the ``--config`` file, then :data:`DEFAULTS`. Every output embeds the fully
resolved configuration, so a result file is enough to repeat the run.

Exit codes: 0 success, 1 invalid configuration, 2 engine failure, 3 a failed
invariant check.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import re
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from . import __version__
from .fock import DimerParams, current_operator, enumerate_basis, hopping_operator
from .greens import all_pole_sums, default_frequency_grid, evaluate_g, sum_rules
from .invariants import invariant_report
from .liouvillian import sector_sizes
from .semiclassical import (
    SCParams,
    SCState,
    closed_form,
    crossing_time,
    integrate,
    sc_time_averaged_imbalance,
)
from .spectral import (
    DensityMatrix,
    FitRejectedError,
    diagonalize,
    evolve,
    late_decay_rate,
    steady_state,
    steady_state_sparse,
    time_average,
    zero_crossings,
)

EXIT_OK, EXIT_CONFIG, EXIT_ENGINE, EXIT_CHECK = 0, 1, 2, 3
MODES = ("dynamics", "steady", "greens", "semiclassical")
SPARSE_STEADY_THRESHOLD = 1500  # nu=0 block size above which "auto" solves sparsely

DEFAULTS: Dict[str, Any] = {
    "mode": "dynamics",
    "cutoff": 20,
    "params": {
        "omega0": 1.0,
        "U": 0.1,
        "J": 0.0,
        "J_over_U": None,  # when set, overrides J as J_over_U * U
        "gamma_L": 3e-4,
        "gamma_R": 3e-4,
        "pump_L": 2e-4,
        "pump_R": 2e-4,
    },
    "initial_state": [3, 1],
    "time_grid": {"t_max": 1000.0, "n_points": 2001, "spacing": "linear"},
    "frequency_grid": {"omega_min": None, "omega_max": None, "n_points": 2001},
    "steady": {"method": "auto"},
    "semiclassical": {
        "N0": 3.0,
        "Z0": 1.0,
        "phi0": 0.0,
        "delta_omega": 0.0,
        "gamma_eff_L": 0.0,
        "gamma_eff_R": 0.0,
        "t_end": 200.0,
        "average_T": 200.0,
        "n_points": 2001,
    },
    "sweep": {"parameter": "params.J_over_U", "values": [], "mode": "dynamics"},
    "output": {"path": "results", "format": "csv"},
}


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent-only floats such as ``4e-4``."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


def load_yaml(text):
    return yaml.load(text, Loader=_Loader)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


# --- configuration -----------------------------------------------------------


def _merge(base: dict, override: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        path = f"{prefix}{key}"
        if key not in out:
            raise ConfigError(path, "unknown field")
        if isinstance(out[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(path, "expected a mapping")
            out[key] = _merge(out[key], val, path + ".")
        else:
            out[key] = val
    return out


def set_path(config: dict, path: str, value) -> None:
    node = config
    keys = path.split(".")
    for k in keys[:-1]:
        if not isinstance(node, dict) or k not in node or not isinstance(node[k], dict):
            raise ConfigError(path, "unknown field")
        node = node[k]
    if not isinstance(node, dict) or keys[-1] not in node or isinstance(node[keys[-1]], dict):
        raise ConfigError(path, "unknown field")
    node[keys[-1]] = value


def get_path(config: dict, path: str):
    node = config
    for k in path.split("."):
        if not isinstance(node, dict) or k not in node:
            raise ConfigError(path, "unknown field")
        node = node[k]
    return node


def parse_assignment(text: str) -> Tuple[str, Any]:
    if "=" not in text:
        raise ConfigError(text, "expected key=value")
    key, raw = text.split("=", 1)
    return key.strip(), load_yaml(raw)


def resolve_config(file_config: Optional[dict] = None, overrides=(), mode: Optional[str] = None) -> dict:
    """Defaults, then the file, then ``key=value`` overrides, then validation."""
    cfg = _merge(DEFAULTS, file_config or {})
    for key, val in overrides:
        set_path(cfg, key, val)
    if mode is not None:
        cfg["mode"] = mode
    validate_config(cfg)
    return cfg


def _number(cfg, path, positive=False, integer=False, nonneg=False):
    val = get_path(cfg, path)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(path, f"expected a number, got {val!r}")
    if not math.isfinite(val):
        raise ConfigError(path, "must be finite")
    if integer and int(val) != val:
        raise ConfigError(path, "must be an integer")
    if positive and val <= 0:
        raise ConfigError(path, "must be positive")
    if nonneg and val < 0:
        raise ConfigError(path, "must be non-negative")
    return val


def validate_config(cfg: dict) -> None:
    mode = cfg["mode"]
    if mode not in MODES + ("sweep",):
        raise ConfigError("mode", f"must be one of {MODES + ('sweep',)}")
    _number(cfg, "cutoff", positive=True, integer=True)
    for key in ("omega0", "U", "J", "gamma_L", "gamma_R", "pump_L", "pump_R"):
        _number(cfg, f"params.{key}")
    if cfg["params"]["J_over_U"] is not None:
        _number(cfg, "params.J_over_U")
    try:
        dimer_params(cfg)
    except ValueError as exc:
        raise ConfigError("params", str(exc)) from None

    init = cfg["initial_state"]
    if not (isinstance(init, (list, tuple)) and len(init) == 2):
        raise ConfigError("initial_state", "expected a pair [nL, nR]")
    for k, n in enumerate(init):
        if isinstance(n, bool) or not isinstance(n, int) or not 0 <= n <= cfg["cutoff"]:
            raise ConfigError(f"initial_state[{k}]", f"must be an integer in [0, cutoff], got {n!r}")

    _number(cfg, "time_grid.t_max", positive=True)
    _number(cfg, "time_grid.n_points", positive=True, integer=True)
    if cfg["time_grid"]["n_points"] < 2:
        raise ConfigError("time_grid.n_points", "need at least 2 points")
    if cfg["time_grid"]["spacing"] not in ("linear", "log"):
        raise ConfigError("time_grid.spacing", "must be 'linear' or 'log'")

    fg = cfg["frequency_grid"]
    _number(cfg, "frequency_grid.n_points", positive=True, integer=True)
    for key in ("omega_min", "omega_max"):
        if fg[key] is not None:
            _number(cfg, f"frequency_grid.{key}")
    if fg["omega_min"] is not None and fg["omega_max"] is not None and fg["omega_max"] <= fg["omega_min"]:
        raise ConfigError("frequency_grid.omega_max", "must exceed omega_min")

    if cfg["steady"]["method"] not in ("auto", "eig", "sparse"):
        raise ConfigError("steady.method", "must be 'auto', 'eig' or 'sparse'")

    sc = "semiclassical"
    _number(cfg, f"{sc}.N0", positive=True)
    _number(cfg, f"{sc}.Z0")
    _number(cfg, f"{sc}.phi0")
    _number(cfg, f"{sc}.delta_omega")
    _number(cfg, f"{sc}.gamma_eff_L", nonneg=True)
    _number(cfg, f"{sc}.gamma_eff_R", nonneg=True)
    _number(cfg, f"{sc}.t_end", positive=True)
    _number(cfg, f"{sc}.average_T", positive=True)
    _number(cfg, f"{sc}.n_points", positive=True, integer=True)
    if abs(cfg[sc]["Z0"]) > cfg[sc]["N0"]:
        raise ConfigError(f"{sc}.Z0", "|Z0| must not exceed N0")
    if cfg[sc]["average_T"] > cfg[sc]["t_end"]:
        raise ConfigError(f"{sc}.average_T", "must not exceed t_end")

    if cfg["output"]["format"] not in ("csv", "json"):
        raise ConfigError("output.format", "must be 'csv' or 'json'")

    if mode == "sweep":
        sw = cfg["sweep"]
        if sw["mode"] not in MODES:
            raise ConfigError("sweep.mode", f"must be one of {MODES}")
        values = sw["values"]
        if not isinstance(values, (list, tuple)) or len(values) == 0:
            raise ConfigError("sweep.values", "must be a non-empty list")
        for k, v in enumerate(values):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"sweep.values[{k}]", f"must be a finite number, got {v!r}")
        if not isinstance(sw["parameter"], str):
            raise ConfigError("sweep.parameter", "expected a dotted field path")
        probe = copy.deepcopy(cfg)
        set_path(probe, sw["parameter"], values[0])  # raises for unknown paths
        probe["mode"] = sw["mode"]
        validate_config(probe)


def dimer_params(cfg: dict) -> DimerParams:
    p = dict(cfg["params"])
    r = p.pop("J_over_U")
    if r is not None:
        p["J"] = r * p["U"]
    return DimerParams(**p)


def time_grid(cfg: dict) -> np.ndarray:
    tg = cfg["time_grid"]
    n, t_max = int(tg["n_points"]), float(tg["t_max"])
    if tg["spacing"] == "linear":
        return np.linspace(0.0, t_max, n)
    return np.concatenate(([0.0], np.geomspace(t_max * 1e-4, t_max, n - 1)))


def frequency_grid(cfg: dict, params: DimerParams, mean_occupation: float) -> np.ndarray:
    fg = cfg["frequency_grid"]
    n = int(fg["n_points"])
    auto = default_frequency_grid(params, mean_occupation, n)
    lo = auto[0] if fg["omega_min"] is None else fg["omega_min"]
    hi = auto[-1] if fg["omega_max"] is None else fg["omega_max"]
    return np.linspace(lo, hi, n)


# --- results -----------------------------------------------------------------


@dataclass
class ResultSet:
    metadata: Dict[str, Any]
    tables: Dict[str, Dict[str, list]] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)


def _table(**cols) -> Dict[str, list]:
    return {k: [_plain(x) for x in np.asarray(v).tolist()] for k, v in cols.items()}


def _plain(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)  # "inf", "-inf", "nan"
    return obj


def _csv_cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    tmp = None
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        if tmp is not None and os.path.exists(tmp):
            os.unlink(tmp)
        raise OSError(f"cannot write {path}: {exc}") from exc


def table_to_csv(table: Dict[str, list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = list(table)
    writer.writerow(cols)
    for row in zip(*(table[c] for c in cols)):
        writer.writerow([_csv_cell(x) for x in row])
    return buf.getvalue()


def emit(results: ResultSet, out_dir: str, fmt: str) -> List[str]:
    """Write the result set; returns the written paths."""
    name = results.metadata["config"]["mode"]
    meta = dict(results.metadata, summary=results.summary)
    if fmt == "json":
        path = os.path.join(out_dir, f"{name}.json")
        doc = {"metadata": _json_safe(meta), "tables": _json_safe(results.tables)}
        _atomic_write(path, json.dumps(doc, indent=1, sort_keys=False) + "\n")
        return [path]
    paths = []
    for tname, table in results.tables.items():
        path = os.path.join(out_dir, f"{tname}.csv")
        _atomic_write(path, table_to_csv(table))
        paths.append(path)
    path = os.path.join(out_dir, f"{name}_metadata.json")
    _atomic_write(path, json.dumps(_json_safe(meta), indent=1) + "\n")
    paths.append(path)
    return paths


# --- pipelines -----------------------------------------------------------------


def run_dynamics(cfg: dict) -> Tuple[dict, dict, dict]:
    basis = enumerate_basis(cfg["cutoff"])
    params = dimer_params(cfg)
    decomp = diagonalize(basis, params, (0,))[0]
    times = time_grid(cfg)
    traj = evolve(decomp, DensityMatrix.fock(basis, *cfg["initial_state"]), times, basis)
    try:
        rate, rate_note = late_decay_rate(traj), None
    except FitRejectedError as exc:
        rate, rate_note = None, str(exc)
    summary = {
        "time_averaged_Z": time_average(times, traj.Z, (times[0], times[-1])),
        "decay_rate": rate,
        "zero_crossings": zero_crossings(times, traj.Z),
        "n_L_final": float(traj.n_L[-1]),
        "n_R_final": float(traj.n_R[-1]),
    }
    checks = {
        "max_eigenvalue_real_part": float(decomp.eigenvalues.real.max()),
        "biorthogonality_residual": decomp.condition_report,
    }
    if rate_note:
        checks["decay_rate_note"] = rate_note
    tables = {"trajectory": _table(t=times, n_L=traj.n_L, n_R=traj.n_R, Z=traj.Z, N=traj.N)}
    return summary, tables, checks


def _steady(cfg: dict, basis, params):
    method = cfg["steady"]["method"]
    if method == "auto":
        method = "sparse" if sector_sizes(basis)[0] > SPARSE_STEADY_THRESHOLD else "eig"
    if method == "sparse":
        return steady_state_sparse(basis, params), method
    return steady_state(diagonalize(basis, params, (0,))[0], basis), method


def run_steady(cfg: dict):
    basis = enumerate_basis(cfg["cutoff"])
    params = dimer_params(cfg)
    rho, method = _steady(cfg, basis, params)
    nL, nR = rho.occupations(basis)
    summary = {
        "n_L": nL,
        "n_R": nR,
        "Z": nL - nR,
        "N": nL + nR,
        "current": rho.expect(current_operator(basis, params.J)).real,
        "kinetic": rho.expect(params.J * hopping_operator(basis)).real,
    }
    d = np.real(np.diag(rho.matrix))
    tables = {
        "steady": _table(**{k: [v] for k, v in summary.items()}),
        "populations": _table(
            nL=[s[0] for s in basis.states], nR=[s[1] for s in basis.states], probability=d
        ),
    }
    checks = {"method": method, "trace": float(np.trace(rho.matrix).real)}
    return summary, tables, checks


def run_greens(cfg: dict):
    basis = enumerate_basis(cfg["cutoff"])
    params = dimer_params(cfg)
    decomps = diagonalize(basis, params, (0, 1, -1))
    rho = steady_state(decomps[0], basis)
    bundle = all_pole_sums(decomps, rho, basis)
    nL, nR = rho.occupations(basis)
    omega = frequency_grid(cfg, params, 0.5 * (nL + nR))
    A = {s: -evaluate_g(bundle.retarded[(s, s)], omega).imag / np.pi for s in "LR"}
    C_lr = 1j * evaluate_g(bundle.keldysh[("L", "R")], omega) / (2 * np.pi)
    report = sum_rules(bundle, params, rho, basis)
    summary = {
        "norm_L": report.norm["L"],
        "norm_R": report.norm["R"],
        "occupation_L": report.occupation["L"],
        "occupation_R": report.occupation["R"],
        "kinetic": report.kinetic,
        "current": report.current,
        "current_direct": report.current_direct,
    }
    checks = {
        "sum_rules": report.checks(),
        "sum_rules_truncated": report.truncation_checks(),
        "max_eigenvalue_real_part": max(float(d.eigenvalues.real.max()) for d in decomps.values()),
    }
    tables = {
        "greens": _table(omega=omega, A_L=A["L"], A_R=A["R"], ReC_LR=C_lr.real, ImC_LR=C_lr.imag)
    }
    return summary, tables, checks


def run_semiclassical(cfg: dict):
    sc = cfg["semiclassical"]
    params = dimer_params(cfg)
    scp = SCParams(
        U=params.U,
        J=params.J,
        delta_omega=sc["delta_omega"],
        gamma_eff_L=sc["gamma_eff_L"],
        gamma_eff_R=sc["gamma_eff_R"],
    )
    traj = integrate(SCState(sc["N0"], sc["Z0"], sc["phi0"]), scp, sc["t_end"])
    t = np.linspace(0.0, sc["t_end"], int(sc["n_points"]))
    N, Z, phi = traj(t)
    summary = {
        "t_cross": crossing_time(traj),
        "averaged_Z": sc_time_averaged_imbalance(traj, sc["average_T"]),
    }
    if params.U > 0:
        cf = closed_form(sc["N0"], sc["Z0"], params.J / params.U, params.U)
        summary.update(critical_ratio=cf.critical_ratio, Z1_squared=cf.Z1_squared, period=cf.period)
    tables = {"semiclassical": _table(t=t, N=N, Z=Z, phi=phi)}
    return summary, tables, {}


PIPELINES = {
    "dynamics": run_dynamics,
    "steady": run_steady,
    "greens": run_greens,
    "semiclassical": run_semiclassical,
}


def _sweep_point(args):
    cfg, index = args
    try:
        summary, tables, _ = PIPELINES[cfg["mode"]](cfg)
        return index, "ok", "", summary, tables
    except Exception as exc:  # recorded per point; the sweep continues
        return index, "error", f"{type(exc).__name__}: {exc}", {}, {}


def run_sweep(cfg: dict, jobs: Optional[int] = None):
    sw = cfg["sweep"]
    points = []
    for k, v in enumerate(sw["values"]):
        pc = copy.deepcopy(cfg)
        set_path(pc, sw["parameter"], v)
        pc["mode"] = sw["mode"]
        points.append((pc, k))
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1 or len(points) == 1:
        results = [_sweep_point(p) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(points))) as pool:
            results = list(pool.map(_sweep_point, points))
    results.sort(key=lambda r: r[0])

    keys: List[str] = []
    for r in results:
        for key in r[3]:
            if key not in keys:
                keys.append(key)
    table = {"index": [], "value": [], "status": [], "message": []}
    table.update({key: [] for key in keys})
    tables = {}
    for index, status, message, summary, sub in results:
        table["index"].append(index)
        table["value"].append(float(sw["values"][index]))
        table["status"].append(status)
        table["message"].append(message)
        for key in keys:
            table[key].append(_plain(summary.get(key)))
        for name, t in sub.items():
            tables[f"{name}_{index:03d}"] = t
    summary = {"points": len(results), "failed": sum(r[1] != "ok" for r in results)}
    return summary, {"sweep": table, **tables}, {}


def run(cfg: dict, jobs: Optional[int] = None) -> ResultSet:
    """Execute a validated configuration."""
    start = time.perf_counter()
    if cfg["mode"] == "sweep":
        summary, tables, checks = run_sweep(cfg, jobs)
    else:
        summary, tables, checks = PIPELINES[cfg["mode"]](cfg)
    meta = {
        "config": copy.deepcopy(cfg),
        "version": __version__,
        "wall_time_s": time.perf_counter() - start,
        "checks": checks,
    }
    return ResultSet(meta, tables, summary)


# --- invariant suite -----------------------------------------------------------


def run_checks(cfg: dict) -> Dict[str, dict]:
    """Engine invariants at the configured cutoff and parameters."""
    return invariant_report(enumerate_basis(cfg["cutoff"]), dimer_params(cfg), cfg["initial_state"])


# --- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bhdimer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in MODES + ("sweep", "check"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a field")
        p.add_argument("--output", help="output directory (default: output.path)")
        p.add_argument("--format", choices=("csv", "json"), help="output format (default: output.format)")
        p.add_argument("--jobs", type=int, help="worker processes for sweeps")
    return parser


def _load_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            doc = load_yaml(fh)
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    except yaml.YAMLError as exc:
        raise ConfigError("--config", f"not valid YAML: {exc}") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError("--config", "top level must be a mapping")
    return doc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = [parse_assignment(s) for s in args.set]
        if args.format:
            overrides.append(("output.format", args.format))
        if args.output:
            overrides.append(("output.path", args.output))
        mode = None if args.command == "check" else args.command
        cfg = resolve_config(_load_file(args.config), overrides, mode)
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs", "must be at least 1")
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir, fmt = cfg["output"]["path"], cfg["output"]["format"]
    try:
        if args.command == "check":
            rows = run_checks(cfg)
            for name, row in rows.items():
                flag = "PASS" if row["passed"] else "FAIL"
                print(f"{flag}  {name}: {row['value']:.3e} (limit {row['limit']:.1e})")
            check_cfg = dict(cfg, mode="check")
            res = ResultSet({"config": check_cfg, "version": __version__, "checks": rows})
            emit(res, out_dir, "json")
            return EXIT_OK if all(r["passed"] for r in rows.values()) else EXIT_CHECK
        results = run(cfg, args.jobs)
        paths = emit(results, out_dir, fmt)
    except Exception as exc:
        context = ", ".join(f"{k}={v}" for k, v in cfg["params"].items() if v is not None)
        print(
            f"error: engine failure ({type(exc).__name__}): {exc}\n"
            f"  while running {args.command} at cutoff={cfg['cutoff']}, {context}",
            file=sys.stderr,
        )
        return EXIT_ENGINE
    for key, val in results.summary.items():
        print(f"{key} = {val}")
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
