"""Command-line experiment runner.

Commands::

    accelpd run <config.json>
    accelpd sweep <config.json> --grid '{"params.alpha": [3, 5]}' [--parallel N]
    accelpd verify {all,basic,strict,scaled,critical} [--json PATH]
    accelpd report <summary.json> --svg <dir>

Output files without an explicit path go to ``$ACCELPD_OUTPUT_DIR``
(default ``./accelpd-out``).

Exit codes: 0 success, 2 configuration error, 3 oracle failure,
4 integration failure, 5 acceptance failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import logging
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import acceptance
from .diagnostics import (
    COLUMNS,
    EstimationError,
    check_o_rate,
    column,
    energy_excess,
    estimate_rate,
    trajectory_convergence_check,
)
from .dynamics import MODES, DynamicsParams, ScalingFunction, SystemState, default_initial_state, validate_params
from .problem import CATALOG_NAMES, ContractError, OracleError, catalog, quadratic_problem, solve_kkt_oracle
from .runner import simulate
from .svg import loglog_svg

ENV_OUTPUT_DIR = "ACCELPD_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "accelpd-out"

EXIT_OK, EXIT_CONFIG, EXIT_ORACLE, EXIT_INTEGRATION, EXIT_ACCEPTANCE = 0, 2, 3, 4, 5


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` is the dotted field path."""

    def __init__(self, message: str, path: str = "", line: Optional[int] = None):
        where = path or "<root>"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def output_dir() -> Path:
    return Path(os.environ.get(ENV_OUTPUT_DIR, DEFAULT_OUTPUT_DIR))


# --------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Parsed run configuration.  ``to_dict`` gives the canonical JSON form."""

    problem: Any
    alpha: float
    theta: float
    t_end: float
    beta: float = 0.0
    scaling: dict = field(default_factory=lambda: {"kind": "unit"})
    mode: str = "basic"
    override: bool = False
    t0: float = 1.0
    samples: int = 400
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_steps: int = 500_000_000
    initial: Optional[dict] = None
    outputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "problem": copy.deepcopy(self.problem),
            "params": {"alpha": self.alpha, "theta": self.theta, "beta": self.beta,
                       "scaling": dict(self.scaling)},
            "mode": self.mode,
            "override": self.override,
            "t0": self.t0,
            "t_end": self.t_end,
            "samples": self.samples,
            "integrator": {"rel_tol": self.rel_tol, "abs_tol": self.abs_tol, "max_steps": self.max_steps},
            "initial": copy.deepcopy(self.initial),
            "outputs": copy.deepcopy(self.outputs),
        }

    def scaling_function(self) -> ScalingFunction:
        kind = self.scaling["kind"]
        if kind == "unit":
            return ScalingFunction.unit()
        if kind == "power":
            return ScalingFunction.power(self.scaling["r"])
        return ScalingFunction.exponential(self.scaling["c"])

    def dynamics_params(self) -> DynamicsParams:
        return DynamicsParams(self.alpha, self.theta, self.beta, self.scaling_function())


_SCHEMA = {
    "": ({"problem", "params", "t_end"}, {"mode", "override", "t0", "samples", "integrator", "initial", "outputs"}),
    "params": ({"alpha", "theta"}, {"beta", "scaling"}),
    "params.scaling": ({"kind"}, {"r", "c"}),
    "integrator": (set(), {"rel_tol", "abs_tol", "max_steps"}),
    "initial": (set(), {"x0", "lambda0", "x_dot0", "lambda_dot0"}),
    "outputs": (set(), {"csv_path", "json_path", "svg_paths"}),
    "problem": ({"Q", "c", "A", "b"}, set()),
}


class _Reader:
    def __init__(self, text: Optional[str]):
        self.text = text

    def line_of(self, path: str) -> Optional[int]:
        if not self.text:
            return None
        pos = 0
        found = None
        for key in path.split("."):
            m = re.compile(r'"%s"\s*:' % re.escape(key)).search(self.text, pos)
            if m is None:
                break
            pos = m.start()
            found = pos
        if found is None:
            return 1
        return self.text.count("\n", 0, found) + 1

    def fail(self, message: str, path: str):
        raise ConfigError(message, path, self.line_of(path))

    def obj(self, value, path):
        if not isinstance(value, dict):
            self.fail(f"expected an object, got {type(value).__name__}", path)
        required, optional = _SCHEMA.get(path, (set(), set()))
        for key in sorted(required - value.keys()):
            self.fail("missing required field", f"{path}.{key}" if path else key)
        for key in sorted(value.keys() - required - optional):
            self.fail("unknown field", f"{path}.{key}" if path else key)
        return value

    def number(self, value, path, positive=False, nonnegative=False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"expected a number, got {json.dumps(value)}", path)
        value = float(value)
        if not math.isfinite(value):
            self.fail("must be finite", path)
        if positive and not value > 0:
            self.fail("must be positive", path)
        if nonnegative and value < 0:
            self.fail("must be nonnegative", path)
        return value

    def integer(self, value, path, minimum=1):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            self.fail(f"expected an integer, got {json.dumps(value)}", path)
        if value < minimum:
            self.fail(f"must be >= {minimum}", path)
        return int(value)

    def vector(self, value, path):
        if not isinstance(value, list) or not value:
            self.fail("expected a nonempty array of numbers", path)
        return [self.number(v, f"{path}[{i}]") for i, v in enumerate(value)]

    def matrix(self, value, path):
        if not isinstance(value, list) or not value:
            self.fail("expected a nonempty array of rows", path)
        rows = [self.vector(r, f"{path}[{i}]") for i, r in enumerate(value)]
        if len({len(r) for r in rows}) != 1:
            self.fail("rows have different lengths", path)
        return rows

    def string(self, value, path):
        if not isinstance(value, str):
            self.fail(f"expected a string, got {json.dumps(value)}", path)
        return value


def config_from_dict(data: dict, text: Optional[str] = None) -> RunConfig:
    rd = _Reader(text)
    rd.obj(data, "")
    prob = data["problem"]
    if isinstance(prob, str):
        if prob not in CATALOG_NAMES:
            rd.fail(f"unknown catalog problem {prob!r}; valid names: {', '.join(CATALOG_NAMES)}", "problem")
    elif isinstance(prob, dict):
        rd.obj(prob, "problem")
        Q = rd.matrix(prob["Q"], "problem.Q")
        c = rd.vector(prob["c"], "problem.c")
        A = rd.matrix(prob["A"], "problem.A")
        b = rd.vector(prob["b"], "problem.b")
        n = len(c)
        if len(Q) != n or len(Q[0]) != n:
            rd.fail(f"Q must be {n}x{n} to match c", "problem.Q")
        if len(A[0]) != n:
            rd.fail(f"A must have {n} columns", "problem.A")
        if len(b) != len(A):
            rd.fail(f"b must have {len(A)} entries", "problem.b")
        prob = {"Q": Q, "c": c, "A": A, "b": b}
    else:
        rd.fail("expected a catalog name or an object with Q, c, A, b", "problem")
    params = rd.obj(data["params"], "params")
    cfg = RunConfig(
        problem=prob,
        alpha=rd.number(params["alpha"], "params.alpha"),
        theta=rd.number(params["theta"], "params.theta"),
        t_end=rd.number(data["t_end"], "t_end", positive=True),
    )
    if "beta" in params:
        cfg.beta = rd.number(params["beta"], "params.beta", nonnegative=True)
    if "scaling" in params:
        sc = rd.obj(params["scaling"], "params.scaling")
        kind = rd.string(sc["kind"], "params.scaling.kind")
        need = {"unit": None, "power": "r", "exponential": "c"}
        if kind not in need:
            rd.fail("kind must be unit, power or exponential", "params.scaling.kind")
        extra = set(sc) - {"kind"} - ({need[kind]} if need[kind] else set())
        if extra:
            rd.fail(f"field not allowed for {kind} scaling", f"params.scaling.{sorted(extra)[0]}")
        cfg.scaling = {"kind": kind}
        if need[kind]:
            if need[kind] not in sc:
                rd.fail("missing required field", f"params.scaling.{need[kind]}")
            cfg.scaling[need[kind]] = rd.number(sc[need[kind]], f"params.scaling.{need[kind]}")
    if "mode" in data:
        cfg.mode = rd.string(data["mode"], "mode")
        if cfg.mode not in MODES:
            rd.fail(f"mode must be one of {', '.join(MODES)}", "mode")
    if "override" in data:
        if not isinstance(data["override"], bool):
            rd.fail("expected true or false", "override")
        cfg.override = data["override"]
    if "t0" in data:
        cfg.t0 = rd.number(data["t0"], "t0", positive=True)
    if not cfg.t_end > cfg.t0:
        rd.fail(f"must exceed t0={cfg.t0:g}", "t_end")
    if "samples" in data:
        cfg.samples = rd.integer(data["samples"], "samples", minimum=2)
    if "integrator" in data:
        integ = rd.obj(data["integrator"], "integrator")
        if "rel_tol" in integ:
            cfg.rel_tol = rd.number(integ["rel_tol"], "integrator.rel_tol", positive=True)
            if cfg.rel_tol > 1e-2:
                rd.fail("must be <= 1e-2", "integrator.rel_tol")
        if "abs_tol" in integ:
            cfg.abs_tol = rd.number(integ["abs_tol"], "integrator.abs_tol", positive=True)
        if "max_steps" in integ:
            cfg.max_steps = rd.integer(integ["max_steps"], "integrator.max_steps")
    if data.get("initial") is not None:
        init = rd.obj(data["initial"], "initial")
        cfg.initial = {k: rd.vector(v, f"initial.{k}") for k, v in init.items()}
    if data.get("outputs") is not None:
        outs = rd.obj(data["outputs"], "outputs")
        cfg.outputs = {}
        for key in ("csv_path", "json_path"):
            if outs.get(key) is not None:
                cfg.outputs[key] = rd.string(outs[key], f"outputs.{key}")
        if outs.get("svg_paths") is not None:
            if not isinstance(outs["svg_paths"], list):
                rd.fail("expected an array of paths", "outputs.svg_paths")
            cfg.outputs["svg_paths"] = [rd.string(p, f"outputs.svg_paths[{i}]") for i, p in enumerate(outs["svg_paths"])]
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse JSON config text; errors name the field path and line."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, "", exc.lineno) from None
    return config_from_dict(data, text)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", "") from None
    return parse_config(text)


# --------------------------------------------------------------------------
# run


def build_problem(cfg: RunConfig):
    if isinstance(cfg.problem, str):
        return catalog(cfg.problem)
    p = cfg.problem
    try:
        return quadratic_problem(p["Q"], p["c"], p["A"], p["b"], label="inline-quadratic")
    except ContractError as exc:
        raise ConfigError(str(exc), "problem") from None


def _initial_state(cfg: RunConfig, problem, z_star) -> SystemState:
    base = default_initial_state(problem, z_star, cfg.t0)
    if not cfg.initial:
        return base
    vals = {
        "x0": base.x, "lambda0": base.lam, "x_dot0": base.x_dot, "lambda_dot0": base.lam_dot,
    }
    sizes = {"x0": problem.n, "lambda0": problem.m, "x_dot0": problem.n, "lambda_dot0": problem.m}
    for key, v in cfg.initial.items():
        if len(v) != sizes[key]:
            raise ConfigError(f"expected {sizes[key]} entries, got {len(v)}", f"initial.{key}")
        vals[key] = np.array(v)
    return SystemState(cfg.t0, vals["x0"], vals["lambda0"], vals["x_dot0"], vals["lambda_dot0"])


def _rate_or_none(rows, quantity, t_min, t_max):
    try:
        return estimate_rate(rows, quantity, t_min, t_max).to_dict()
    except EstimationError as exc:
        return {"quantity": quantity, "error": str(exc)}


def _orate_or_none(rows, quantity, power):
    try:
        return check_o_rate(rows, quantity, power).to_dict()
    except EstimationError as exc:
        return {"quantity": quantity, "error": str(exc)}


def _rate_ok(entry, bound):
    # quantities identically zero (e.g. feas without constraints) carry no rate
    if "error" in entry:
        return None
    return entry["slope"] <= bound


def _acceptance_flags(sim, rates, orates, r_power):
    rows = sim.rows
    flags = {}
    flags["A2"] = energy_excess(rows, sim.rel_tol) <= 0
    a3 = [_rate_ok(rates[q], -1.8) for q in ("feas", "f_gap")]
    flags["A3"] = None if all(v is None for v in a3) else all(v is not False for v in a3)
    a4 = [orates[q].get("o_rate_pass") for q in ("feas", "f_gap", "vel")]
    flags["A4"] = None if all(v is None for v in a4) else all(v is not False for v in a4)
    rep = trajectory_convergence_check(sim.log, sim.problem, 1e-3, 1e-2)
    flags["A5"] = rep.passed
    last = rows[-1]
    flags["A6"] = last.stat_resid <= 1e-3 and last.dual_resid <= 1e-3
    t = column(rows, "t")
    i2 = int(np.argmin(np.abs(t - t[-1] / 2)))
    ch = []
    for acc in ("acc_tDf", "acc_tv2", "acc_tgap"):
        col = column(rows, acc)
        ch.append((col[-1] - col[i2]) / col[-1] if col[-1] > 0 else 0.0)
    flags["A7"] = max(ch) <= 0.05
    if r_power is not None:
        slope_ok = _rate_ok(rates["feas"], -(2 + r_power) + 0.2)
        flags["A8"] = bool(slope_ok) and bool(orates["feas"].get("o_rate_pass"))
    return flags, rep


def execute(cfg: RunConfig, stem: str = "run") -> tuple[dict, int]:
    """Run one configuration; returns ``(summary, exit_code)``.

    Configuration and oracle problems are reported in the summary under
    ``error`` together with the matching exit code.
    """
    start = time.perf_counter()
    summary: dict = {"config": cfg.to_dict(), "label": stem}
    try:
        problem = build_problem(cfg)
        params = cfg.dynamics_params()
        report = validate_params(params, cfg.mode, cfg.t0)
        summary["validation"] = {"mode": cfg.mode, "passed": report.passed, "violations": list(report.violations)}
        if not report.passed and not cfg.override:
            raise ConfigError(
                f"parameters fail {cfg.mode} validation: {'; '.join(report.violations)} "
                "(set \"override\": true to run anyway)",
                "params",
            )
    except (ConfigError, ContractError, LookupError) as exc:
        summary["error"] = str(exc)
        return summary, EXIT_CONFIG
    try:
        z_star = solve_kkt_oracle(problem, tol=1e-10)
    except OracleError as exc:
        summary["error"] = str(exc)
        return summary, EXIT_ORACLE
    summary["oracle"] = {"x": z_star.x.tolist(), "lambda": z_star.lam.tolist()}
    try:
        init = _initial_state(cfg, problem, z_star)
    except (ConfigError, ContractError) as exc:
        summary["error"] = str(exc)
        return summary, EXIT_CONFIG
    sim = simulate(
        problem, params, cfg.t_end, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol, samples=cfg.samples,
        initial=init, max_steps=cfg.max_steps, z_star=z_star,
        unvalidated=cfg.override or not report.passed,
    )
    summary["termination"] = str(sim.log.termination)
    summary["step_stats"] = sim.log.step_stats
    rows = sim.rows
    code = EXIT_OK if sim.completed else EXIT_INTEGRATION
    if rows:
        summary["final"] = dict(zip(COLUMNS, rows[-1].as_tuple()))
    r_power = params.scaling.param if params.scaling.kind == "power" else None
    p_rate = 2.0 + (r_power or 0.0)
    if sim.completed and len(rows) >= 2:
        T = rows[-1].t
        t_min, t_max = max(rows[0].t, T / 200), T / 2
        rates = {q: _rate_or_none(rows, q, t_min, t_max) for q in ("feas", "f_gap", "vel", "bregman", "stat_resid")}
        orates = {
            "feas": _orate_or_none(rows, "feas", p_rate),
            "f_gap": _orate_or_none(rows, "f_gap", p_rate),
            "vel": _orate_or_none(rows, "vel", 1.0),
        }
        flags, conv = _acceptance_flags(sim, rates, orates, r_power)
        summary["rate_window"] = [t_min, t_max]
        summary["rates"] = rates
        summary["o_rates"] = orates
        summary["trajectory_convergence"] = conv.to_dict()
        summary["flags"] = flags
    summary["series"] = {c: column(rows, c).tolist() for c in COLUMNS} if rows else {}
    summary["seconds"] = time.perf_counter() - start
    _write_outputs(cfg, summary, rows, stem)
    return summary, code


def write_csv(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow(["%.17g" % v for v in r.as_tuple()])


def _svgs_for(summary) -> list[tuple[str, str]]:
    s = summary.get("series") or {}
    if not s.get("t"):
        return []
    t = s["t"]
    label = summary.get("label", "run")
    rates = {q: (t, s[q]) for q in ("feas", "f_gap", "vel", "bregman", "stat_resid", "dual_resid")}
    rates["|f_gap|"] = rates.pop("f_gap")
    en = {q: (t, s[q]) for q in ("energy", "lag_gap")}
    return [
        ("rates", loglog_svg(rates, f"{label}: residuals")),
        ("energy", loglog_svg(en, f"{label}: energy and Lagrangian gap")),
    ]


def _write_outputs(cfg: RunConfig, summary: dict, rows, stem: str) -> None:
    outs = cfg.outputs
    base = output_dir()
    csv_path = Path(outs["csv_path"]) if outs.get("csv_path") else base / f"{stem}.csv"
    json_path = Path(outs["json_path"]) if outs.get("json_path") else base / f"{stem}.json"
    write_csv(csv_path, rows)
    summary["files"] = {"csv": str(csv_path), "json": str(json_path)}
    svg_paths = outs.get("svg_paths") or []
    if svg_paths:
        plots = _svgs_for(summary)
        written = []
        for path, (_, text) in zip(svg_paths, plots):
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            Path(path).write_text(text)
            written.append(str(path))
        summary["files"]["svg"] = written
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps(summary, indent=1, default=_json_default) + "\n")


# --------------------------------------------------------------------------
# sweep


def _resolve(d: dict, path: str):
    keys = path.split(".")
    cur = d
    for k in keys[:-1]:
        if not isinstance(cur, dict) or k not in cur or not isinstance(cur[k], dict):
            return None, None
        cur = cur[k]
    return cur, keys[-1]


def expand_grid(base: dict, grid: dict) -> list[dict]:
    """Configs for the Cartesian product of ``grid`` (row-major in key order)."""
    if not isinstance(grid, dict) or not grid:
        raise ConfigError("grid must be a nonempty object mapping field paths to value lists", "grid")
    full = config_from_dict(base).to_dict()
    for path, values in grid.items():
        parent, key = _resolve(full, path)
        if parent is None or (key not in parent and path not in _optional_paths()):
            raise ConfigError("grid path does not resolve in the run config", f"grid.{path}")
        if not isinstance(values, list) or not values:
            raise ConfigError("expected a nonempty list of values", f"grid.{path}")
    out = []
    for combo in itertools.product(*grid.values()):
        d = copy.deepcopy(base)
        for path, value in zip(grid, combo):
            parts = path.split(".")
            cur = d
            for k in parts[:-1]:
                cur = cur.setdefault(k, {})
            cur[parts[-1]] = value
        out.append(d)
    return out


def _optional_paths():
    return {"params.scaling.r", "params.scaling.c"}


def _suffix(path: str, idx: int) -> str:
    p = Path(path)
    return str(p.with_name(f"{p.stem}_{idx}{p.suffix}"))


def _sweep_one(args):
    idx, data, stem = args
    if isinstance(data.get("outputs"), dict):
        outs = data["outputs"]
        for key in ("csv_path", "json_path"):
            if outs.get(key):
                outs[key] = _suffix(outs[key], idx)
        if outs.get("svg_paths"):
            outs["svg_paths"] = [_suffix(p, idx) for p in outs["svg_paths"]]
    try:
        cfg = config_from_dict(data)
    except ConfigError as exc:
        return {"index": idx, "config": data, "error": str(exc), "exit_code": EXIT_CONFIG}
    summary, code = execute(cfg, f"{stem}_{idx}")
    summary["index"] = idx
    summary["exit_code"] = code
    return summary


def sweep(base: dict, grid: dict, parallelism: int = 1, stem: str = "sweep") -> list[dict]:
    """Run every grid point; failures are recorded per run, order follows the grid."""
    jobs = [(i, d, stem) for i, d in enumerate(expand_grid(base, grid))]
    if parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(_sweep_one, jobs))
    return [_sweep_one(j) for j in jobs]


# --------------------------------------------------------------------------
# entry points


def _print_summary(summary: dict) -> None:
    cfg = summary.get("config", {})
    p = cfg.get("params", {})
    head = f"[{summary.get('index', '-')}] {cfg.get('problem') if isinstance(cfg.get('problem'), str) else 'inline'} " \
           f"alpha={p.get('alpha')} theta={p.get('theta')} beta={p.get('beta')}"
    if "error" in summary:
        print(f"{head}: error: {summary['error']}")
        return
    rates = summary.get("rates", {})
    slope = rates.get("feas", {}).get("slope")
    slope_s = f"{slope:.3f}" if isinstance(slope, float) else "n/a"
    flags = " ".join(f"{k}={'pass' if v else ('n/a' if v is None else 'fail')}"
                     for k, v in summary.get("flags", {}).items())
    print(f"{head}: {summary.get('termination')} feas-slope {slope_s} {flags}")


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary, code = execute(cfg, Path(args.config).stem)
    if "error" in summary:
        print(f"error: {summary['error']}", file=sys.stderr)
    else:
        _print_summary(summary)
        print(f"wrote {summary['files']['csv']} and {summary['files']['json']}")
    return code


def _load_grid(spec: str) -> dict:
    p = Path(spec)
    text = p.read_text() if p.is_file() else spec
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"grid is not valid JSON: {exc.msg}", "grid", exc.lineno) from None


def cmd_sweep(args) -> int:
    try:
        base_text = Path(args.config).read_text()
        base = json.loads(base_text)
        config_from_dict(base, base_text)
        grid = _load_grid(args.grid)
        results = sweep(base, grid, args.parallel, Path(args.config).stem)
    except json.JSONDecodeError as exc:
        print(f"config error: line {exc.lineno}: {exc.msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for s in results:
        _print_summary(s)
    out = Path(args.json) if args.json else output_dir() / f"{Path(args.config).stem}_sweep.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(results, indent=1, default=_json_default) + "\n")
    print(f"wrote {out}")
    return EXIT_OK if all(s.get("exit_code") == EXIT_OK for s in results) else EXIT_INTEGRATION


def cmd_verify(args) -> int:
    ids = acceptance.SUITES[args.suite]
    results = acceptance.run_criteria(ids, progress=lambda r: print(acceptance.format_line(r), flush=True))
    report = {
        "suite": args.suite,
        "passed": all(r.passed for r in results),
        "criteria": [r.to_dict() for r in results],
    }
    out = Path(args.json) if args.json else output_dir() / f"verify_{args.suite}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=1, default=_json_default) + "\n")
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed; report in {out}")
    return EXIT_OK if report["passed"] else EXIT_ACCEPTANCE


def cmd_report(args) -> int:
    try:
        data = json.loads(Path(args.summary).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read summary: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summaries = data if isinstance(data, list) else [data]
    out = Path(args.svg)
    out.mkdir(parents=True, exist_ok=True)
    n = 0
    for s in summaries:
        label = s.get("label") or Path(args.summary).stem
        for kind, text in _svgs_for(s):
            path = out / f"{label}_{kind}.svg"
            path.write_text(text)
            print(f"wrote {path}")
            n += 1
    if n == 0:
        print("no series found in summary", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="accelpd", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="integrate one configuration")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="run the Cartesian product of a parameter grid")
    p.add_argument("config")
    p.add_argument("--grid", required=True, help="JSON object (or file) mapping field paths to value lists")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--json", help="path of the combined summary")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("verify", help="run an acceptance suite")
    p.add_argument("suite", choices=sorted(acceptance.SUITES))
    p.add_argument("--json", help="path of the machine-readable report")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("report", help="render SVG plots from a run or sweep summary")
    p.add_argument("summary")
    p.add_argument("--svg", required=True, help="output directory")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
