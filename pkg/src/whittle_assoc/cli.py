"""Command line: ``index``, ``simulate``, ``reproduce`` and ``verify``.

Config files are JSON with a ``schema_version`` field (currently 1)::

    {
      "schema_version": 1,
      "preset": "fig2a",            # optional; supplies the system
      "preset_value": null,         # sweep setting for swept presets
      "system": {"L": 20, "M": 100, "arrival_pmf": [...] or "p0": 0.6,
                 "mbs": [{"rate": 0.78, "holding_cost": 95}, ...],
                 "buffer": 200, "horizon": 20000, "warmup": 10000},
      "policies": ["random", "load", "snr", "throughput", "mixed", "whittle"],
      "seeds": [0, 1, 2],
      "solver": {"gamma": 0.05, "tol": 1e-8, "grid_step": 5, "method": "direct"},
      "out": "results"
    }

With a preset, ``system`` may hold only ``buffer``/``horizon``/``warmup``
overrides; a full ``system`` always wins over the preset.

Exit codes: 0 success, 1 usage, 2 validation, 3 numerical failure,
4 property-suite failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (InvalidArgumentError, MissingInputError,
                     NumericalFailureError, WhittleAssocError)
from .model import MbsParams, SystemConfig, uniform_arrival_pmf
from .plots import line_chart
from .policies import ALL_POLICIES, PolicyKind
from .presets import POLICY_COLUMNS, REPORTED, get_preset
from .sim import (METRIC_NAMES, compute_metrics, run_episode, run_experiment,
                  summarize)
from .verify import random_small_configs, run_property_suite, tiny_instance
from .whittle import IndexTable, WhittleSolverConfig, build_index_tables

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_PROPERTY = 0, 1, 2, 3, 4
MA_WINDOW = 100
FIGURE_TAIL = 10_000


class ConfigError(InvalidArgumentError):
    """Malformed or invalid experiment config."""


@dataclass(frozen=True)
class ExperimentSpec:
    system: SystemConfig
    policies: tuple = ALL_POLICIES
    seeds: tuple = tuple(range(10))
    solver: WhittleSolverConfig = field(default_factory=WhittleSolverConfig)
    out_dir: str = "results"
    preset: str | None = None
    preset_value: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "policies",
                           tuple(PolicyKind.parse(p) for p in self.policies))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.policies:
            raise ConfigError("policies: at least one policy required")
        if not self.seeds:
            raise ConfigError("seeds: at least one seed required")


# --------------------------------------------------------------------------
# config I/O

def serialize(spec: ExperimentSpec) -> str:
    solver = asdict(spec.solver)
    if solver["grid"] is not None:
        solver["grid"] = list(solver["grid"])
    doc = {
        "schema_version": SCHEMA_VERSION,
        "preset": spec.preset,
        "preset_value": spec.preset_value,
        "system": spec.system.to_dict(),
        "policies": [p.name.lower() for p in spec.policies],
        "seeds": list(spec.seeds),
        "solver": solver,
        "out": spec.out_dir,
    }
    return json.dumps(doc, indent=2) + "\n"


def _system_from_dict(d: dict) -> SystemConfig:
    unknown = set(d) - {"L", "M", "arrival_pmf", "p0", "mbs", "buffer", "horizon", "warmup"}
    if unknown:
        raise ConfigError(f"system: unknown field(s) {sorted(unknown)}")
    for key in ("L", "M", "mbs"):
        if key not in d:
            raise ConfigError(f"system.{key}: required")
    if ("arrival_pmf" in d) == ("p0" in d):
        raise ConfigError("system: give exactly one of arrival_pmf or p0")
    pmf = d["arrival_pmf"] if "arrival_pmf" in d else uniform_arrival_pmf(d["p0"], d["M"])
    try:
        mbs = tuple(MbsParams(float(m["rate"]), float(m["holding_cost"])) for m in d["mbs"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"system.mbs: each entry needs rate and holding_cost ({exc})") from None
    horizon = d.get("horizon", 20_000)
    return SystemConfig(L=d["L"], M=d["M"], arrival_pmf=tuple(pmf), mbs=mbs,
                        buffer=d.get("buffer", 200), horizon=horizon,
                        warmup=d.get("warmup", horizon // 2))


def parse_config(text: str, source: str = "<config>") -> ExperimentSpec:
    """Validated spec from JSON text; errors name the line or field."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be an object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    unknown = set(doc) - {"schema_version", "preset", "preset_value", "system",
                          "policies", "seeds", "solver", "out"}
    if unknown:
        raise ConfigError(f"unknown field(s) {sorted(unknown)}")
    try:
        system = doc.get("system") or {}
        preset, value = doc.get("preset"), doc.get("preset_value")
        if set(system) & {"L", "M", "mbs", "arrival_pmf", "p0"}:
            cfg = _system_from_dict(system)
        elif preset is not None:
            extra = set(system) - {"buffer", "horizon", "warmup"}
            if extra:
                raise ConfigError(f"system: with a preset only buffer/horizon/warmup "
                                  f"may be overridden, got {sorted(extra)}")
            cfg = _apply_overrides(get_preset(preset).config(value), **system)
        else:
            raise ConfigError("system: required when no preset is given")
        solver = WhittleSolverConfig(**(doc.get("solver") or {}))
        return ExperimentSpec(
            system=cfg,
            policies=tuple(doc.get("policies", [p.name for p in ALL_POLICIES])),
            seeds=tuple(doc.get("seeds", range(10))),
            solver=solver, out_dir=str(doc.get("out", "results")),
            preset=preset, preset_value=value)
    except ConfigError:
        raise
    except (InvalidArgumentError, TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> ExperimentSpec:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"config file not found: {path}")
    return parse_config(path.read_text(), str(path))


def _apply_overrides(cfg: SystemConfig, buffer=None, horizon=None, warmup=None) -> SystemConfig:
    changes = {}
    if buffer is not None:
        changes["buffer"] = int(buffer)
    if horizon is not None:
        changes["horizon"] = int(horizon)
        if warmup is None:
            changes["warmup"] = int(horizon) // 2
    if warmup is not None:
        changes["warmup"] = int(warmup)
    return cfg.replace(**changes) if changes else cfg


# --------------------------------------------------------------------------
# output helpers (main thread only, atomic replace)

def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    return "" if v is None else repr(float(v))


def moving_average(x: np.ndarray, window: int = MA_WINDOW) -> np.ndarray:
    """Trailing mean over ``window`` slots, NaN until the window fills."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.nan)
    if x.size >= window:
        c = np.cumsum(np.insert(x, 0, 0.0))
        out[window - 1:] = (c[window:] - c[:-window]) / window
    return out


def relative_error(obtained, ref):
    if obtained is None or ref == 0:
        return None
    return (obtained - ref) / abs(ref)


# --------------------------------------------------------------------------
# commands

def cmd_index(spec: ExperimentSpec, out_dir=None) -> Path:
    tables = build_index_tables(spec.system, spec.solver)
    out = Path(out_dir or spec.out_dir) / "index.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    tables.to_csv(out)
    return out


def metrics_rows(summaries: dict):
    for kind, summ in summaries.items():
        for seed, m in summ.per_seed:
            yield [kind.label, seed] + [_fmt(getattr(m, k)) for k in METRIC_NAMES]


def cmd_simulate(spec: ExperimentSpec, tables: IndexTable | None = None,
                 n_jobs: int = 1, out_dir=None) -> dict:
    """Run every policy/seed pair; writes ``metrics.csv`` and ``summary.json``."""
    out = Path(out_dir or spec.out_dir)
    if PolicyKind.WHITTLE in spec.policies and tables is None:
        tables = build_index_tables(spec.system, spec.solver)
        out.mkdir(parents=True, exist_ok=True)
        tables.to_csv(out / "index.csv")
    summaries = run_experiment(spec.system, spec.policies, spec.seeds, tables, n_jobs)
    _write_text(out / "metrics.csv",
                _csv_text(["policy", "seed", *METRIC_NAMES], metrics_rows(summaries)))
    doc = {"config": json.loads(serialize(spec)),
           "summary": {k.label: {"mean": s.mean, "stderr": s.stderr}
                       for k, s in summaries.items()}}
    _write_text(out / "summary.json", json.dumps(doc, indent=2) + "\n")
    return summaries


def _figure_runs(cfg, kinds, seeds, tables, n_jobs):
    """Metrics and the seed-averaged per-slot cost trace of every policy."""
    jobs = [(k, s) for k in kinds for s in seeds]

    def one(job):
        rec = run_episode(cfg, job[0], tables, job[1])
        return rec.cost_series, compute_metrics(rec, cfg.warmup)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]
    traces, summaries = {}, {}
    for k in kinds:
        mine = [(s, r) for (kk, s), r in zip(jobs, results) if kk == k]
        traces[k] = np.mean([r[0] for _, r in mine], axis=0)
        summaries[k] = summarize(k, [(s, r[1]) for s, r in mine])
    return traces, summaries


def cmd_reproduce(preset_name: str, seeds=tuple(range(10)), solver=None,
                  out_dir="results", n_jobs: int = 1, values=None, log=print,
                  **overrides) -> dict:
    """Run a preset; tables get reported-vs-obtained rows, figures get traces.

    Returns ``{sweep_value: {PolicyKind: PolicySummary}}``.
    """
    preset = get_preset(preset_name)
    solver = solver or WhittleSolverConfig()
    out = Path(out_dir) / preset.name
    kinds = ALL_POLICIES
    results, rows, tail_rows = {}, [], []
    for value, cfg in preset.configs():
        if values is not None and value not in values:
            continue
        cfg = _apply_overrides(cfg, **overrides)
        t0 = time.perf_counter()
        tables = build_index_tables(cfg, solver)
        tag = "" if value is None else f"_{preset.sweep}{value}"
        if preset.kind == "cost":
            traces, summaries = _figure_runs(cfg, kinds, seeds, tables, n_jobs)
            slots = np.arange(cfg.horizon)
            cols, header = [slots], ["slot"]
            for k in kinds:
                cols += [traces[k], moving_average(traces[k])]
                header += [f"{k.label}_raw", f"{k.label}_ma{MA_WINDOW}"]
            _write_text(out / f"trace{tag}.csv",
                        _csv_text(header, zip(*[c.tolist() for c in cols])))
            _write_text(out / f"trace{tag}.svg", line_chart(
                {k.label: moving_average(traces[k]) for k in kinds},
                title=f"{preset.name}{tag}: {MA_WINDOW}-slot moving average cost",
                xlabel="slot", ylabel="cost"))
            tail = min(FIGURE_TAIL, cfg.horizon - cfg.warmup)
            for k in kinds:
                tail_rows.append([value, k.label, float(traces[k][-tail:].mean()),
                                  summaries[k].stderr["avg_cost"]])
        else:
            summaries = run_experiment(cfg, kinds, seeds, tables, n_jobs)
            for label in POLICY_COLUMNS:
                k = PolicyKind.parse(label)
                got = summaries[k].mean[preset.kind]
                ref = REPORTED[preset.name][value][POLICY_COLUMNS.index(label)]
                rows.append([value, label, ref, got, summaries[k].stderr[preset.kind],
                             relative_error(got, ref)])
        _write_text(out / f"metrics{tag}.csv",
                    _csv_text(["policy", "seed", *METRIC_NAMES], metrics_rows(summaries)))
        results[value] = summaries
        if log:
            log(f"{preset.name} {preset.sweep or ''}{'' if value is None else value}: "
                f"{time.perf_counter() - t0:.1f}s")

    if preset.kind == "cost":
        _write_text(out / "last_window_cost.csv",
                    _csv_text([preset.sweep or "value", "policy", "mean_cost", "stderr_seed_mean"],
                              tail_rows))
        text = _format_rows(["value", "policy", "mean_cost", "stderr"], tail_rows)
        if preset.sweep:
            vals = list(results)
            _write_text(out / "sweep.svg", line_chart(
                {k.label: [results[v][k].mean["avg_cost"] for v in vals] for k in kinds},
                x=vals, title=f"{preset.name}: average cost", xlabel=preset.sweep,
                ylabel="cost"))
    else:
        header = [preset.sweep, "policy", "reported", "obtained", "stderr", "rel_error"]
        _write_text(out / "comparison.csv",
                    _csv_text(header, [[_cell(c) for c in r] for r in rows]))
        text = _format_rows(header, rows)
        vals = list(results)
        _write_text(out / "comparison.svg", line_chart(
            {k.label: [results[v][k].mean[preset.kind] for v in vals] for k in kinds},
            x=vals, title=f"{preset.name}: {preset.kind}", xlabel=preset.sweep,
            ylabel=preset.kind))
    _write_text(out / "report.txt", text)
    if log:
        log(text)
    return results


def _cell(v):
    return "" if v is None else v


def _format_rows(header, rows) -> str:
    def f(v):
        if v is None:
            return "-"
        if isinstance(v, float):
            return f"{v:.4g}"
        return str(v)
    cells = [[str(h) for h in header]] + [[f(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells) + "\n"


def cmd_verify(tiny: bool = False, log=print) -> int:
    configs = [tiny_instance()] if tiny else random_small_configs()
    results = run_property_suite(configs, log=log)
    failed = [r for r in results if not r.passed]
    if log:
        log(f"{len(results) - len(failed)}/{len(results)} properties hold")
    return EXIT_PROPERTY if failed else EXIT_OK


# --------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_system_args(p, with_seeds=True):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON experiment config")
    src.add_argument("--preset", help="named published configuration")
    p.add_argument("--value", type=int, help="sweep setting for swept presets")
    p.add_argument("--buffer", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--grid-step", type=int)
    p.add_argument("--method", choices=("iterative", "direct"))
    p.add_argument("--out")
    if with_seeds:
        p.add_argument("--seed-count", type=int)
        p.add_argument("--seed-start", type=int, default=0)
        p.add_argument("--policies", help="comma-separated policy names")
        p.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="whittle-assoc", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("index", help="build Whittle index tables (CSV)")
    _add_system_args(p, with_seeds=False)

    p = sub.add_parser("simulate", help="run episodes and write metrics CSV")
    _add_system_args(p)
    p.add_argument("--tables", help="existing index CSV for the Whittle policy")

    p = sub.add_parser("reproduce", help="regenerate a figure or table")
    p.add_argument("preset")
    p.add_argument("--values", help="comma-separated subset of sweep values")
    p.add_argument("--seed-count", type=int, default=10)
    p.add_argument("--seed-start", type=int, default=0)
    p.add_argument("--buffer", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--grid-step", type=int)
    p.add_argument("--method", choices=("iterative", "direct"))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="results")

    p = sub.add_parser("verify", help="run the structural property suite")
    p.add_argument("--tiny", action="store_true", help="tiny instance only")
    return parser


def _solver_from_args(args, base: WhittleSolverConfig) -> WhittleSolverConfig:
    changes = {k: v for k, v in (("gamma", args.gamma), ("grid_step", args.grid_step),
                                 ("method", args.method)) if v is not None}
    return WhittleSolverConfig(**{**asdict(base), **changes})


def spec_from_args(args) -> ExperimentSpec:
    if args.config:
        spec = load_config(args.config)
    else:
        spec = ExperimentSpec(system=get_preset(args.preset).config(args.value),
                              preset=args.preset.lower(), preset_value=args.value)
    cfg = _apply_overrides(spec.system, args.buffer, args.horizon, args.warmup)
    changes = dict(system=cfg, solver=_solver_from_args(args, spec.solver))
    if args.out:
        changes["out_dir"] = args.out
    if getattr(args, "seed_count", None) is not None:
        changes["seeds"] = tuple(range(args.seed_start, args.seed_start + args.seed_count))
    if getattr(args, "policies", None):
        changes["policies"] = tuple(s for s in args.policies.split(",") if s)
    fields = {**spec.__dict__, **changes}
    return ExperimentSpec(**fields)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args.tiny)
        if args.command == "reproduce":
            solver = _solver_from_args(args, WhittleSolverConfig())
            values = None if not args.values else [int(v) for v in args.values.split(",")]
            cmd_reproduce(args.preset, tuple(range(args.seed_start,
                                                   args.seed_start + args.seed_count)),
                          solver, args.out, args.jobs, values,
                          buffer=args.buffer, horizon=args.horizon, warmup=args.warmup)
            return EXIT_OK
        spec = spec_from_args(args)
        if args.command == "index":
            print(cmd_index(spec))
            return EXIT_OK
        tables = IndexTable.from_csv(args.tables) if args.tables else None
        summaries = cmd_simulate(spec, tables, args.jobs)
        rows = [[k.label] + [s.mean[m] for m in METRIC_NAMES] for k, s in summaries.items()]
        print(_format_rows(["policy", *METRIC_NAMES], rows), end="")
        return EXIT_OK
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (WhittleAssocError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
