"""Experiment runner: seeded sweeps/searches from JSON configs to result tables.

Subcommands: sweep-time, sweep-alpha, search, estimate.  Each reads a JSON
run configuration (see README for the schema), executes with an optional
process pool, and writes a results table (CSV or JSONL) plus a manifest
recording the resolved configuration, seed, version, wall time, and any
per-cell failures.  Exit status: 0 on success, 1 if any cell failed,
2 on a configuration/usage error, 3 on an I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .channel import Channel, SeededRng, derive_seed
from .model import ModelParams, TimeAllocation
from .optimize import SearchConfig, point_seed, search
from .schemes import (
    CellFailure,
    HYBRID_TAGS,
    METRICS,
    PURE_TAGS,
    Scheme,
    SweepRow,
    cell_seed,
    evaluate_metric,
    allocation_for,
    sweep_alpha,
    sweep_time,
)

WORKERS_ENV = "SENSEALLOC_WORKERS"

CSV_HEADER = "channel,scheme,T,alpha,p,lambda0,lambda1,metric,value,stderr,n_samples,seed"

MODES = ("sweep-time", "sweep-alpha", "search", "estimate")

EXIT_OK = 0
EXIT_CELL_FAILURES = 1
EXIT_USAGE = 2
EXIT_IO = 3


class ConfigError(Exception):
    """Invalid run configuration."""


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _fmt(value: float) -> str:
    # repr of a Python float is the shortest decimal that round-trips.
    return repr(float(value))


def emit(rows: list[SweepRow], fmt: str) -> str:
    """Serialize rows to CSV (fixed header) or JSONL, newline-terminated."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for r in rows:
            writer.writerow(
                [
                    r.channel,
                    r.scheme,
                    _fmt(r.T),
                    "" if r.alpha is None else _fmt(r.alpha),
                    _fmt(r.p),
                    _fmt(r.lambda0),
                    _fmt(r.lambda1),
                    r.metric,
                    _fmt(r.value),
                    _fmt(r.stderr),
                    str(r.n_samples),
                    str(r.seed),
                ]
            )
        return buf.getvalue()
    if fmt == "jsonl":
        lines = []
        for r in rows:
            obj = asdict(r)
            if obj["alpha"] is None:
                del obj["alpha"]
            lines.append(json.dumps(obj, separators=(",", ":")))
        return "".join(line + "\n" for line in lines)
    raise ValueError(f"unknown format {fmt!r}")


def parse_rows(text: str, fmt: str) -> list[SweepRow]:
    """Inverse of emit: reconstruct the exact SweepRow list."""
    rows = []
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != CSV_HEADER.split(","):
            raise ValueError(f"unexpected CSV header {header}")
        for rec in reader:
            rows.append(
                SweepRow(
                    channel=rec[0],
                    scheme=rec[1],
                    T=float(rec[2]),
                    alpha=None if rec[3] == "" else float(rec[3]),
                    p=float(rec[4]),
                    lambda0=float(rec[5]),
                    lambda1=float(rec[6]),
                    metric=rec[7],
                    value=float(rec[8]),
                    stderr=float(rec[9]),
                    n_samples=int(rec[10]),
                    seed=int(rec[11]),
                )
            )
        return rows
    if fmt == "jsonl":
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            obj.setdefault("alpha", None)
            rows.append(SweepRow(**obj))
        return rows
    raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """A fully resolved run: exactly one mode with its grids and outputs."""

    mode: str
    channel: Channel
    params_list: list[ModelParams]
    metrics: tuple[str, ...]
    n_samples: int
    seed: int
    workers: int
    out: Path
    fmt: str
    resolved: dict = field(default_factory=dict)
    # sweep-time
    schemes: list[Scheme] | None = None
    T_grid: list[float] | None = None
    # sweep-alpha
    configs: list[str] | None = None
    T: float | None = None
    alpha_grid: list[float] | None = None
    # search
    metric: str | None = None
    grid_resolution: int = 5
    refine_iters: int = 20
    # estimate
    est_scheme: Scheme | None = None
    est_T: float | None = None
    allocation: TimeAllocation | None = None


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing required key {key!r}")
    return cfg[key]


def _parse_channel(value) -> Channel:
    try:
        return Channel(str(value))
    except ValueError:
        raise ConfigError(f"channel must be 'poisson' or 'gaussian', got {value!r}") from None


def _parse_scheme(spec) -> Scheme:
    try:
        if isinstance(spec, str):
            if spec in PURE_TAGS:
                return Scheme(spec)
            raise ConfigError(
                f"scheme {spec!r} needs an object form; pure tags are {PURE_TAGS}"
            )
        if isinstance(spec, dict):
            tag = _require(spec, "tag")
            if tag in PURE_TAGS:
                return Scheme(tag)
            if tag in HYBRID_TAGS:
                return Scheme(tag, alpha=float(_require(spec, "alpha")))
            if tag == "custom":
                abcd = _require(spec, "abcd")
                return Scheme.custom(*[float(v) for v in abcd])
            raise ConfigError(f"unknown scheme tag {tag!r}")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad scheme spec {spec!r}: {exc}") from None
    raise ConfigError(f"bad scheme spec {spec!r}")


def _float_list(value, key: str) -> list[float]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    if isinstance(value, list) and value:
        return [float(v) for v in value]
    raise ConfigError(f"{key} must be a number or a nonempty list of numbers")


def _params_grid(cfg: dict) -> list[ModelParams]:
    block = _require(cfg, "params")
    if not isinstance(block, dict):
        raise ConfigError("params must be an object with p, lambda0, lambda1")
    grids = [
        _float_list(_require(block, k), f"params.{k}") for k in ("p", "lambda0", "lambda1")
    ]
    out = []
    for p, l0, l1 in itertools.product(*grids):
        try:
            out.append(ModelParams(p, l0, l1))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return out


def _metrics_of(cfg: dict) -> tuple[str, ...]:
    metrics = cfg.get("metrics", list(METRICS))
    if not isinstance(metrics, list) or not metrics:
        raise ConfigError("metrics must be a nonempty list")
    bad = [m for m in metrics if m not in METRICS]
    if bad:
        raise ConfigError(f"unknown metrics {bad}; valid: {list(METRICS)}")
    return tuple(m for m in METRICS if m in metrics)


def _resolve_workers(args, cfg: dict) -> int:
    if args.workers is not None:
        workers = args.workers
    elif os.environ.get(WORKERS_ENV):
        try:
            workers = int(os.environ[WORKERS_ENV])
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer") from None
    else:
        workers = int(cfg.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    return workers


def load_config(args: argparse.Namespace) -> RunConfig:
    """Read the JSON config file and apply command-line overrides."""
    path = Path(args.config)
    try:
        cfg = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if "mode" in cfg and cfg["mode"] != args.mode:
        raise ConfigError(f"config mode {cfg['mode']!r} does not match subcommand {args.mode!r}")

    channel = _parse_channel(_require(cfg, "channel"))
    n_samples = int(args.samples if args.samples is not None else cfg.get("n_samples", 1_000_000))
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    workers = _resolve_workers(args, cfg)
    out = Path(args.out if args.out is not None else cfg.get("out", "results.csv"))
    fmt = args.format if args.format is not None else cfg.get("format", "csv")
    if fmt not in ("csv", "jsonl"):
        raise ConfigError("format must be 'csv' or 'jsonl'")

    run = RunConfig(
        mode=args.mode,
        channel=channel,
        params_list=_params_grid(cfg),
        metrics=_metrics_of(cfg),
        n_samples=n_samples,
        seed=seed,
        workers=workers,
        out=out,
        fmt=fmt,
    )

    if args.mode == "sweep-time":
        schemes = _require(cfg, "schemes")
        if not isinstance(schemes, list):
            raise ConfigError("schemes must be a list")
        run.schemes = [_parse_scheme(s) for s in schemes]
        run.T_grid = _float_list(_require(cfg, "T_grid"), "T_grid")
    elif args.mode == "sweep-alpha":
        tags = _require(cfg, "configs")
        if not isinstance(tags, list) or not tags:
            raise ConfigError("configs must be a nonempty list of hybrid tags")
        for tag in tags:
            if tag not in HYBRID_TAGS:
                raise ConfigError(f"configs entries must be in {HYBRID_TAGS}, got {tag!r}")
        run.configs = list(tags)
        run.T = float(_require(cfg, "T"))
        run.alpha_grid = _float_list(_require(cfg, "alpha_grid"), "alpha_grid")
        for a in run.alpha_grid:
            if not 0.0 <= a <= run.T:
                raise ConfigError(f"alpha {a} outside [0, T={run.T}]")
    elif args.mode == "search":
        run.metric = str(_require(cfg, "metric"))
        if run.metric not in METRICS:
            raise ConfigError(f"metric must be one of {list(METRICS)}")
        run.T = float(_require(cfg, "T"))
        run.grid_resolution = int(cfg.get("grid_resolution", 5))
        run.refine_iters = int(cfg.get("refine_iters", 20))
        if len(run.params_list) != 1:
            raise ConfigError("search mode takes scalar params, not grids")
        try:
            SearchConfig(
                metric=run.metric,
                channel=run.channel,
                T=run.T,
                grid_resolution=run.grid_resolution,
                refine_iters=run.refine_iters,
                n_samples=run.n_samples,
                seed=run.seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif args.mode == "estimate":
        has_scheme = "scheme" in cfg
        has_alloc = "allocation" in cfg
        if has_scheme == has_alloc:
            raise ConfigError("estimate mode needs exactly one of 'scheme'+'T' or 'allocation'")
        if has_scheme:
            run.est_scheme = _parse_scheme(cfg["scheme"])
            run.est_T = float(_require(cfg, "T"))
        else:
            alloc = cfg["allocation"]
            try:
                run.allocation = TimeAllocation(tuple(float(v) for v in alloc))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad allocation: {exc}") from None

    run.resolved = {
        **cfg,
        "mode": args.mode,
        "channel": channel.value,
        "n_samples": n_samples,
        "seed": seed,
        "workers": workers,
        "out": str(out),
        "format": fmt,
    }
    return run


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def _estimate_rows(config: RunConfig):
    """Estimate mode: evaluate every metric at one fixed allocation."""
    rows, failures = [], []
    for params in config.params_list:
        for metric in config.metrics:
            if config.est_scheme is not None:
                scheme, T = config.est_scheme, config.est_T
                label, alpha = scheme.label(), scheme.alpha
                seed = cell_seed(
                    config.seed, config.channel, scheme, T, params, metric, config.n_samples
                )
                make_alloc = lambda: allocation_for(scheme, T)
            else:
                alloc = config.allocation
                label, alpha, T = "custom", None, alloc.total
                seed = derive_seed(
                    config.seed,
                    "cell-alloc",
                    config.channel.value,
                    repr(alloc.times),
                    repr(params.p),
                    repr(params.lambda0),
                    repr(params.lambda1),
                    metric,
                    config.n_samples,
                )
                make_alloc = lambda: alloc
            try:
                est = evaluate_metric(
                    config.channel, make_alloc(), params, metric, config.n_samples, SeededRng(seed)
                )
                rows.append(
                    SweepRow(
                        channel=config.channel.value,
                        scheme=label,
                        T=float(T),
                        alpha=alpha,
                        p=params.p,
                        lambda0=params.lambda0,
                        lambda1=params.lambda1,
                        metric=metric,
                        value=est.value,
                        stderr=est.stderr,
                        n_samples=est.n_samples,
                        seed=seed,
                    )
                )
            except Exception as exc:
                failures.append(
                    CellFailure(
                        channel=config.channel.value,
                        scheme=label,
                        T=float(T),
                        alpha=alpha,
                        p=params.p,
                        lambda0=params.lambda0,
                        lambda1=params.lambda1,
                        metric=metric,
                        message=f"{type(exc).__name__}: {exc}",
                    )
                )
    return rows, failures, {}


def _execute(config: RunConfig, map_fn):
    if config.mode == "sweep-time":
        rows, failures = [], []
        for params in config.params_list:
            res = sweep_time(
                config.channel,
                config.schemes,
                config.T_grid,
                params,
                config.metrics,
                config.n_samples,
                config.seed,
                map_fn=map_fn,
            )
            rows.extend(res.rows)
            failures.extend(res.failures)
        return rows, failures, {}
    if config.mode == "sweep-alpha":
        rows, failures = [], []
        for params in config.params_list:
            res = sweep_alpha(
                config.channel,
                config.configs,
                config.T,
                config.alpha_grid,
                params,
                config.metrics,
                config.n_samples,
                config.seed,
                map_fn=map_fn,
            )
            rows.extend(res.rows)
            failures.extend(res.failures)
        return rows, failures, {}
    if config.mode == "search":
        params = config.params_list[0]
        search_cfg = SearchConfig(
            metric=config.metric,
            channel=config.channel,
            T=config.T,
            grid_resolution=config.grid_resolution,
            refine_iters=config.refine_iters,
            n_samples=config.n_samples,
            seed=config.seed,
        )
        result = search(search_cfg, params, map_fn=map_fn)
        rows = [
            SweepRow(
                channel=config.channel.value,
                scheme=Scheme.custom(*abcd).label(),
                T=float(config.T),
                alpha=None,
                p=params.p,
                lambda0=params.lambda0,
                lambda1=params.lambda1,
                metric=config.metric,
                value=est.value,
                stderr=est.stderr,
                n_samples=est.n_samples,
                seed=point_seed(search_cfg, abcd),
            )
            for abcd, est in result.trace
        ]
        extra = {
            "search_best": {
                "abcd": list(result.best_abcd),
                "value": result.best_estimate.value,
                "stderr": result.best_estimate.stderr,
                "evaluations": result.evaluations,
            }
        }
        return rows, [], extra
    if config.mode == "estimate":
        return _estimate_rows(config)
    raise ConfigError(f"unknown mode {config.mode!r}")


def version_string() -> str:
    """git-describe output when run inside a checkout, else the package version."""
    try:
        proc = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True,
            text=True,
            timeout=5,
        )
        if proc.returncode == 0 and proc.stdout.strip():
            return proc.stdout.strip()
    except Exception:
        pass
    return f"sensealloc-{__version__}"


def run(config: RunConfig) -> int:
    """Execute a resolved run config and write the results table + manifest."""
    start = time.perf_counter()
    if config.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows, failures, extra = _execute(config, pool.map)
    else:
        rows, failures, extra = _execute(config, map)
    wall = time.perf_counter() - start

    manifest = {
        "command": config.mode,
        "config": config.resolved,
        "seed": config.seed,
        "version": version_string(),
        "wall_time_s": wall,
        "n_rows": len(rows),
        "failures": [asdict(f) for f in failures],
        **extra,
    }
    try:
        config.out.parent.mkdir(parents=True, exist_ok=True)
        config.out.write_text(emit(rows, config.fmt))
        manifest_path = config.out.with_name(config.out.name + ".manifest.json")
        manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    except OSError as exc:
        print(f"error: cannot write results: {exc}", file=sys.stderr)
        return EXIT_IO
    if failures:
        print(f"{len(failures)} cell(s) failed; see {manifest_path}", file=sys.stderr)
        return EXIT_CELL_FAILURES
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sensealloc",
        description="Sweeps and searches over time-constrained sensing schemes "
        "for four-target detection (Poisson/Gaussian channels).",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    helps = {
        "sweep-time": "evaluate schemes over a grid of total time budgets",
        "sweep-alpha": "evaluate hybrid configurations over a grid of all-targets times",
        "search": "search group-constant allocations (a,b,c,d) under the budget",
        "estimate": "evaluate metrics at one fixed allocation",
    }
    for mode in MODES:
        p = sub.add_parser(mode, help=helps[mode])
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--samples", type=int, help="override n_samples per cell")
        p.add_argument(
            "--workers", type=int, help=f"worker processes (or set {WORKERS_ENV})"
        )
        p.add_argument("--out", help="results table path")
        p.add_argument("--format", choices=("csv", "jsonl"), help="results table format")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
