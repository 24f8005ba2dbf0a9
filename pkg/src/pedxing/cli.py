"""Command line harness.

Subcommands:
  run     one episode, trace to a file or stdout
  batch   the configured scenario x controller x seed sweep, plus a manifest
  stats   aggregate a batch manifest into group stats and rank tests
  tune    search the controller weights, write an overrides file
  serve   interactive websocket sessions (and the web UI, if built)

Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, replace

import yaml

from .config import Config, ConfigError, load_config, with_controller_overrides
from .metrics import build_report, episode_averages, format_table
from .simulate import CONTROLLER_NAMES, BatchItem, make_controller, run_batch, run_episode
from .trace import (
    Outcome,
    read_manifest,
    read_trace,
    resolve_trace_paths,
    trace_lines,
    write_manifest,
    write_trace,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_RUNTIME):
        super().__init__(message)
        self.code = code


def _load(args: argparse.Namespace) -> Config:
    config = load_config(args.config)
    overrides: dict = {}
    if getattr(args, "params_file", None):
        with open(args.params_file, "r", encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh)
        if not isinstance(loaded, dict):
            raise CliError(f"{args.params_file}: expected a mapping of controller "
                           "parameter overrides", EXIT_CONFIG)
        overrides.update(loaded)
    for item in getattr(args, "set", None) or []:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise CliError(f"--set expects field=value, got {item!r}", EXIT_CONFIG)
        overrides[name] = yaml.safe_load(value)
    if overrides:
        config = with_controller_overrides(config, overrides)
    return config


def _parse_seeds(text: str) -> list[int]:
    """Seeds as '0:100' (half-open range) or '1,4,9'."""
    if ":" in text:
        lo_s, _, hi_s = text.partition(":")
        lo, hi = int(lo_s), int(hi_s)
        if hi <= lo:
            raise CliError(f"empty seed range {text!r}", EXIT_CONFIG)
        return list(range(lo, hi))
    return [int(part) for part in text.split(",") if part.strip()]


def cmd_run(args: argparse.Namespace) -> int:
    config = _load(args)
    if args.scenario not in config.scripts:
        raise CliError(f"unknown scenario {args.scenario!r}; configured: "
                       f"{sorted(config.scripts)}", EXIT_CONFIG)
    controller = make_controller(args.controller, config.controller,
                                 config.geometry, config.metrics)
    trace = run_episode(config.scripts[args.scenario], controller, config.geometry,
                        config.controller, config.sim, args.seed,
                        config_hash=config.hash, scenario_name=args.scenario)
    if args.out:
        write_trace(trace, args.out)
    else:
        sys.stdout.write("\n".join(trace_lines(trace)) + "\n")
    print(f"{args.scenario}/{args.controller} seed={args.seed}: "
          f"{trace.outcome} at t={trace.t_end:.2f} s ({len(trace.ticks)} ticks)",
          file=sys.stderr)
    return EXIT_OK


def _trace_filename(item: BatchItem) -> str:
    return f"{item.scenario}__{item.controller}__{item.seed:04d}.jsonl"


def cmd_batch(args: argparse.Namespace) -> int:
    config = _load(args)
    scenarios = args.scenarios.split(",") if args.scenarios else list(config.batch.scenarios)
    controllers = args.controllers.split(",") if args.controllers else list(config.batch.controllers)
    seeds = _parse_seeds(args.seeds) if args.seeds else list(config.batch.seeds)
    for name in scenarios:
        if name not in config.scripts:
            raise CliError(f"unknown scenario {name!r}", EXIT_CONFIG)
    for name in controllers:
        if name not in CONTROLLER_NAMES:
            raise CliError(f"unknown controller {name!r}", EXIT_CONFIG)

    items = [BatchItem(scenario=s, controller=c, seed=seed)
             for s in scenarios for c in controllers for seed in seeds]
    os.makedirs(args.out_dir, exist_ok=True)
    total = len(items)
    entries: list[dict] = []
    done = 0

    def on_result(item: BatchItem, result) -> None:
        nonlocal done
        done += 1
        entry = {"scenario": item.scenario, "controller": item.controller,
                 "seed": item.seed}
        if isinstance(result, Exception):
            entry["error"] = f"{type(result).__name__}: {result}"
            status = "FAILED"
        else:
            path = _trace_filename(item)
            write_trace(result, os.path.join(args.out_dir, path))
            entry.update(path=path, outcome=result.outcome,
                         t_end=round(result.t_end, 6))
            status = result.outcome
        entries.append(entry)
        if not args.quiet:
            print(f"[{done}/{total}] {item.scenario}/{item.controller} "
                  f"seed={item.seed}: {status}", file=sys.stderr)

    workers = args.workers if args.workers is not None else config.batch.workers
    run_batch(items, config.scripts, config.geometry, config.controller, config.sim,
              metrics_cfg=config.metrics, config_hash=config.hash,
              workers=workers, on_result=on_result)

    manifest_path = os.path.join(args.out_dir, "manifest.json")
    write_manifest(manifest_path, entries, config.hash)
    failures = sum(1 for e in entries if "error" in e)
    print(f"wrote {total - failures} traces + manifest to {args.out_dir}"
          + (f" ({failures} failed)" if failures else ""), file=sys.stderr)
    if failures:
        raise CliError(f"{failures} of {total} episodes failed", EXIT_RUNTIME)
    return EXIT_OK


def _nan_to_none(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nan_to_none(v) for v in obj]
    return obj


def cmd_stats(args: argparse.Namespace) -> int:
    config = _load(args)
    try:
        manifest = read_manifest(args.manifest)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc), EXIT_RUNTIME) from exc
    ok_entries = [e for e in manifest["episodes"] if "error" not in e]
    skipped = len(manifest["episodes"]) - len(ok_entries)
    if skipped:
        print(f"note: skipping {skipped} failed episodes", file=sys.stderr)
    if not ok_entries:
        raise CliError("manifest has no successful episodes", EXIT_RUNTIME)

    paths = resolve_trace_paths({"episodes": ok_entries}, args.manifest)
    episodes: list[dict] = []
    hashes: set[str] = set()
    for entry, path in zip(ok_entries, paths):
        try:
            trace = read_trace(path)
        except (OSError, ValueError) as exc:
            raise CliError(str(exc), EXIT_RUNTIME) from exc
        hashes.add(trace.config_hash)
        ttc_avg, dst_avg = episode_averages(trace.states(), config.geometry,
                                            config.metrics)
        episodes.append({
            "scenario": trace.scenario, "controller": trace.controller,
            "t_end": trace.t_end, "ttc_avg": ttc_avg, "dst_avg": dst_avg,
            "outcome": trace.outcome,
        })
    if len(hashes) > 1 and not args.allow_mixed_hash:
        raise CliError("traces come from different configurations "
                       f"({sorted(hashes)}); rerun the batch or pass "
                       "--allow-mixed-hash to pool them anyway", EXIT_CONFIG)
    if hashes != {config.hash}:
        print(f"note: stats computed with config {config.hash}, traces recorded "
              f"{sorted(hashes)}", file=sys.stderr)

    present = {e["controller"] for e in episodes}
    controllers = [c for c in CONTROLLER_NAMES if c in present]
    controllers += sorted(present - set(controllers))
    mw_pair = tuple(args.mw_pair.split(","))
    if len(mw_pair) != 2:
        raise CliError("--mw-pair expects two comma-separated controller names",
                       EXIT_CONFIG)
    report = build_report(episodes, controllers, mw_pair=mw_pair)

    if args.json:
        doc = {
            "config_hash": sorted(hashes),
            "n_episodes": len(episodes),
            "groups": [_nan_to_none(asdict(g)) for g in report.groups],
            "comparisons": [_nan_to_none(asdict(c)) for c in report.comparisons],
        }
        json.dump(doc, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        outcomes = {o: sum(1 for e in episodes if e["outcome"] == o) for o in Outcome.ALL}
        print(f"episodes: {len(episodes)}  outcomes: {outcomes}")
        print(format_table(report, controllers))
    return EXIT_OK


def cmd_tune(args: argparse.Namespace) -> int:
    from .tuning import tune_controller

    config = _load(args)
    if args.budget is not None:
        config = replace(config, tuning=replace(config.tuning, budget=args.budget))
    result, overrides = tune_controller(config)

    if args.log:
        names = config.tuning.free
        with open(args.log, "w", encoding="utf-8") as fh:
            for i, (theta, value) in enumerate(result.history):
                rec = {"eval": i, "value": value,
                       "theta": {n: float(v) for n, v in zip(names, theta)}}
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(args.out, "w", encoding="utf-8") as fh:
        yaml.safe_dump(overrides, fh, sort_keys=True)
    print(f"best objective {result.value:.6g} after {result.evals} evaluations")
    for name in config.tuning.free:
        print(f"  {name} = {overrides[name]:.6g}")
    print(f"wrote {args.out}; use it via --params-file", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import build_app

    config = _load(args)
    host = args.host or config.serve.host
    port = args.port if args.port is not None else config.serve.port
    static_dir = args.static_dir or config.serve.static_dir
    app = build_app(config, static_dir=static_dir)
    print(f"serving on http://{host}:{port} (websocket at /ws)", file=sys.stderr)
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pedxing",
        description="Simulate and analyze vehicle-pedestrian crossing negotiation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="YAML config (default: packaged defaults)")
        p.add_argument("--params-file",
                       help="YAML mapping of controller parameter overrides")
        p.add_argument("--set", action="append", metavar="FIELD=VALUE",
                       help="override one controller parameter (repeatable)")

    p = sub.add_parser("run", help="run one episode")
    common(p)
    p.add_argument("--scenario", required=True)
    p.add_argument("--controller", required=True, choices=CONTROLLER_NAMES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="trace file (default: stdout)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="run the configured sweep")
    common(p)
    p.add_argument("--out-dir", default="runs")
    p.add_argument("--scenarios", help="comma list, overrides config")
    p.add_argument("--controllers", help="comma list, overrides config")
    p.add_argument("--seeds", help="'0:100' half-open range or comma list")
    p.add_argument("--workers", type=int)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("stats", help="summarize a batch")
    common(p)
    p.add_argument("manifest", help="manifest.json from a batch run")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--mw-pair", default="mpc,rulebased",
                   help="controllers for the pairwise rank test")
    p.add_argument("--allow-mixed-hash", action="store_true",
                   help="pool traces from different configurations")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("tune", help="search controller weights")
    common(p)
    p.add_argument("--out", default="tuned_params.yaml")
    p.add_argument("--log", help="write every evaluation as JSON lines")
    p.add_argument("--budget", type=int, help="override the evaluation budget")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("serve", help="interactive websocket sessions")
    common(p)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--static-dir", help="directory with the built web UI")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
