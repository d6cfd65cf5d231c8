"""Command-line front end: batch runs, metrics, validation and the live
service.

Exit codes: 0 success, 2 configuration error (with the offending field
named on stderr), 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import engine, logio
from .errors import ConfigError, WornsimError
from .metrics import compute_metrics
from .scenario import apply_overrides, validate_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _load_doc(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError("<file>", f"no such file: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError("<file>", f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "scenario document must be a JSON object")
    return doc


def _prepare_scenario(args):
    doc = _load_doc(args.scenario)
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    apply_overrides(doc, overrides)
    return validate_scenario(doc)


def _metrics_doc(metrics, timestamps: bool) -> dict:
    doc = metrics.to_dict()
    if timestamps:
        doc["generated_at"] = datetime.now(timezone.utc).isoformat()
    return doc


def cmd_run(args) -> int:
    try:
        sc = _prepare_scenario(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        log = engine.run(sc)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        logio.write_csv(log, out / "log.csv")
        if args.log_format == "jsonl":
            logio.write_jsonl(log, out / "log.jsonl")
        metrics = compute_metrics(log)
        (out / "metrics.json").write_text(
            json.dumps(_metrics_doc(metrics, args.timestamps), indent=2, sort_keys=True) + "\n")
    except WornsimError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        _prepare_scenario(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print("ok")
    return EXIT_OK


def cmd_metrics(args) -> int:
    try:
        log = logio.read_csv(args.log)
        metrics = compute_metrics(log)
    except FileNotFoundError:
        print(f"runtime error: no such file: {args.log}", file=sys.stderr)
        return EXIT_RUNTIME
    except WornsimError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    text = json.dumps(_metrics_doc(metrics, args.timestamps), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        sc = _prepare_scenario(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        import uvicorn

        from .service.app import create_app

        app = create_app(sc, publish_rate=args.publish_rate, pace=args.pace,
                         start_paused=args.start_paused)
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except OSError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except WornsimError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wornsim",
                                     description="Virtually worn robotic limb simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="dotted-path override, repeatable")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")

    p_run = sub.add_parser("run", help="run a scenario and write log + metrics")
    scenario_args(p_run)
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--log-format", choices=["csv", "jsonl"], default="csv",
                       help="jsonl additionally writes log.jsonl")
    p_run.add_argument("--timestamps", action="store_true",
                       help="include a wall-clock timestamp in metrics.json")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="validate a scenario file")
    scenario_args(p_val)
    p_val.set_defaults(func=cmd_validate)

    p_met = sub.add_parser("metrics", help="recompute metrics from a log CSV")
    p_met.add_argument("--log", required=True, help="log CSV file")
    p_met.add_argument("--out", default=None, help="write metrics JSON here instead of stdout")
    p_met.add_argument("--timestamps", action="store_true")
    p_met.set_defaults(func=cmd_metrics)

    p_srv = sub.add_parser("serve", help="serve the live bridge for a scenario")
    scenario_args(p_srv)
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8700)
    p_srv.add_argument("--publish-rate", type=float, default=30.0,
                       help="snapshot publish rate in Hz")
    p_srv.add_argument("--pace", choices=["real", "fast"], default="real",
                       help="real = wall-clock paced, fast = as fast as possible")
    p_srv.add_argument("--start-paused", action="store_true",
                       help="wait for a resume message before stepping")
    p_srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
