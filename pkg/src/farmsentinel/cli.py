"""Command line entry points: monitor, evaluate, bench.

Exit codes: 0 success, 2 configuration error, 3 startup error,
4 fatal runtime condition.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .bench import run_bench
from .config import load_config
from .errors import ConfigError, DatasetError, SentinelError, StartupError
from .evaluate import run_evaluate
from .pipeline import run_monitor
from .reporting import render_eval_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STARTUP = 3
EXIT_RUNTIME = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="farmsentinel",
        description="Dual-detector animal intrusion monitor and evaluation toolkit",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--conf-threshold", type=float, default=None,
                       help="override fusion confidence threshold")
        p.add_argument("--inference", choices=("sequential", "parallel"), default=None)
        p.add_argument("--transport", choices=("mock", "live"), default=None)
        p.add_argument("--audio", choices=("null", "real"), default=None)

    monitor = sub.add_parser("monitor", help="run the live monitoring loop")
    common(monitor)
    monitor.add_argument("--action-log", default=None, help="override action log path")

    evaluate = sub.add_parser("evaluate", help="score detectors against a dataset")
    common(evaluate)
    evaluate.add_argument("--dataset", required=True, help="dataset root directory")
    evaluate.add_argument("--predictions", default=None,
                          help="recorded replay file instead of configured detectors")
    evaluate.add_argument("--iou-thresh", type=float, default=None)
    evaluate.add_argument("--report-dir", default=None)

    bench = sub.add_parser("bench", help="measure per-model inference latency")
    common(bench)
    bench.add_argument("--dataset", required=True, help="dataset root directory")
    bench.add_argument("--report-dir", default=None)
    return parser


def apply_overrides(cfg, args):
    if args.conf_threshold is not None:
        cfg = replace(cfg, fusion=replace(cfg.fusion, conf_threshold=args.conf_threshold))
    execution = cfg.execution
    if args.inference is not None:
        execution = replace(execution, inference=args.inference)
    if args.transport is not None:
        execution = replace(execution, transport=args.transport)
    if args.audio is not None:
        execution = replace(execution, audio=args.audio)
        cfg = replace(cfg, deterrent=replace(cfg.deterrent, sink=args.audio))
    if getattr(args, "action_log", None):
        execution = replace(execution, action_log=args.action_log)
    cfg = replace(cfg, execution=execution)
    if getattr(args, "iou_thresh", None) is not None:
        cfg = replace(cfg, evaluation=replace(cfg.evaluation, iou_thresh=args.iou_thresh))
    if getattr(args, "report_dir", None):
        cfg = replace(cfg, evaluation=replace(cfg.evaluation, report_dir=args.report_dir))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        cfg = apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "monitor":
            return run_monitor(cfg)
        if args.command == "evaluate":
            report, (json_path, text_path) = run_evaluate(
                cfg, args.dataset, predictions_source=args.predictions
            )
            print(render_eval_report(report), end="")
            print(f"reports written: {json_path}, {text_path}")
            return EXIT_OK
        if args.command == "bench":
            _, (json_path, text_path) = run_bench(cfg, args.dataset)
            print(text_path.read_text(), end="")
            print(f"reports written: {json_path}, {text_path}")
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StartupError, DatasetError) as exc:
        print(f"startup error: {exc}", file=sys.stderr)
        return EXIT_STARTUP
    except SentinelError as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
