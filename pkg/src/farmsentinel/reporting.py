"""Report emission: human-readable tables plus a machine-readable JSON file.

Golden tests pin the structured JSON only; table whitespace is presentation,
not a contract.
"""

from __future__ import annotations

import json
from pathlib import Path

from .metrics import NO_DETECTION, EvalReport, LatencyStats


def _round(value, digits=6):
    return None if value is None else round(value, digits)


def _stats_dict(stats: LatencyStats) -> dict:
    return {
        "count": stats.count,
        "mean_ms": _round(stats.mean),
        "min_ms": _round(stats.min),
        "max_ms": _round(stats.max),
        "stddev_ms": _round(stats.stddev),
    }


def eval_report_to_dict(report: EvalReport) -> dict:
    doc: dict = {
        "classes": {},
        "map": _round(report.map_value),
        "unknown_classes": sorted(report.unknown_classes),
    }
    for cls in sorted(report.per_class):
        m = report.per_class[cls]
        doc["classes"][cls] = {
            "precision": _round(m.precision),
            "recall": _round(m.recall),
            "ap": _round(m.ap),
            "f1": _round(m.f1),
            "instances": m.instances,
            "accuracy": _round(m.accuracy),
            "mean_tp_confidence": _round(m.mean_tp_confidence),
        }
    if report.confusion is not None:
        cm = report.confusion
        outcomes = list(cm.classes) + [NO_DETECTION]
        doc["confusion"] = {
            actual: {out: cm.count(actual, out) for out in outcomes}
            for actual in cm.classes
        }
    if report.latency:
        doc["latency"] = {
            model: _stats_dict(stats) for model, stats in sorted(report.latency.items())
        }
    return doc


def render_eval_report(report: EvalReport) -> str:
    lines = []
    header = f"{'Class':<12}{'Inst':>6}{'Precision':>11}{'Recall':>9}{'AP':>8}{'F1':>8}{'Acc':>7}{'TPconf%':>9}"
    lines.append(header)
    lines.append("-" * len(header))
    for cls in sorted(report.per_class):
        m = report.per_class[cls]
        acc = f"{m.accuracy:.2f}" if m.accuracy is not None else "-"
        tpc = f"{m.mean_tp_confidence * 100:.1f}" if m.mean_tp_confidence is not None else "-"
        lines.append(
            f"{cls:<12}{m.instances:>6}{m.precision:>11.3f}{m.recall:>9.3f}"
            f"{m.ap:>8.3f}{m.f1:>8.3f}{acc:>7}{tpc:>9}"
        )
    lines.append(f"mAP: {report.map_value:.4f}")
    if report.unknown_classes:
        lines.append(
            "classes in labels but not in config: " + ", ".join(sorted(report.unknown_classes))
        )
    if report.confusion is not None:
        cm = report.confusion
        outcomes = list(cm.classes) + [NO_DETECTION]
        lines.append("")
        lines.append("Confusion matrix (rows: actual, columns: predicted)")
        lines.append(f"{'':<12}" + "".join(f"{o:>10}" for o in outcomes))
        for actual in cm.classes:
            lines.append(
                f"{actual:<12}"
                + "".join(f"{cm.count(actual, out):>10}" for out in outcomes)
            )
    if report.latency:
        lines.append("")
        lines.append("Inference latency (ms per frame)")
        lines.append(f"{'Model':<16}{'Count':>7}{'Mean':>10}{'Min':>10}{'Max':>10}{'Stddev':>10}")
        for model, stats in sorted(report.latency.items()):
            lines.append(
                f"{model:<16}{stats.count:>7}{stats.mean:>10.1f}{stats.min:>10.1f}"
                f"{stats.max:>10.1f}{stats.stddev:>10.1f}"
            )
    return "\n".join(lines) + "\n"


def write_eval_report(report: EvalReport, report_dir: Path | str) -> tuple[Path, Path]:
    report_dir = Path(report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    json_path = report_dir / "evaluation.json"
    text_path = report_dir / "evaluation.txt"
    json_path.write_text(
        json.dumps(eval_report_to_dict(report), sort_keys=True, indent=2) + "\n"
    )
    text_path.write_text(render_eval_report(report))
    return json_path, text_path


def bench_to_dict(bench: dict) -> dict:
    return {
        section: {
            group: _stats_dict(stats) for group, stats in sorted(groups.items())
        }
        for section, groups in sorted(bench.items())
    }


def render_bench_report(bench: dict) -> str:
    groups = sorted({g for groups in bench.values() for g in groups})
    lines = []
    header = f"{'Model':<22}" + "".join(f"{g:>12}" for g in groups)
    lines.append("Mean inference time (ms) per class group")
    lines.append(header)
    lines.append("-" * len(header))
    for section in sorted(bench):
        row = f"{section:<22}"
        for group in groups:
            stats = bench[section].get(group)
            row += f"{stats.mean:>12.1f}" if stats else f"{'-':>12}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def write_bench_report(bench: dict, report_dir: Path | str) -> tuple[Path, Path]:
    report_dir = Path(report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    json_path = report_dir / "bench.json"
    text_path = report_dir / "bench.txt"
    json_path.write_text(json.dumps(bench_to_dict(bench), sort_keys=True, indent=2) + "\n")
    text_path.write_text(render_bench_report(bench))
    return json_path, text_path
