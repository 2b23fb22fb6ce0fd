"""Dataset evaluation: run detectors (live or replay) over labelled stills
and compute every reported metric.

AP sweeps the full ranked prediction list, so the class/dedup filters are
applied with the confidence gate open; precision, recall, F1, confusion and
mean-true-positive-confidence are computed at the operating threshold (the
fusion threshold unless overridden).
"""

from __future__ import annotations

import time
from dataclasses import replace

from .config import AppConfig
from .dataset import Dataset, load_dataset
from .detectors import FIXTURE, DetectorSpec, SupervisedDetector
from .errors import DatasetError
from .fusion import FusionConfig, fuse
from .geometry import Detection
from .metrics import (
    NO_DETECTION,
    ClassMetrics,
    EvalReport,
    MatchOutcome,
    assign_predictions,
    average_precision,
    confusion_from_trials,
    f1,
    latency_stats,
    match_frame,
    mean_ap,
    precision_recall,
)
from .reporting import write_eval_report


def _open_gate(cfg: FusionConfig) -> FusionConfig:
    """Fusion config with the confidence gate open, for PR-curve sweeps."""
    return replace(cfg, conf_threshold=0.0)


def collect_predictions(
    cfg: AppConfig,
    dataset: Dataset,
    detector_specs: tuple[DetectorSpec, ...],
    detector_sleep=time.sleep,
) -> tuple[dict[str, list[Detection]], dict[str, list[float]]]:
    """Fused, ungated detections per frame plus latency samples per model."""
    detectors = [
        SupervisedDetector(spec=spec, sleep=detector_sleep).start()
        for spec in detector_specs
    ]
    gate_open = _open_gate(cfg.fusion)
    per_frame: dict[str, list[Detection]] = {}
    latency: dict[str, list[float]] = {d.spec.id: [] for d in detectors}
    try:
        for item in dataset.items:
            results = [
                d.safe_infer(item.frame_id, item.image_path) for d in detectors
            ]
            for detector, result in zip(detectors, results):
                if result is not None:
                    latency[detector.spec.id].append(result.elapsed_ms)
            dets = [list(r.detections) if r else [] for r in results]
            second = dets[1] if len(dets) > 1 else []
            fused = fuse(dets[0], second, gate_open, frame_id=item.frame_id)
            per_frame[item.frame_id] = list(fused.detections)
    finally:
        for detector in detectors:
            detector.stop()
    return per_frame, {k: v for k, v in latency.items() if v}


def evaluate_dataset(
    cfg: AppConfig,
    dataset: Dataset,
    per_frame: dict[str, list[Detection]],
    latency_samples: dict[str, list[float]] | None = None,
) -> EvalReport:
    iou_thresh = cfg.evaluation.iou_thresh
    op_threshold = (
        cfg.evaluation.operating_threshold
        if cfg.evaluation.operating_threshold is not None
        else cfg.fusion.conf_threshold
    )
    allowed = cfg.fusion.allowed_classes

    label_classes = {t.label for item in dataset.items for t in item.truths}
    unknown = tuple(sorted(label_classes - allowed))
    eval_classes = sorted(label_classes & allowed)
    if not eval_classes:
        raise DatasetError("no ground-truth instances for any configured class")

    scored_truths = [
        t for item in dataset.items for t in item.truths if t.label in allowed
    ]

    # full-sweep AP per class
    all_preds = [p for preds in per_frame.values() for p in preds]
    aps = {
        cls: average_precision(
            [p for p in all_preds if p.label == cls],
            [t for t in scored_truths if t.label == cls],
            iou_thresh,
        )
        for cls in eval_classes
    }

    # operating-point outcomes, TP confidences and recognition trials
    outcomes: dict[str, MatchOutcome] = {cls: MatchOutcome() for cls in eval_classes}
    tp_confidences: dict[str, list[float]] = {cls: [] for cls in eval_classes}
    trials: list[tuple[str, str]] = []
    for item in dataset.items:
        truths = [t for t in item.truths if t.label in allowed]
        op_preds = [
            p for p in per_frame.get(item.frame_id, []) if p.confidence >= op_threshold
        ]
        for cls, outcome in match_frame(op_preds, truths, iou_thresh).items():
            if cls in outcomes:
                outcomes[cls] = outcomes[cls] + outcome
        assigned = assign_predictions(op_preds, truths, iou_thresh)
        for pred, truth_idx in zip(op_preds, assigned):
            if truth_idx >= 0 and pred.label in tp_confidences:
                tp_confidences[pred.label].append(pred.confidence)
        item_classes = {t.label for t in truths}
        if len(item_classes) == 1:
            actual = next(iter(item_classes))
            predicted = max(
                op_preds, key=lambda p: p.confidence, default=None
            )
            trials.append((actual, predicted.label if predicted else NO_DETECTION))

    confusion = confusion_from_trials(trials, eval_classes) if trials else None
    accuracies = confusion.per_class_accuracy() if confusion else {}

    per_class: dict[str, ClassMetrics] = {}
    for cls in eval_classes:
        precision, recall = precision_recall(outcomes[cls])
        confidences = tp_confidences[cls]
        per_class[cls] = ClassMetrics(
            precision=precision,
            recall=recall,
            ap=aps[cls],
            f1=f1(precision, recall),
            instances=outcomes[cls].tp + outcomes[cls].fn,
            accuracy=accuracies.get(cls),
            mean_tp_confidence=(
                sum(confidences) / len(confidences) if confidences else None
            ),
        )

    return EvalReport(
        per_class=per_class,
        map_value=mean_ap(aps),
        confusion=confusion,
        latency={
            model: latency_stats(samples)
            for model, samples in (latency_samples or {}).items()
        },
        unknown_classes=unknown,
    )


def run_evaluate(
    cfg: AppConfig,
    dataset_path,
    predictions_source: str | None = None,
    detector_sleep=time.sleep,
) -> tuple[EvalReport, tuple]:
    """Evaluate and emit reports. ``predictions_source`` overrides the
    configured detectors with one recorded replay file."""
    dataset = load_dataset(dataset_path)
    specs = cfg.detectors
    if predictions_source is not None:
        specs = (
            DetectorSpec(id="recorded", kind=FIXTURE, launch=str(predictions_source)),
        )
    per_frame, latency = collect_predictions(cfg, dataset, specs, detector_sleep)
    report = evaluate_dataset(cfg, dataset, per_frame, latency)
    paths = write_eval_report(report, cfg.evaluation.report_dir)
    return report, paths
