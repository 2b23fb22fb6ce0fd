"""Detection evaluation: IoU matching, precision/recall, AP, mAP, F1,
confusion matrices and latency statistics.

Matching is greedy in descending confidence with one-to-one assignment, the
convention behind published mAP figures. AP uses all-point interpolation:
the area under the precision envelope, where precision at recall r is the
maximum precision at any recall >= r.

0/0 conventions, stated once: precision with no predictions is 1.0 (vacuous
correctness); recall with no ground truths is undefined and raises; f1(0, 0)
is 0.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

from .errors import ConfigError, UndefinedMetric
from .geometry import BBox, Detection, canonical_label, iou

NO_DETECTION = "none"


@dataclass(frozen=True)
class GroundTruthBox:
    """One annotated box a prediction is scored against."""

    bbox: BBox
    label: str
    frame_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "label", canonical_label(self.label))


@dataclass(frozen=True)
class MatchOutcome:
    """TP/FP/FN counts for one class at a fixed confidence cut."""

    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "MatchOutcome") -> "MatchOutcome":
        return MatchOutcome(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class PRPoint:
    precision: float
    recall: float
    threshold: float


@dataclass(frozen=True)
class LatencyStats:
    count: int
    mean: float
    min: float
    max: float
    stddev: float


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts of (actual class, predicted outcome) trials.

    Predicted outcomes range over the class set plus ``NO_DETECTION`` for
    trials where nothing was recognized.
    """

    classes: tuple[str, ...]
    counts: dict[tuple[str, str], int]

    def count(self, actual: str, predicted: str) -> int:
        return self.counts.get((actual, predicted), 0)

    def row_total(self, actual: str) -> int:
        return sum(n for (a, _), n in self.counts.items() if a == actual)

    def per_class_accuracy(self) -> dict[str, float]:
        """Correct recognitions / trials per actual class; empty rows omitted."""
        acc = {}
        for cls in self.classes:
            total = self.row_total(cls)
            if total > 0:
                acc[cls] = self.count(cls, cls) / total
        return acc


@dataclass
class ClassMetrics:
    """All per-class figures the evaluation reports."""

    precision: float
    recall: float
    ap: float
    f1: float
    instances: int
    accuracy: float | None = None
    mean_tp_confidence: float | None = None


@dataclass
class EvalReport:
    per_class: dict[str, ClassMetrics]
    map_value: float
    confusion: ConfusionMatrix | None = None
    latency: dict[str, LatencyStats] = field(default_factory=dict)
    unknown_classes: tuple[str, ...] = ()


def assign_predictions(
    preds: list[Detection], truths: list[GroundTruthBox], iou_thresh: float
) -> list[int]:
    """Assign each prediction (descending confidence) its best free truth.

    Returns, per prediction in input order, the matched truth index or -1.
    Ties on confidence keep input order; ties on IoU take the lowest truth
    index.
    """
    order = sorted(range(len(preds)), key=lambda i: -preds[i].confidence)
    assigned = [-1] * len(preds)
    taken = [False] * len(truths)
    for i in order:
        pred = preds[i]
        best_j = -1
        best_iou = -1.0
        for j, truth in enumerate(truths):
            if taken[j] or truth.label != pred.label:
                continue
            overlap = iou(pred.bbox, truth.bbox)
            if overlap >= iou_thresh and overlap > best_iou:
                best_iou = overlap
                best_j = j
        if best_j >= 0:
            assigned[i] = best_j
            taken[best_j] = True
    return assigned


def match_frame(
    preds: list[Detection],
    truths: list[GroundTruthBox],
    iou_thresh: float,
) -> dict[str, MatchOutcome]:
    """Per-class TP/FP/FN contributions for one frame.

    Greedy one-to-one: each prediction, strongest first, matches the free
    same-label truth with the highest IoU >= ``iou_thresh``.
    """
    if not 0.0 <= iou_thresh <= 1.0:
        raise ConfigError(f"iou_thresh: {iou_thresh} not in [0, 1]")
    assigned = assign_predictions(preds, truths, iou_thresh)
    matched_truths = {j for j in assigned if j >= 0}

    out: dict[str, MatchOutcome] = {}
    for i, pred in enumerate(preds):
        prev = out.get(pred.label, MatchOutcome())
        if assigned[i] >= 0:
            out[pred.label] = prev + MatchOutcome(tp=1)
        else:
            out[pred.label] = prev + MatchOutcome(fp=1)
    for j, truth in enumerate(truths):
        if j not in matched_truths:
            prev = out.get(truth.label, MatchOutcome())
            out[truth.label] = prev + MatchOutcome(fn=1)
    return out


def precision_recall(m: MatchOutcome) -> tuple[float, float]:
    """Eq. P = TP/(TP+FP), R = TP/(TP+FN) with the stated 0/0 conventions."""
    precision = m.tp / (m.tp + m.fp) if (m.tp + m.fp) > 0 else 1.0
    if m.tp + m.fn == 0:
        raise UndefinedMetric("recall undefined: no ground-truth instances")
    recall = m.tp / (m.tp + m.fn)
    return precision, recall


def pr_curve(
    scored_preds: list[Detection],
    truths: list[GroundTruthBox],
    iou_thresh: float,
) -> list[PRPoint]:
    """Cumulative PR points, one per distinct confidence cut.

    Predictions are matched greedily per frame in global confidence order;
    tied confidences enter a cut together.
    """
    if not truths:
        raise UndefinedMetric("AP undefined: zero ground-truth instances")
    n_truths = len(truths)

    by_frame_truths: dict[str, list[GroundTruthBox]] = {}
    for t in truths:
        by_frame_truths.setdefault(t.frame_id, []).append(t)

    order = sorted(range(len(scored_preds)), key=lambda i: -scored_preds[i].confidence)
    taken: dict[str, list[bool]] = {
        fid: [False] * len(ts) for fid, ts in by_frame_truths.items()
    }

    points: list[PRPoint] = []
    tp = fp = 0
    for rank, i in enumerate(order):
        pred = scored_preds[i]
        frame_truths = by_frame_truths.get(pred.frame_id, [])
        flags = taken.get(pred.frame_id, [])
        best_j = -1
        best_iou = -1.0
        for j, truth in enumerate(frame_truths):
            if flags[j] or truth.label != pred.label:
                continue
            overlap = iou(pred.bbox, truth.bbox)
            if overlap >= iou_thresh and overlap > best_iou:
                best_iou = overlap
                best_j = j
        if best_j >= 0:
            flags[best_j] = True
            tp += 1
        else:
            fp += 1
        is_last_of_cut = (
            rank == len(order) - 1
            or scored_preds[order[rank + 1]].confidence < pred.confidence
        )
        if is_last_of_cut:
            points.append(PRPoint(tp / (tp + fp), tp / n_truths, pred.confidence))
    return points


def _envelope_area(points: list[PRPoint]) -> float:
    """Area under the non-increasing precision envelope of the PR points."""
    by_recall = sorted(points, key=lambda p: p.recall)
    area = 0.0
    prev_recall = 0.0
    # max precision at any recall >= r: walk recalls ascending, tracking the
    # running max of precisions from the right.
    suffix_max = [0.0] * len(by_recall)
    running = 0.0
    for k in range(len(by_recall) - 1, -1, -1):
        running = max(running, by_recall[k].precision)
        suffix_max[k] = running
    for k, point in enumerate(by_recall):
        if point.recall > prev_recall:
            area += (point.recall - prev_recall) * suffix_max[k]
            prev_recall = point.recall
    return area


def average_precision(
    scored_preds: list[Detection],
    truths: list[GroundTruthBox],
    iou_thresh: float,
) -> float:
    """All-point interpolated area under the precision-recall curve."""
    points = pr_curve(scored_preds, truths, iou_thresh)
    if not points:
        return 0.0
    return _envelope_area(points)


def mean_ap(per_class_ap: dict[str, float]) -> float:
    """Arithmetic mean of per-class AP values.

    Identical inputs return that value exactly; float summation would lose
    the last ulp.
    """
    if not per_class_ap:
        raise UndefinedMetric("mean AP undefined: empty class map")
    values = list(per_class_ap.values())
    if all(v == values[0] for v in values):
        return values[0]
    return statistics.fmean(values)


def f1(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def confusion_from_trials(
    trials: list[tuple[str, str]], classes: list[str]
) -> ConfusionMatrix:
    """Tabulate (actual class, predicted outcome) recognition trials.

    ``predicted`` must be one of ``classes`` or ``NO_DETECTION``; anything
    else is an input error.
    """
    class_set = tuple(canonical_label(c) for c in classes)
    counts: dict[tuple[str, str], int] = {}
    for actual, predicted in trials:
        actual = canonical_label(actual)
        predicted = canonical_label(predicted)
        if actual not in class_set:
            raise ValueError(f"unknown actual class in trial: {actual!r}")
        if predicted != NO_DETECTION and predicted not in class_set:
            raise ValueError(f"unknown predicted outcome in trial: {predicted!r}")
        key = (actual, predicted)
        counts[key] = counts.get(key, 0) + 1
    return ConfusionMatrix(classes=class_set, counts=counts)


def latency_stats(samples: list[float]) -> LatencyStats:
    """Mean/min/max/stddev (population) over at least one sample."""
    if not samples:
        raise ValueError("latency_stats requires at least one sample")
    return LatencyStats(
        count=len(samples),
        mean=statistics.fmean(samples),
        min=min(samples),
        max=max(samples),
        stddev=statistics.pstdev(samples),
    )
