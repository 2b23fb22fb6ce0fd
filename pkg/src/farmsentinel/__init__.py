"""farmsentinel: dual-detector animal intrusion monitoring and evaluation."""

from .geometry import BBox, Detection, area, iou
from .fusion import FusedResult, FusionConfig, filter_detections, fuse
from .metrics import (
    ConfusionMatrix,
    EvalReport,
    GroundTruthBox,
    LatencyStats,
    MatchOutcome,
    average_precision,
    confusion_from_trials,
    f1,
    latency_stats,
    match_frame,
    mean_ap,
    precision_recall,
)

__all__ = [
    "BBox",
    "Detection",
    "area",
    "iou",
    "FusionConfig",
    "FusedResult",
    "filter_detections",
    "fuse",
    "GroundTruthBox",
    "MatchOutcome",
    "ConfusionMatrix",
    "LatencyStats",
    "EvalReport",
    "match_frame",
    "precision_recall",
    "average_precision",
    "mean_ap",
    "f1",
    "confusion_from_trials",
    "latency_stats",
]

__version__ = "0.1.0"
