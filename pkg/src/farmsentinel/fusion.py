"""Dual-detector fusion: per-detector filtering plus cross-model combination.

Each frame is inferred by two backends; survivors of the class/confidence
filter are unioned. Optionally, same-label boxes from different sources that
overlap beyond ``dedup_iou`` are collapsed to the higher-confidence member so
one animal does not raise two alerts. Dedup can be switched off to get the
literal draw-both-models behavior.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .geometry import Detection, canonical_label, iou


@dataclass(frozen=True)
class FusionConfig:
    """Filter and combination settings shared by both detectors.

    ``source_order`` breaks confidence ties during dedup: the detection from
    the detector listed first wins, keeping fused output deterministic.
    """

    allowed_classes: frozenset[str]
    conf_threshold: float = 0.5
    dedup_iou: float = 0.5
    dedup_enabled: bool = True
    source_order: tuple[str, ...] = ()

    def __post_init__(self):
        classes = frozenset(canonical_label(c) for c in self.allowed_classes)
        object.__setattr__(self, "allowed_classes", classes)
        if not classes:
            raise ConfigError("fusion.allowed_classes: must be nonempty")
        if not 0.0 <= self.conf_threshold <= 1.0:
            raise ConfigError(f"fusion.conf_threshold: {self.conf_threshold} not in [0, 1]")
        if not 0.0 <= self.dedup_iou <= 1.0:
            raise ConfigError(f"fusion.dedup_iou: {self.dedup_iou} not in [0, 1]")


@dataclass(frozen=True)
class FusedResult:
    """Post-filter, post-dedup union of both detectors for one frame."""

    frame_id: str
    detections: tuple[Detection, ...]
    detected_classes: frozenset[str]
    per_source_latency: dict[str, float] = field(default_factory=dict)


def filter_detections(raw: list[Detection], cfg: FusionConfig) -> list[Detection]:
    """Keep detections with confidence >= threshold and an allowed label.

    The threshold comparison is inclusive ("50% and above"); input order is
    preserved.
    """
    return [
        d
        for d in raw
        if d.confidence >= cfg.conf_threshold and d.label in cfg.allowed_classes
    ]


def _source_rank(cfg: FusionConfig, source: str) -> int:
    try:
        return cfg.source_order.index(source)
    except ValueError:
        return len(cfg.source_order)


def _dedup_cross_source(kept: list[Detection], cfg: FusionConfig) -> list[Detection]:
    """Collapse same-label cross-source overlaps to the stronger member.

    Winners are decided in (confidence desc, source rank, input order) order;
    output preserves the original input order of the survivors.
    """
    order = sorted(
        range(len(kept)),
        key=lambda i: (-kept[i].confidence, _source_rank(cfg, kept[i].source), i),
    )
    survivors: list[int] = []
    for i in order:
        cand = kept[i]
        duplicate = any(
            cand.source != kept[j].source
            and cand.label == kept[j].label
            and iou(cand.bbox, kept[j].bbox) >= cfg.dedup_iou
            for j in survivors
        )
        if not duplicate:
            survivors.append(i)
    return [kept[i] for i in sorted(survivors)]


def fuse(
    dets_a: list[Detection],
    dets_b: list[Detection],
    cfg: FusionConfig,
    frame_id: str | None = None,
) -> FusedResult:
    """Filter both detectors' outputs and combine them for one frame.

    Raises ``ValueError`` if the inputs carry mismatched frame ids; that is a
    caller bug, not a data condition.
    """
    seen_ids = {d.frame_id for d in dets_a} | {d.frame_id for d in dets_b}
    if frame_id is not None:
        seen_ids.add(frame_id)
    seen_ids.discard("")
    if len(seen_ids) > 1:
        raise ValueError(f"detections from different frames: {sorted(seen_ids)}")
    fid = frame_id if frame_id is not None else (seen_ids.pop() if seen_ids else "")

    kept = filter_detections(dets_a, cfg) + filter_detections(dets_b, cfg)
    if cfg.dedup_enabled:
        kept = _dedup_cross_source(kept, cfg)
    return FusedResult(
        frame_id=fid,
        detections=tuple(kept),
        detected_classes=frozenset(d.label for d in kept),
    )
