"""Bounding-box arithmetic and the detection vocabulary shared by every module.

Coordinates are normalized to [0, 1] so fixtures and wire messages stay
resolution-independent; adapters convert from pixel space before handing
boxes to the host.
"""

from __future__ import annotations

from dataclasses import dataclass


def canonical_label(name: str) -> str:
    """Normalize a class label: labels compare case-insensitively."""
    label = name.strip().lower()
    if not label or any(ch.isspace() for ch in label):
        raise ValueError(f"invalid class label: {name!r}")
    return label


def _clamp01(v: float) -> float:
    return 0.0 if v < 0.0 else (1.0 if v > 1.0 else float(v))


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in normalized image coordinates.

    Construction clamps coordinates into [0, 1]; detectors occasionally emit
    boxes straddling the frame edge. Boxes that collapse to zero area after
    clamping are rejected.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        object.__setattr__(self, "x_min", _clamp01(self.x_min))
        object.__setattr__(self, "y_min", _clamp01(self.y_min))
        object.__setattr__(self, "x_max", _clamp01(self.x_max))
        object.__setattr__(self, "y_max", _clamp01(self.y_max))
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                f"degenerate box after clamping: "
                f"({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )


@dataclass(frozen=True)
class Detection:
    """One classified box with confidence, produced by a named detector."""

    bbox: BBox
    label: str
    confidence: float
    source: str = ""
    frame_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "label", canonical_label(self.label))
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of range: {self.confidence}")


def area(b: BBox) -> float:
    """Box area as a fraction of the frame."""
    return (b.x_max - b.x_min) * (b.y_max - b.y_min)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0.0 for disjoint boxes.

    Union area cannot be zero because zero-area boxes are rejected at
    construction, so no epsilon guard is needed.
    """
    ix_min = max(a.x_min, b.x_min)
    iy_min = max(a.y_min, b.y_min)
    ix_max = min(a.x_max, b.x_max)
    iy_max = min(a.y_max, b.y_max)
    iw = ix_max - ix_min
    ih = iy_max - iy_min
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = area(a) + area(b) - inter
    return inter / union
