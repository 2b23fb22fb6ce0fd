"""Wire formatting for the detection protocol.

Every response to an INFER is zero or more DET lines closed by exactly one
END; per-frame failures answer with ERR instead. Confidence and coordinates
are printed with 6 fractional digits, normalized to [0, 1]; the host parses
strictly, so formatting here is bit-exact by construction.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class RawDetection:
    label: str
    confidence: float
    x_min: float
    y_min: float
    x_max: float
    y_max: float


def clamp01(v: float) -> float:
    return 0.0 if v < 0.0 else (1.0 if v > 1.0 else float(v))


def format_ready(name: str) -> str:
    return f"READY {name}"


def format_det(frame_id: str, det: RawDetection) -> str:
    return (
        f"DET {frame_id} {det.label} {clamp01(det.confidence):.6f} "
        f"{clamp01(det.x_min):.6f} {clamp01(det.y_min):.6f} "
        f"{clamp01(det.x_max):.6f} {clamp01(det.y_max):.6f}"
    )


def format_end(frame_id: str, elapsed_ms: float) -> str:
    return f"END {frame_id} {int(round(elapsed_ms))}"


def format_err(frame_id: str, message: str) -> str:
    return f"ERR {frame_id} {' '.join(message.split())}"


def parse_request(line: str) -> tuple[str, str] | None:
    """Split an INFER request into (frame_id, image_path); None if malformed."""
    parts = line.split(maxsplit=2)
    if len(parts) != 3 or parts[0] != "INFER":
        return None
    frame_id, image_path = parts[1], parts[2]
    if not frame_id:
        return None
    return frame_id, image_path
