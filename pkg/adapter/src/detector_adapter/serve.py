"""Request/response loop: stdin lines in, protocol lines out, until QUIT.

Single-threaded by design; the host runs one adapter process per model.
Per-frame problems answer with ERR and the loop continues; only a failed
model load aborts (exit nonzero, before READY is ever printed).
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

from .backends import FrameError, load_backend, timed_predict
from .protocol import format_det, format_end, format_err, format_ready, parse_request


@dataclass(frozen=True)
class AdapterConfig:
    model_kind: str
    model_path: Path
    class_names: tuple[str, ...]
    device_hint: str | None = None


def serve(cfg: AdapterConfig, stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    backend = load_backend(
        cfg.model_kind, cfg.model_path, list(cfg.class_names), cfg.device_hint
    )

    def emit(line: str):
        stdout.write(line + "\n")
        stdout.flush()

    emit(format_ready(cfg.model_kind))

    for raw in stdin:
        line = raw.strip()
        if not line:
            continue
        if line == "QUIT":
            return 0
        request = parse_request(line)
        if request is None:
            emit(format_err("-", f"malformed request: {line[:80]}"))
            continue
        frame_id, image_path = request
        try:
            detections, elapsed_ms = timed_predict(backend, Path(image_path), frame_id)
        except FrameError as exc:
            emit(format_err(frame_id, str(exc)))
            continue
        for det in detections:
            emit(format_det(frame_id, det))
        emit(format_end(frame_id, elapsed_ms))
    return 0  # stdin closed: host went away, shut down quietly
