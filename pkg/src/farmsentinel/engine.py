"""Decision engine: turns fused detections into alerts and drives the
deterrent state machine from operator commands.

``step`` and ``handle_command`` are pure transition functions over an
injected clock and annotator, so a recorded (frames, commands) trace replays
to an identical action log. The deterrent is strictly operator-triggered
unless ``auto_deter`` is enabled; it never stops on its own, only on a
``stop`` command or shutdown.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path

from PIL import Image, ImageDraw

from .errors import ConfigError, SentinelError
from .fusion import FusedResult
from .geometry import Detection
from .ingestion import FrameRecord

IDLE = "IDLE"
ALERTED = "ALERTED"
DETERRING = "DETERRING"

DETER = "deter"
STOP = "stop"
COMMAND_VERBS = (DETER, STOP)


@dataclass(frozen=True)
class EngineConfig:
    alert_cooldown: float = 60.0
    absence_frames_to_clear: int = 5
    annotate: bool = True
    auto_deter: bool = False
    snapshot_dir: str = "snapshots"

    def __post_init__(self):
        if self.alert_cooldown < 0:
            raise ConfigError(f"engine.alert_cooldown: {self.alert_cooldown} < 0")
        if self.absence_frames_to_clear < 1:
            raise ConfigError(
                f"engine.absence_frames_to_clear: {self.absence_frames_to_clear} < 1"
            )


@dataclass(frozen=True)
class SentinelState:
    mode: str = IDLE
    last_alert_time: dict = field(default_factory=dict)
    active_classes: frozenset[str] = frozenset()
    absence_counter: int = 0


@dataclass(frozen=True)
class Command:
    verb: str
    issuer: str = ""
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "verb", self.verb.strip().lower())
        if self.verb not in COMMAND_VERBS:
            raise ValueError(f"unrecognized command verb: {self.verb!r}")


@dataclass(frozen=True)
class SendAlert:
    snapshot_path: str
    classes: tuple[str, ...]
    confidences: dict
    annotation_failed: bool = False


@dataclass(frozen=True)
class StartDeterrent:
    pass


@dataclass(frozen=True)
class StopDeterrent:
    pass


def annotate_snapshot(
    frame: FrameRecord, detections: list[Detection], out_dir: Path | str
) -> Path:
    """Write a copy of the frame with one labeled rectangle per detection.

    With no detections the copy is byte-identical; otherwise the output is a
    losslessly encoded image whose pixels differ from the source only where
    boxes and their labels are drawn (labels sit inside the box).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not detections:
        out_path = out_dir / f"{frame.frame_id}_alert{frame.image_path.suffix}"
        shutil.copyfile(frame.image_path, out_path)
        return out_path

    out_path = out_dir / f"{frame.frame_id}_alert.png"
    try:
        image = Image.open(frame.image_path).convert("RGB")
    except OSError as exc:
        raise SentinelError(f"cannot read frame image: {exc}") from exc
    draw = ImageDraw.Draw(image)
    width, height = image.size
    for det in detections:
        x0 = round(det.bbox.x_min * (width - 1))
        y0 = round(det.bbox.y_min * (height - 1))
        x1 = round(det.bbox.x_max * (width - 1))
        y1 = round(det.bbox.y_max * (height - 1))
        draw.rectangle([x0, y0, x1, y1], outline=(255, 32, 32), width=2)
        text = f"{det.label} {det.confidence * 100:.0f}%"
        tx0, ty0, tx1, ty1 = draw.textbbox((x0 + 3, y0 + 3), text)
        if tx1 <= x1 - 2 and ty1 <= y1 - 2:  # label only if it fits inside the box
            draw.text((x0 + 3, y0 + 3), text, fill=(255, 32, 32))
    image.save(out_path, format="PNG")
    return out_path


def step(
    state: SentinelState,
    fused: FusedResult,
    frame: FrameRecord,
    now: float,
    cfg: EngineConfig,
    annotator=annotate_snapshot,
) -> tuple[SentinelState, list]:
    """Apply one frame's fused detections to the state machine.

    Per detected class whose last alert is older than the cooldown, one
    SendAlert is emitted with an annotated snapshot; annotation failure
    degrades to the raw frame and is recorded on the action. Consecutive
    detection-free frames eventually clear presence and return to IDLE,
    except while DETERRING: the deterrent only stops on command.
    """
    if fused.frame_id and frame.frame_id and fused.frame_id != frame.frame_id:
        raise ValueError(
            f"fused result {fused.frame_id!r} does not belong to frame {frame.frame_id!r}"
        )

    detected = fused.detected_classes
    actions: list = []

    if not detected:
        absence = state.absence_counter + 1
        if absence >= cfg.absence_frames_to_clear:
            mode = DETERRING if state.mode == DETERRING else IDLE
            return (
                replace(
                    state,
                    mode=mode,
                    active_classes=frozenset(),
                    absence_counter=absence,
                ),
                actions,
            )
        return replace(state, absence_counter=absence), actions

    due = sorted(
        cls
        for cls in detected
        if cls not in state.last_alert_time
        or now - state.last_alert_time[cls] >= cfg.alert_cooldown
    )
    last_alert = dict(state.last_alert_time)
    if due:
        if cfg.annotate:
            try:
                snapshot = str(annotator(frame, list(fused.detections), cfg.snapshot_dir))
                failed = False
            except SentinelError:
                snapshot = str(frame.image_path)
                failed = True
        else:
            snapshot = str(frame.image_path)
            failed = False
        for cls in due:
            confidence = max(
                d.confidence for d in fused.detections if d.label == cls
            )
            actions.append(
                SendAlert(
                    snapshot_path=snapshot,
                    classes=(cls,),
                    confidences={cls: confidence},
                    annotation_failed=failed,
                )
            )
            last_alert[cls] = now

    mode = state.mode
    if cfg.auto_deter and mode != DETERRING:
        actions.append(StartDeterrent())
        mode = DETERRING
    elif mode != DETERRING:
        mode = ALERTED

    return (
        SentinelState(
            mode=mode,
            last_alert_time=last_alert,
            active_classes=state.active_classes | detected,
            absence_counter=0,
        ),
        actions,
    )


def handle_command(state: SentinelState, cmd: Command) -> tuple[SentinelState, list]:
    """Apply an operator command; redundant commands acknowledge silently."""
    if cmd.verb == DETER:
        if state.mode == DETERRING:
            return state, []
        return replace(state, mode=DETERRING), [StartDeterrent()]
    # stop
    if state.mode != DETERRING:
        return state, []
    mode = ALERTED if state.active_classes else IDLE
    return replace(state, mode=mode), [StopDeterrent()]


def serialize_action(action, base_dir: Path | None = None) -> dict:
    """Action as a plain dict; snapshot paths relative to ``base_dir`` so
    logs compare byte-identically across working directories."""
    if isinstance(action, SendAlert):
        snapshot = action.snapshot_path
        if base_dir is not None:
            try:
                snapshot = str(Path(snapshot).relative_to(base_dir))
            except ValueError:
                pass
        return {
            "type": "send_alert",
            "classes": list(action.classes),
            "confidences": {k: round(v, 6) for k, v in action.confidences.items()},
            "snapshot": snapshot,
            "annotation_failed": action.annotation_failed,
        }
    if isinstance(action, StartDeterrent):
        return {"type": "start_deterrent"}
    if isinstance(action, StopDeterrent):
        return {"type": "stop_deterrent"}
    raise TypeError(f"unknown action: {action!r}")


class ActionLog:
    """Append-only structured log of engine transitions, one JSON per line."""

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "w", encoding="utf-8")
        self._seq = 0

    def append(self, kind: str, input_ref: str, time_s: float, mode: str, actions: list):
        record = {
            "seq": self._seq,
            "kind": kind,
            "input": input_ref,
            "time": round(time_s, 3),
            "mode": mode,
            "actions": [serialize_action(a, self.path.parent) for a in actions],
        }
        self._seq += 1
        self._file.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
        self._file.flush()

    def close(self):
        self._file.close()
