"""Application configuration: one JSON document with a section per subsystem.

Paths inside the file resolve relative to the file's own directory so a
config can ship next to its fixtures. The bot token is taken from the
``FARMSENTINEL_BOT_TOKEN`` environment variable only; configs stay safe to
commit. Validation failures name the exact field path.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .audio import DeterrentConfig
from .detectors import FIXTURE, DetectorSpec
from .engine import EngineConfig
from .errors import ConfigError
from .fusion import FusionConfig
from .ingestion import SourceConfig
from .telegram import GatewayConfig

TOKEN_ENV_VAR = "FARMSENTINEL_BOT_TOKEN"

SEQUENTIAL = "sequential"
PARALLEL = "parallel"

_REQUIRED = object()


@dataclass(frozen=True)
class ExecutionConfig:
    inference: str = SEQUENTIAL
    transport: str = "mock"  # or "live"
    audio: str = "null"  # or "real"
    clock: str = "real"  # or "simulated"
    clock_start: float = 0.0
    clock_step: float = 1.0
    action_log: str = "out/actions.jsonl"

    def __post_init__(self):
        if self.inference not in (SEQUENTIAL, PARALLEL):
            raise ConfigError(f"execution.inference: {self.inference!r}")
        if self.transport not in ("mock", "live"):
            raise ConfigError(f"execution.transport: {self.transport!r}")
        if self.audio not in ("null", "real"):
            raise ConfigError(f"execution.audio: {self.audio!r}")
        if self.clock not in ("real", "simulated"):
            raise ConfigError(f"execution.clock: {self.clock!r}")


@dataclass(frozen=True)
class EvalOptions:
    iou_thresh: float = 0.5
    operating_threshold: float | None = None  # None: use fusion.conf_threshold
    report_dir: str = "out/reports"

    def __post_init__(self):
        if not 0.0 <= self.iou_thresh <= 1.0:
            raise ConfigError(f"evaluation.iou_thresh: {self.iou_thresh} not in [0, 1]")
        if self.operating_threshold is not None and not 0.0 <= self.operating_threshold <= 1.0:
            raise ConfigError(
                f"evaluation.operating_threshold: {self.operating_threshold} not in [0, 1]"
            )


@dataclass(frozen=True)
class MockScriptEntry:
    text: str
    after_alerts: int = 0
    after_polls: int = 0


@dataclass(frozen=True)
class AppConfig:
    source: SourceConfig
    detectors: tuple[DetectorSpec, ...]
    fusion: FusionConfig
    engine: EngineConfig
    gateway: GatewayConfig
    deterrent: DeterrentConfig
    evaluation: EvalOptions
    execution: ExecutionConfig
    mock_script: tuple[MockScriptEntry, ...] = ()


def _field(section: dict, path: str, key: str, kind, default=_REQUIRED):
    if key not in section:
        if default is _REQUIRED:
            raise ConfigError(f"{path}.{key}: required field missing")
        return default
    value = section[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(
            f"{path}.{key}: expected {getattr(kind, '__name__', kind)}, "
            f"got {type(value).__name__}"
        )
    return value


def _reject_unknown(section: dict, path: str, known: set[str]):
    for key in section:
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown field")


def _resolve(base: Path, value: str) -> str:
    path = Path(value)
    return str(path if path.is_absolute() else (base / path))


def _wrap(path: str, fn):
    """Re-raise a section constructor's ConfigError under our field path."""
    try:
        return fn()
    except ConfigError as exc:
        message = str(exc)
        raise ConfigError(message if message.startswith(path) else f"{path}: {message}")


def load_config(path: Path | str, env=os.environ) -> AppConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(doc, base_dir=path.parent.absolute(), env=env)


def parse_config(doc: dict, base_dir: Path, env=os.environ) -> AppConfig:
    known_sections = {
        "source", "detectors", "fusion", "engine", "gateway",
        "deterrent", "evaluation", "execution",
    }
    _reject_unknown(doc, "config", known_sections)

    src = _field(doc, "config", "source", dict)
    _reject_unknown(src, "source", {"uri", "kind", "sample_every_n", "spool_dir", "spool_cap"})
    source = _wrap("source", lambda: SourceConfig(
        uri=_resolve(base_dir, _field(src, "source", "uri", str)),
        kind=_field(src, "source", "kind", str, ""),
        sample_every_n=_field(src, "source", "sample_every_n", int, 1),
        spool_dir=_resolve(base_dir, _field(src, "source", "spool_dir", str, "spool")),
        spool_cap=_field(src, "source", "spool_cap", int, 64),
    ))

    raw_detectors = _field(doc, "config", "detectors", list)
    if not 1 <= len(raw_detectors) <= 2:
        raise ConfigError(f"detectors: expected 1 or 2 entries, got {len(raw_detectors)}")
    detectors = []
    for i, entry in enumerate(raw_detectors):
        dpath = f"detectors[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{dpath}: expected object")
        _reject_unknown(entry, dpath, {"id", "kind", "launch", "startup_timeout",
                                       "infer_timeout", "delay_ms"})
        kind = _field(entry, dpath, "kind", str)
        launch = _field(entry, dpath, "launch", str)
        if kind == FIXTURE:
            launch = _resolve(base_dir, launch)
        detectors.append(_wrap(dpath, lambda e=entry, d=dpath, k=kind, l=launch: DetectorSpec(
            id=_field(e, d, "id", str),
            kind=k,
            launch=l,
            startup_timeout=_field(e, d, "startup_timeout", float, 10.0),
            infer_timeout=_field(e, d, "infer_timeout", float, 30.0),
            delay_ms=_field(e, d, "delay_ms", float, 0.0),
        )))
    ids = [d.id for d in detectors]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"detectors: duplicate detector id in {ids}")

    fus = _field(doc, "config", "fusion", dict)
    _reject_unknown(fus, "fusion", {"allowed_classes", "conf_threshold", "dedup_iou",
                                    "dedup_enabled"})
    classes = _field(fus, "fusion", "allowed_classes", list)
    fusion = _wrap("fusion", lambda: FusionConfig(
        allowed_classes=frozenset(classes),
        conf_threshold=_field(fus, "fusion", "conf_threshold", float, 0.5),
        dedup_iou=_field(fus, "fusion", "dedup_iou", float, 0.5),
        dedup_enabled=_field(fus, "fusion", "dedup_enabled", bool, True),
        source_order=tuple(ids),
    ))

    eng = _field(doc, "config", "engine", dict, {})
    _reject_unknown(eng, "engine", {"alert_cooldown", "absence_frames_to_clear",
                                    "annotate", "auto_deter", "snapshot_dir"})
    engine = _wrap("engine", lambda: EngineConfig(
        alert_cooldown=_field(eng, "engine", "alert_cooldown", float, 60.0),
        absence_frames_to_clear=_field(eng, "engine", "absence_frames_to_clear", int, 5),
        annotate=_field(eng, "engine", "annotate", bool, True),
        auto_deter=_field(eng, "engine", "auto_deter", bool, False),
        snapshot_dir=_resolve(base_dir, _field(eng, "engine", "snapshot_dir", str,
                                               "out/snapshots")),
    ))

    gw = _field(doc, "config", "gateway", dict)
    _reject_unknown(gw, "gateway", {"chat_id", "poll_timeout", "retry_backoff",
                                    "mock_script"})
    backoff = _field(gw, "gateway", "retry_backoff", list, [1.0, 2.0, 4.0])
    gateway = _wrap("gateway", lambda: GatewayConfig(
        chat_id=_field(gw, "gateway", "chat_id", int),
        bot_token=env.get(TOKEN_ENV_VAR, ""),
        poll_timeout=_field(gw, "gateway", "poll_timeout", float, 30.0),
        retry_backoff=tuple(float(v) for v in backoff),
    ))
    script = []
    for i, entry in enumerate(_field(gw, "gateway", "mock_script", list, [])):
        spath = f"gateway.mock_script[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{spath}: expected object")
        _reject_unknown(entry, spath, {"text", "after_alerts", "after_polls"})
        script.append(MockScriptEntry(
            text=_field(entry, spath, "text", str),
            after_alerts=_field(entry, spath, "after_alerts", int, 0),
            after_polls=_field(entry, spath, "after_polls", int, 0),
        ))

    det_cfg = _field(doc, "config", "deterrent", dict)
    _reject_unknown(det_cfg, "deterrent", {"sound_path", "gap_between_loops",
                                           "output_device"})
    exe = _field(doc, "config", "execution", dict, {})
    _reject_unknown(exe, "execution", {"inference", "transport", "audio", "clock",
                                       "clock_start", "clock_step", "action_log"})
    execution = _wrap("execution", lambda: ExecutionConfig(
        inference=_field(exe, "execution", "inference", str, SEQUENTIAL),
        transport=_field(exe, "execution", "transport", str, "mock"),
        audio=_field(exe, "execution", "audio", str, "null"),
        clock=_field(exe, "execution", "clock", str, "real"),
        clock_start=_field(exe, "execution", "clock_start", float, 0.0),
        clock_step=_field(exe, "execution", "clock_step", float, 1.0),
        action_log=_resolve(base_dir, _field(exe, "execution", "action_log", str,
                                             "out/actions.jsonl")),
    ))

    deterrent = _wrap("deterrent", lambda: DeterrentConfig(
        sound_path=_resolve(base_dir, _field(det_cfg, "deterrent", "sound_path", str)),
        gap_between_loops=_field(det_cfg, "deterrent", "gap_between_loops", float, 0.0),
        output_device=_field(det_cfg, "deterrent", "output_device", (str, type(None)), None),
        sink=execution.audio,
    ))

    ev = _field(doc, "config", "evaluation", dict, {})
    _reject_unknown(ev, "evaluation", {"iou_thresh", "operating_threshold", "report_dir"})
    evaluation = _wrap("evaluation", lambda: EvalOptions(
        iou_thresh=_field(ev, "evaluation", "iou_thresh", float, 0.5),
        operating_threshold=_field(ev, "evaluation", "operating_threshold",
                                   (float, int, type(None)), None),
        report_dir=_resolve(base_dir, _field(ev, "evaluation", "report_dir", str,
                                             "out/reports")),
    ))

    return AppConfig(
        source=source,
        detectors=tuple(detectors),
        fusion=fusion,
        engine=engine,
        gateway=gateway,
        deterrent=deterrent,
        evaluation=evaluation,
        execution=execution,
        mock_script=tuple(script),
    )


def serialize_config(cfg: AppConfig) -> dict:
    """Config back to its JSON document form (token excluded: env-sourced)."""
    return {
        "source": {
            "uri": cfg.source.uri,
            "kind": cfg.source.kind,
            "sample_every_n": cfg.source.sample_every_n,
            "spool_dir": cfg.source.spool_dir,
            "spool_cap": cfg.source.spool_cap,
        },
        "detectors": [
            {
                "id": d.id,
                "kind": d.kind,
                "launch": d.launch,
                "startup_timeout": d.startup_timeout,
                "infer_timeout": d.infer_timeout,
                "delay_ms": d.delay_ms,
            }
            for d in cfg.detectors
        ],
        "fusion": {
            "allowed_classes": sorted(cfg.fusion.allowed_classes),
            "conf_threshold": cfg.fusion.conf_threshold,
            "dedup_iou": cfg.fusion.dedup_iou,
            "dedup_enabled": cfg.fusion.dedup_enabled,
        },
        "engine": {
            "alert_cooldown": cfg.engine.alert_cooldown,
            "absence_frames_to_clear": cfg.engine.absence_frames_to_clear,
            "annotate": cfg.engine.annotate,
            "auto_deter": cfg.engine.auto_deter,
            "snapshot_dir": cfg.engine.snapshot_dir,
        },
        "gateway": {
            "chat_id": cfg.gateway.chat_id,
            "poll_timeout": cfg.gateway.poll_timeout,
            "retry_backoff": list(cfg.gateway.retry_backoff),
            "mock_script": [
                {
                    "text": s.text,
                    "after_alerts": s.after_alerts,
                    "after_polls": s.after_polls,
                }
                for s in cfg.mock_script
            ],
        },
        "deterrent": {
            "sound_path": cfg.deterrent.sound_path,
            "gap_between_loops": cfg.deterrent.gap_between_loops,
            "output_device": cfg.deterrent.output_device,
        },
        "evaluation": {
            "iou_thresh": cfg.evaluation.iou_thresh,
            "operating_threshold": cfg.evaluation.operating_threshold,
            "report_dir": cfg.evaluation.report_dir,
        },
        "execution": {
            "inference": cfg.execution.inference,
            "transport": cfg.execution.transport,
            "audio": cfg.execution.audio,
            "clock": cfg.execution.clock,
            "clock_start": cfg.execution.clock_start,
            "clock_step": cfg.execution.clock_step,
            "action_log": cfg.execution.action_log,
        },
    }
