"""Looping deterrent-sound playback between start and stop commands.

Playback runs on its own thread and never blocks the detection pipeline.
The null sink records start/stop/cycle events instead of touching hardware,
which keeps every test and CI run audio-free; the real sink shells out to
whichever system player is available.
"""

from __future__ import annotations

import shutil
import subprocess
import threading
import time
import wave
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, SentinelError

NULL_SINK = "null"
REAL_SINK = "real"

PLAYERS = ("aplay", "paplay", "ffplay")


@dataclass(frozen=True)
class DeterrentConfig:
    sound_path: str
    gap_between_loops: float = 0.0
    output_device: str | None = None
    sink: str = NULL_SINK

    def __post_init__(self):
        if self.gap_between_loops < 0:
            raise ConfigError(
                f"deterrent.gap_between_loops: {self.gap_between_loops} < 0"
            )
        if self.sink not in (NULL_SINK, REAL_SINK):
            raise ConfigError(f"deterrent.sink: unknown sink {self.sink!r}")


def validate_sound_file(path: str | Path) -> float:
    """Check the deterrent sound exists and decodes; returns its duration.

    WAV files are fully decoded through the header; other formats are
    accepted when non-empty and left to the player to decode. A corrupt file
    must fail here, at startup, not at 3 a.m. in the field.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"deterrent.sound_path: file not found: {path}")
    if path.suffix.lower() == ".wav":
        try:
            with wave.open(str(path), "rb") as wav:
                frames = wav.getnframes()
                rate = wav.getframerate()
        except (wave.Error, EOFError) as exc:
            raise ConfigError(f"deterrent.sound_path: not a valid WAV: {exc}") from exc
        if rate <= 0 or frames <= 0:
            raise ConfigError("deterrent.sound_path: empty audio stream")
        return frames / rate
    if path.stat().st_size == 0:
        raise ConfigError(f"deterrent.sound_path: empty file: {path}")
    return 1.0


class NullAudioSink:
    """Hardware-free sink: simulates clip playback and logs every event."""

    def __init__(self, clock=time.monotonic):
        self.clock = clock
        self.events: list[tuple[str, float]] = []
        self._lock = threading.Lock()

    def record(self, kind: str):
        with self._lock:
            self.events.append((kind, self.clock()))

    def play_cycle(self, duration: float, stop_event: threading.Event):
        self.record("cycle")
        stop_event.wait(duration)


class RealAudioSink:
    """Plays the clip through the first available system audio player."""

    def __init__(self, output_device: str | None = None):
        self.output_device = output_device
        self.player = next((p for p in PLAYERS if shutil.which(p)), None)
        self.events: list[tuple[str, float]] = []

    def record(self, kind: str):
        self.events.append((kind, time.monotonic()))

    def _command(self, sound_path: str) -> list[str]:
        if self.player == "ffplay":
            return ["ffplay", "-nodisp", "-autoexit", "-loglevel", "quiet", sound_path]
        cmd = [self.player]
        if self.player == "aplay" and self.output_device:
            cmd += ["-D", self.output_device]
        return cmd + [sound_path]

    def ensure_available(self):
        if self.player is None:
            raise SentinelError(
                "no audio player available (looked for: " + ", ".join(PLAYERS) + ")"
            )

    def play_cycle(self, sound_path: str, stop_event: threading.Event):
        self.record("cycle")
        proc = subprocess.Popen(
            self._command(sound_path),
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
        while proc.poll() is None:
            if stop_event.wait(0.05):
                proc.terminate()
                proc.wait()
                return


class AudioDeterrent:
    """Owns the playback thread; start/stop are idempotent control calls."""

    def __init__(self, cfg: DeterrentConfig, sink=None, clock=time.monotonic):
        self.cfg = cfg
        self.duration = validate_sound_file(cfg.sound_path)
        if sink is not None:
            self.sink = sink
        elif cfg.sink == NULL_SINK:
            self.sink = NullAudioSink(clock=clock)
        else:
            self.sink = RealAudioSink(output_device=cfg.output_device)
        self._stop_event = threading.Event()
        self._thread: threading.Thread | None = None

    @property
    def active(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    def start(self):
        """Begin looping playback; a second start while active is a no-op."""
        if self.active:
            return
        if isinstance(self.sink, RealAudioSink):
            self.sink.ensure_available()
        self._stop_event = threading.Event()
        self.sink.record("start")
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def _loop(self):
        while not self._stop_event.is_set():
            if isinstance(self.sink, NullAudioSink):
                self.sink.play_cycle(self.duration, self._stop_event)
            else:
                self.sink.play_cycle(self.cfg.sound_path, self._stop_event)
            if self.cfg.gap_between_loops:
                self._stop_event.wait(self.cfg.gap_between_loops)

    def stop(self):
        """Cease playback; idempotent, returns once the loop has exited."""
        if self._thread is None:
            return
        self._stop_event.set()
        self._thread.join()
        self._thread = None
        self.sink.record("stop")


def start_loop(cfg: DeterrentConfig, sink=None) -> AudioDeterrent:
    """Validate the clip, start looping playback and hand back the control."""
    deterrent = AudioDeterrent(cfg, sink=sink)
    deterrent.start()
    return deterrent


def stop(handle: AudioDeterrent) -> None:
    handle.stop()
