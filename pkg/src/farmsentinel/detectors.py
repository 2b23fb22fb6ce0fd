"""Detector hosting: external adapter processes and fixture replay backends.

External adapters speak a newline-delimited protocol over stdin/stdout:

    host -> adapter:  INFER <frame_id> <absolute_image_path>
                      QUIT
    adapter -> host:  READY <detector_name>          (once, after model load)
                      DET <frame_id> <class> <conf> <x0> <y0> <x1> <y1>
                      END <frame_id> <elapsed_ms>    (closes each response)
                      ERR <frame_id> <message>       (per-frame failure)

Confidence and coordinates are decimals with 6 fractional digits, normalized
to [0, 1]. The host parses strictly: any line outside this grammar faults the
detector.
"""

from __future__ import annotations

import queue
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DetectorFault, InferTimeout, ProtocolError, StartupError
from .geometry import BBox, Detection

EXTERNAL = "external_process"
FIXTURE = "fixture_replay"

QUIT_GRACE_S = 2.0
RESTART_BACKOFF_S = (1.0, 2.0, 4.0)


@dataclass(frozen=True)
class DetectorSpec:
    id: str
    kind: str
    launch: str  # command line (external) or fixture file path (replay)
    startup_timeout: float = 10.0
    infer_timeout: float = 30.0
    delay_ms: float = 0.0  # fixture only: synthetic per-frame latency

    def __post_init__(self):
        if self.kind not in (EXTERNAL, FIXTURE):
            raise ConfigError(f"detector {self.id!r}: unknown kind {self.kind!r}")
        if self.startup_timeout <= 0 or self.infer_timeout <= 0:
            raise ConfigError(f"detector {self.id!r}: timeouts must be positive")
        if self.delay_ms < 0:
            raise ConfigError(f"detector {self.id!r}: delay_ms must be >= 0")


@dataclass(frozen=True)
class InferenceResult:
    frame_id: str
    detections: tuple[Detection, ...]
    elapsed_ms: float  # measured host-side
    reported_ms: float  # the adapter's own END figure


def _parse_det_line(fields: list[str], frame_id: str, source: str) -> Detection:
    if len(fields) != 8:
        raise ProtocolError(f"DET line has {len(fields)} fields, expected 8")
    _, fid, label, conf_s, x0, y0, x1, y1 = fields
    if fid != frame_id:
        raise ProtocolError(f"DET for frame {fid!r} while inferring {frame_id!r}")
    try:
        conf = float(conf_s)
        coords = [float(v) for v in (x0, y0, x1, y1)]
    except ValueError as exc:
        raise ProtocolError(f"non-numeric DET field: {exc}") from exc
    if not 0.0 <= conf <= 1.0:
        raise ProtocolError(f"confidence out of range: {conf}")
    if any(c < 0.0 or c > 1.0 for c in coords):
        raise ProtocolError(f"coordinate out of range: {coords}")
    try:
        bbox = BBox(*coords)
    except ValueError as exc:
        raise ProtocolError(f"degenerate DET box: {exc}") from exc
    try:
        return Detection(bbox=bbox, label=label, confidence=conf,
                         source=source, frame_id=frame_id)
    except ValueError as exc:
        raise ProtocolError(str(exc)) from exc


class ExternalProcessDetector:
    """Owns one adapter subprocess and its strictly parsed response stream."""

    def __init__(self, spec: DetectorSpec):
        self.spec = spec
        self._lines: queue.Queue = queue.Queue()
        self._stderr_tail: list[str] = []
        self._stopped = False
        try:
            self._proc = subprocess.Popen(
                shlex.split(spec.launch),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise StartupError(f"detector {spec.id!r}: spawn failed: {exc}") from exc
        threading.Thread(target=self._drain_stdout, daemon=True).start()
        threading.Thread(target=self._drain_stderr, daemon=True).start()
        self._await_ready()

    def _drain_stdout(self):
        for line in self._proc.stdout:
            self._lines.put(line.rstrip("\n"))
        self._lines.put(None)  # EOF sentinel

    def _drain_stderr(self):
        for line in self._proc.stderr:
            self._stderr_tail.append(line.rstrip("\n"))
            del self._stderr_tail[:-20]

    def _diagnostics(self) -> str:
        return "; ".join(self._stderr_tail[-5:]) if self._stderr_tail else "<no stderr>"

    def _read_line(self, timeout: float) -> str:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise InferTimeout(
                f"detector {self.spec.id!r}: no response within {timeout}s"
            ) from None
        if line is None:
            raise DetectorFault(
                f"detector {self.spec.id!r}: process exited ({self._diagnostics()})"
            )
        return line

    def _await_ready(self):
        try:
            line = self._read_line(self.spec.startup_timeout)
        except (DetectorFault, InferTimeout) as exc:
            self._kill()
            raise StartupError(
                f"detector {self.spec.id!r}: no READY line: {exc}"
            ) from exc
        fields = line.split()
        if len(fields) != 2 or fields[0] != "READY":
            self._kill()
            raise StartupError(
                f"detector {self.spec.id!r}: expected READY, got {line!r}"
            )
        self.name = fields[1]

    def infer(self, frame_id: str, image_path: str | Path) -> InferenceResult:
        if not frame_id or any(ch.isspace() for ch in frame_id):
            raise ValueError(f"frame_id not protocol-safe: {frame_id!r}")
        deadline = time.monotonic() + self.spec.infer_timeout
        started = time.perf_counter()
        try:
            self._proc.stdin.write(f"INFER {frame_id} {Path(image_path).absolute()}\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise DetectorFault(
                f"detector {self.spec.id!r}: stdin closed ({self._diagnostics()})"
            ) from exc

        detections: list[Detection] = []
        while True:
            line = self._read_line(max(0.001, deadline - time.monotonic()))
            fields = line.split(maxsplit=2)
            keyword = fields[0] if fields else ""
            if keyword == "DET":
                detections.append(
                    _parse_det_line(line.split(), frame_id, self.spec.id)
                )
            elif keyword == "END":
                parts = line.split()
                if len(parts) != 3 or parts[1] != frame_id:
                    raise ProtocolError(f"bad END line: {line!r}")
                try:
                    reported = float(parts[2])
                except ValueError as exc:
                    raise ProtocolError(f"bad END elapsed: {line!r}") from exc
                elapsed = (time.perf_counter() - started) * 1000.0
                return InferenceResult(
                    frame_id=frame_id,
                    detections=tuple(detections),
                    elapsed_ms=elapsed,
                    reported_ms=reported,
                )
            elif keyword == "ERR":
                if len(fields) < 2 or fields[1] != frame_id:
                    raise ProtocolError(f"bad ERR line: {line!r}")
                message = fields[2] if len(fields) > 2 else ""
                raise DetectorFault(
                    f"detector {self.spec.id!r}: frame {frame_id}: {message}"
                )
            else:
                raise ProtocolError(f"unparseable adapter line: {line!r}")

    def stop(self):
        """Graceful QUIT, then kill after a grace period. Idempotent."""
        if self._stopped:
            return
        self._stopped = True
        if self._proc.poll() is None:
            try:
                self._proc.stdin.write("QUIT\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError):
                pass
            try:
                self._proc.wait(timeout=QUIT_GRACE_S)
            except subprocess.TimeoutExpired:
                self._kill()
        self._close_pipes()

    def _kill(self):
        if self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()

    def _close_pipes(self):
        for pipe in (self._proc.stdin, self._proc.stdout, self._proc.stderr):
            try:
                pipe.close()
            except OSError:
                pass


class FixtureReplayDetector:
    """Deterministic replay backend serving pre-recorded detections.

    A frame absent from the fixture file yields an empty result. With
    ``delay_ms`` unset the host-side elapsed equals the recorded figure so
    replay runs are byte-for-byte reproducible; with a synthetic delay the
    real (slept) wall time is reported instead.
    """

    def __init__(self, spec: DetectorSpec):
        self.spec = spec
        self.name = spec.id
        self.frames_served = 0
        self._stopped = False
        self._responses = _parse_fixture_file(Path(spec.launch), spec.id)

    def infer(self, frame_id: str, image_path: str | Path) -> InferenceResult:
        if self._stopped:
            raise DetectorFault(f"detector {self.spec.id!r}: already stopped")
        started = time.perf_counter()
        if self.spec.delay_ms:
            time.sleep(self.spec.delay_ms / 1000.0)
        detections, reported = self._responses.get(frame_id, ((), 0.0))
        self.frames_served += 1
        if self.spec.delay_ms:
            elapsed = (time.perf_counter() - started) * 1000.0
        else:
            elapsed = reported
        return InferenceResult(
            frame_id=frame_id,
            detections=detections,
            elapsed_ms=elapsed,
            reported_ms=reported,
        )

    def stop(self):
        self._stopped = True


def _parse_fixture_file(path: Path, source: str):
    if not path.is_file():
        raise StartupError(f"fixture file not found: {path}")
    responses: dict[str, tuple[tuple[Detection, ...], float]] = {}
    current: str | None = None
    pending: list[Detection] = []
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        keyword = fields[0]
        try:
            if keyword == "FRAME":
                if current is not None:
                    raise ProtocolError(f"FRAME {current!r} missing END")
                if len(fields) != 2:
                    raise ProtocolError("FRAME needs exactly one frame id")
                current = fields[1]
                pending = []
            elif keyword == "DET":
                if current is None:
                    raise ProtocolError("DET outside a FRAME block")
                pending.append(_parse_det_line(fields, current, source))
            elif keyword == "END":
                if current is None or len(fields) != 3 or fields[1] != current:
                    raise ProtocolError(f"bad END line: {line!r}")
                responses[current] = (tuple(pending), float(fields[2]))
                current = None
            else:
                raise ProtocolError(f"unparseable fixture line: {line!r}")
        except (ProtocolError, ValueError) as exc:
            raise StartupError(f"{path}:{line_no}: {exc}") from exc
    if current is not None:
        raise StartupError(f"{path}: FRAME {current!r} missing END")
    return responses


def start(spec: DetectorSpec):
    """Bring up a detector handle ready to serve infer requests."""
    if spec.kind == FIXTURE:
        return FixtureReplayDetector(spec)
    return ExternalProcessDetector(spec)


def stop(handle) -> None:
    handle.stop()


@dataclass
class SupervisedDetector:
    """Fault-counting wrapper: restarts a faulted backend with backoff.

    One fault episode gets up to three restart attempts (1 s, 2 s, 4 s); if
    all fail the detector runs degraded (``dead``) and the pipeline carries
    on with the survivor. A successful inference resets the budget.
    """

    spec: DetectorSpec
    sleep: callable = time.sleep
    handle: object = None
    fault_count: int = 0
    dead: bool = False
    _restarts_used: int = field(default=0, repr=False)

    def start(self):
        self.handle = start(self.spec)
        return self

    def safe_infer(self, frame_id: str, image_path: str | Path) -> InferenceResult | None:
        """Infer, absorbing faults. None means this detector skipped the frame."""
        if self.dead:
            return None
        try:
            result = self.handle.infer(frame_id, image_path)
            self._restarts_used = 0
            return result
        except DetectorFault:
            self.fault_count += 1
            self._recover()
            return None

    def _recover(self):
        try:
            self.handle.stop()
        except Exception:
            pass
        while self._restarts_used < len(RESTART_BACKOFF_S):
            self.sleep(RESTART_BACKOFF_S[self._restarts_used])
            self._restarts_used += 1
            try:
                self.handle = start(self.spec)
                return
            except StartupError:
                continue
        self.dead = True

    def stop(self):
        if self.handle is not None:
            self.handle.stop()
