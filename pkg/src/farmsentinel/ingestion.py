"""Frame ingestion: image directories, video files and live cameras.

Directory sources are deterministic (lexicographic order, files served in
place) and drive all golden tests. Video and camera sources decode through
OpenCV when it is installed and materialize sampled frames into a bounded
spool directory; camera capture keeps only the latest frame, because the
monitor wants current scene state, not backlog.
"""

from __future__ import annotations

import queue
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, StartupError, StreamFault

IMAGE_DIR = "image_dir"
VIDEO_FILE = "video_file"
CAMERA = "camera"

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".bmp")


@dataclass(frozen=True)
class SourceConfig:
    uri: str
    kind: str = ""  # inferred from uri when empty
    sample_every_n: int = 1
    spool_dir: str = "spool"
    spool_cap: int = 64

    def __post_init__(self):
        if self.sample_every_n < 1:
            raise ConfigError(f"source.sample_every_n: {self.sample_every_n} < 1")
        if self.spool_cap < 1:
            raise ConfigError(f"source.spool_cap: {self.spool_cap} < 1")
        if self.kind and self.kind not in (IMAGE_DIR, VIDEO_FILE, CAMERA):
            raise ConfigError(f"source.kind: unknown kind {self.kind!r}")

    def resolved_kind(self) -> str:
        if self.kind:
            return self.kind
        if self.uri.startswith("camera:"):
            return CAMERA
        path = Path(self.uri)
        if path.is_dir():
            return IMAGE_DIR
        return VIDEO_FILE


@dataclass(frozen=True)
class FrameRecord:
    frame_id: str
    timestamp: float
    image_path: Path
    source_kind: str


class SpoolManager:
    """Bounded store of materialized frames with in-flight reference counts.

    A frame enters referenced (it is about to be handed to inference) and is
    released by the consumer; eviction removes the oldest unreferenced files
    once the cap is exceeded.
    """

    def __init__(self, directory: Path, cap: int):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.cap = cap
        self._entries: OrderedDict[str, dict] = OrderedDict()

    def path_for(self, frame_id: str) -> Path:
        return self.directory / f"{frame_id}.jpg"

    def add(self, frame_id: str) -> Path:
        path = self.path_for(frame_id)
        self._entries[frame_id] = {"path": path, "referenced": True}
        self._evict()
        return path

    def release(self, frame_id: str):
        entry = self._entries.get(frame_id)
        if entry:
            entry["referenced"] = False
            self._evict()

    def _evict(self):
        while len(self._entries) > self.cap:
            victim = next(
                (fid for fid, e in self._entries.items() if not e["referenced"]),
                None,
            )
            if victim is None:
                return  # everything in flight; stay over cap rather than lose frames
            entry = self._entries.pop(victim)
            entry["path"].unlink(missing_ok=True)


class DirectorySource:
    """Serves the images of a directory in lexicographic filename order."""

    def __init__(self, cfg: SourceConfig, clock=time.time):
        self.cfg = cfg
        self.clock = clock
        root = Path(cfg.uri)
        if not root.is_dir():
            raise StartupError(f"image directory not found: {cfg.uri}")
        files = sorted(
            p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
        )
        self._files = files[:: cfg.sample_every_n]
        self._pos = 0

    def next_frame(self) -> FrameRecord | None:
        while self._pos < len(self._files):
            path = self._files[self._pos]
            self._pos += 1
            if path.is_file():
                return FrameRecord(
                    frame_id=path.stem,
                    timestamp=self.clock(),
                    image_path=path,
                    source_kind=IMAGE_DIR,
                )
        return None

    def release(self, frame_id: str):
        pass  # files are the caller's; nothing is spooled

    def close(self):
        pass


def _require_cv2():
    try:
        import cv2
    except ImportError as exc:
        raise StartupError(
            "video and camera sources need OpenCV (install the 'video' extra)"
        ) from exc
    return cv2


class VideoFileSource:
    """Decodes a video container, materializing every Nth frame to the spool."""

    def __init__(self, cfg: SourceConfig, clock=time.time):
        self.cfg = cfg
        self.clock = clock
        cv2 = _require_cv2()
        if not Path(cfg.uri).is_file():
            raise StartupError(f"video file not found: {cfg.uri}")
        self._cap = cv2.VideoCapture(cfg.uri)
        if not self._cap.isOpened():
            raise StartupError(f"cannot decode video: {cfg.uri}")
        self._cv2 = cv2
        self._spool = SpoolManager(Path(cfg.spool_dir), cfg.spool_cap)
        self._index = 0

    def next_frame(self) -> FrameRecord | None:
        while True:
            ok, frame = self._cap.read()
            if not ok:
                return None
            index = self._index
            self._index += 1
            if index % self.cfg.sample_every_n:
                continue
            frame_id = f"f{index:06d}"
            path = self._spool.add(frame_id)
            if not self._cv2.imwrite(str(path), frame):
                raise StreamFault(f"cannot write spooled frame {frame_id}")
            return FrameRecord(
                frame_id=frame_id,
                timestamp=self.clock(),
                image_path=path,
                source_kind=VIDEO_FILE,
            )

    def release(self, frame_id: str):
        self._spool.release(frame_id)

    def close(self):
        self._cap.release()


class CameraSource:
    """Live capture with a latest-wins buffer of depth one.

    A reader thread drops stale frames; ``next_frame`` blocks until a frame
    is available and raises ``StreamFault`` if the device disappears.
    """

    def __init__(self, cfg: SourceConfig, clock=time.time):
        self.cfg = cfg
        self.clock = clock
        cv2 = _require_cv2()
        device = cfg.uri.removeprefix("camera:")
        try:
            device = int(device)
        except ValueError:
            pass
        self._cap = cv2.VideoCapture(device)
        if not self._cap.isOpened():
            raise StartupError(f"cannot open camera device: {cfg.uri}")
        self._cv2 = cv2
        self._spool = SpoolManager(Path(cfg.spool_dir), cfg.spool_cap)
        self._latest: queue.Queue = queue.Queue(maxsize=1)
        self._running = True
        self._counter = 0
        self._thread = threading.Thread(target=self._reader, daemon=True)
        self._thread.start()

    def _reader(self):
        grabbed = 0
        while self._running:
            ok, frame = self._cap.read()
            if not ok:
                self._latest.put(None)  # device fault marker
                return
            grabbed += 1
            if (grabbed - 1) % self.cfg.sample_every_n:
                continue
            if self._latest.full():
                try:
                    self._latest.get_nowait()  # drop the stale frame
                except queue.Empty:
                    pass
            self._latest.put(frame)

    def next_frame(self) -> FrameRecord | None:
        frame = self._latest.get()
        if frame is None:
            raise StreamFault(f"camera disconnected: {self.cfg.uri}")
        frame_id = f"f{self._counter:06d}"
        self._counter += 1
        path = self._spool.add(frame_id)
        if not self._cv2.imwrite(str(path), frame):
            raise StreamFault(f"cannot write spooled frame {frame_id}")
        return FrameRecord(
            frame_id=frame_id,
            timestamp=self.clock(),
            image_path=path,
            source_kind=CAMERA,
        )

    def release(self, frame_id: str):
        self._spool.release(frame_id)

    def close(self):
        self._running = False
        self._cap.release()


def open_source(cfg: SourceConfig, clock=time.time):
    """Open a frame stream positioned before the first frame."""
    kind = cfg.resolved_kind()
    if kind == IMAGE_DIR:
        return DirectorySource(cfg, clock)
    if kind == VIDEO_FILE:
        return VideoFileSource(cfg, clock)
    return CameraSource(cfg, clock)


def next_frame(stream) -> FrameRecord | None:
    """Next sampled frame, or None at end of stream."""
    return stream.next_frame()
