"""Model backends behind a single predict(image_path) -> detections surface.

The adapter reports every class its model knows: the host's fusion stage
owns the allow-list, keeping the filter logic (and its tests) in one place.
Confidences pass through unmodified.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

from .protocol import RawDetection

STUB = "stub"
YOLO_V5 = "yolo_v5"
SSD_MOBILENET = "ssd_mobilenet"

MODEL_KINDS = (STUB, YOLO_V5, SSD_MOBILENET)


class ModelLoadError(Exception):
    """Model could not be loaded; the adapter exits nonzero before READY."""


class FrameError(Exception):
    """Per-frame failure; answered with an ERR line, the process survives."""


class StubModel:
    """Deterministic test backend.

    The model file is JSON: ``{}`` yields one centered box (0.25..0.75) with
    the first class name at 0.9 confidence; a ``detections`` list overrides
    that; a ``per_frame`` map keys detections by frame id.
    """

    def __init__(self, model_path: Path, class_names: list[str]):
        try:
            doc = json.loads(model_path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ModelLoadError(f"stub model unreadable: {exc}") from exc
        default = [
            {
                "label": class_names[0],
                "confidence": 0.9,
                "box": [0.25, 0.25, 0.75, 0.75],
            }
        ]
        self._constant = doc.get("detections", default)
        self._per_frame = doc.get("per_frame", {})

    @staticmethod
    def _to_raw(entry: dict) -> RawDetection:
        x0, y0, x1, y1 = entry["box"]
        return RawDetection(
            label=entry["label"],
            confidence=entry["confidence"],
            x_min=x0,
            y_min=y0,
            x_max=x1,
            y_max=y1,
        )

    def predict(self, image_path: Path, frame_id: str) -> list[RawDetection]:
        if not image_path.is_file():
            raise FrameError(f"image not found: {image_path}")
        entries = self._per_frame.get(frame_id, self._constant)
        return [self._to_raw(e) for e in entries]


class YoloV5Model:
    """Trained YOLOv5 weights (.pt) through torch hub."""

    def __init__(self, model_path: Path, class_names: list[str], device_hint=None):
        try:
            import torch
        except ImportError as exc:
            raise ModelLoadError("yolo_v5 backend needs torch installed") from exc
        try:
            self._model = torch.hub.load(
                "ultralytics/yolov5", "custom", path=str(model_path), verbose=False
            )
        except Exception as exc:
            raise ModelLoadError(f"cannot load YOLOv5 weights: {exc}") from exc
        if device_hint:
            self._model.to(device_hint)
        names = getattr(self._model, "names", None)
        self._names = names if names else dict(enumerate(class_names))

    def predict(self, image_path: Path, frame_id: str) -> list[RawDetection]:
        if not image_path.is_file():
            raise FrameError(f"image not found: {image_path}")
        try:
            results = self._model(str(image_path))
            table = results.xyxyn[0].tolist()  # normalized xyxy + conf + class
        except Exception as exc:
            raise FrameError(f"inference failed: {exc}") from exc
        out = []
        for x0, y0, x1, y1, conf, cls in table:
            label = str(self._names.get(int(cls), int(cls))).lower().replace(" ", "_")
            out.append(RawDetection(label, float(conf), x0, y0, x1, y1))
        return out


class SsdMobileNetModel:
    """SSD-MobileNet flat-buffer model (.tflite) with the standard
    postprocessed output heads: boxes, classes, scores, count."""

    def __init__(self, model_path: Path, class_names: list[str], device_hint=None):
        try:
            from tflite_runtime.interpreter import Interpreter
        except ImportError:
            try:
                from tensorflow.lite.python.interpreter import Interpreter
            except ImportError as exc:
                raise ModelLoadError(
                    "ssd_mobilenet backend needs tflite-runtime or tensorflow"
                ) from exc
        try:
            import numpy as np
            from PIL import Image
        except ImportError as exc:
            raise ModelLoadError("ssd_mobilenet backend needs numpy and pillow") from exc
        self._np = np
        self._Image = Image
        self._class_names = class_names
        try:
            self._interpreter = Interpreter(model_path=str(model_path))
            self._interpreter.allocate_tensors()
        except Exception as exc:
            raise ModelLoadError(f"cannot load tflite model: {exc}") from exc
        self._input = self._interpreter.get_input_details()[0]
        self._outputs = self._interpreter.get_output_details()

    def predict(self, image_path: Path, frame_id: str) -> list[RawDetection]:
        np = self._np
        try:
            image = self._Image.open(image_path).convert("RGB")
        except OSError as exc:
            raise FrameError(f"cannot read image: {exc}") from exc
        _, height, width, _ = self._input["shape"]
        resized = np.asarray(image.resize((width, height)), dtype=np.float32)
        if self._input["dtype"] == np.float32:
            resized = (resized - 127.5) / 127.5
        else:
            resized = resized.astype(self._input["dtype"])
        self._interpreter.set_tensor(self._input["index"], resized[np.newaxis])
        try:
            self._interpreter.invoke()
        except Exception as exc:
            raise FrameError(f"inference failed: {exc}") from exc
        boxes = self._interpreter.get_tensor(self._outputs[0]["index"])[0]
        classes = self._interpreter.get_tensor(self._outputs[1]["index"])[0]
        scores = self._interpreter.get_tensor(self._outputs[2]["index"])[0]
        out = []
        for (y0, x0, y1, x1), cls, score in zip(boxes, classes, scores):
            if score <= 0 or x1 <= x0 or y1 <= y0:
                continue
            idx = int(cls)
            label = (
                self._class_names[idx].lower().replace(" ", "_")
                if 0 <= idx < len(self._class_names)
                else str(idx)
            )
            out.append(RawDetection(label, float(score), x0, y0, x1, y1))
        return out


def load_backend(model_kind: str, model_path: Path, class_names: list[str],
                 device_hint=None):
    if not model_path.is_file():
        raise ModelLoadError(f"model file not found: {model_path}")
    if not class_names:
        raise ModelLoadError("class names list is empty")
    if model_kind == STUB:
        return StubModel(model_path, class_names)
    if model_kind == YOLO_V5:
        return YoloV5Model(model_path, class_names, device_hint)
    if model_kind == SSD_MOBILENET:
        return SsdMobileNetModel(model_path, class_names, device_hint)
    raise ModelLoadError(f"unknown model kind: {model_kind!r}")


def timed_predict(backend, image_path: Path, frame_id: str):
    started = time.perf_counter()
    detections = backend.predict(Path(image_path), frame_id)
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    return detections, elapsed_ms
