"""Smoke tests against real checkpoints, when the environment provides them.

Point ADAPTER_YOLO_WEIGHTS at a YOLOv5 .pt file and/or ADAPTER_SSD_MODEL at
an SSD-MobileNet .tflite, plus ADAPTER_SAMPLE_DIR at a directory holding one
<class>.jpg per class (elephant.jpg, boar.jpg, monkey.jpg). No accuracy
threshold is claimed: one correct-class detection per sample passes.
"""

import os
from pathlib import Path

import pytest

from detector_adapter.backends import load_backend

SAMPLE_DIR = os.environ.get("ADAPTER_SAMPLE_DIR")
YOLO_WEIGHTS = os.environ.get("ADAPTER_YOLO_WEIGHTS")
SSD_MODEL = os.environ.get("ADAPTER_SSD_MODEL")

CLASSES = ("elephant", "boar", "monkey")

needs_samples = pytest.mark.skipif(
    not SAMPLE_DIR, reason="ADAPTER_SAMPLE_DIR not provided"
)


def smoke(backend):
    found = {}
    for cls in CLASSES:
        sample = Path(SAMPLE_DIR) / f"{cls}.jpg"
        if not sample.is_file():
            pytest.skip(f"sample image missing: {sample}")
        detections = backend.predict(sample, cls)
        found[cls] = any(d.label == cls for d in detections)
    missing = [cls for cls, ok in found.items() if not ok]
    assert not missing, f"no correct-class detection for: {missing}"


@needs_samples
@pytest.mark.skipif(not YOLO_WEIGHTS, reason="ADAPTER_YOLO_WEIGHTS not provided")
def test_yolo_checkpoint_detects_each_class():
    smoke(load_backend("yolo_v5", Path(YOLO_WEIGHTS), list(CLASSES)))


@needs_samples
@pytest.mark.skipif(not SSD_MODEL, reason="ADAPTER_SSD_MODEL not provided")
def test_ssd_checkpoint_detects_each_class():
    smoke(load_backend("ssd_mobilenet", Path(SSD_MODEL), list(CLASSES)))
