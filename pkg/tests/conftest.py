import random
import sys
from pathlib import Path

import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))

from farmsentinel.geometry import BBox, Detection
from farmsentinel.metrics import GroundTruthBox

DATA_DIR = Path(__file__).parent / "data"

CLASSES = ("elephant", "boar", "monkey")

STUB_ADAPTER = r'''
import os
import sys

name = sys.argv[1]
mode = sys.argv[2] if len(sys.argv) > 2 else "normal"
marker = sys.argv[3] if len(sys.argv) > 3 else ""

if mode == "no-ready":
    sys.stderr.write("model load failed: weights missing\n")
    sys.exit(3)

print(f"READY {name}", flush=True)

if mode == "flaky":
    if marker and not os.path.exists(marker):
        open(marker, "w").close()
        mode = "garbage"
    else:
        mode = "normal"

for line in sys.stdin:
    line = line.strip()
    if line == "QUIT":
        sys.exit(0)
    parts = line.split(maxsplit=2)
    if len(parts) != 3 or parts[0] != "INFER":
        print("ERR - malformed request", flush=True)
        continue
    fid = parts[1]
    if mode == "normal":
        print(f"DET {fid} boar 0.900000 0.250000 0.250000 0.750000 0.750000", flush=True)
        print(f"END {fid} 100", flush=True)
    elif mode == "empty":
        print(f"END {fid} 9300", flush=True)
    elif mode == "badconf":
        print(f"DET {fid} boar 1.700000 0.250000 0.250000 0.750000 0.750000", flush=True)
        print(f"END {fid} 10", flush=True)
    elif mode == "garbage":
        print("totally not protocol", flush=True)
    elif mode == "err":
        print(f"ERR {fid} image unreadable", flush=True)
    elif mode == "silent":
        pass
    elif mode == "die":
        sys.exit(1)
'''


def stub_adapter_cmd(tmp_path: Path, name="stub", mode="normal", marker="") -> str:
    script = tmp_path / "stub_adapter.py"
    if not script.exists():
        script.write_text(STUB_ADAPTER)
    cmd = f"{sys.executable} {script} {name} {mode}"
    if marker:
        cmd += f" {marker}"
    return cmd


def write_image(path: Path, size=(64, 48), color=(30, 120, 60)) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.new("RGB", size, color).save(path)
    return path


def random_box(rng: random.Random, min_side: float = 0.05) -> BBox:
    w = rng.uniform(min_side, 0.9)
    h = rng.uniform(min_side, 0.9)
    x = rng.uniform(0.0, 1.0 - w)
    y = rng.uniform(0.0, 1.0 - h)
    return BBox(x, y, x + w, y + h)


def lattice_box(rng: random.Random, resolution: int = 1000) -> BBox:
    """Random box with corners on the raster grid, so cell counting is exact."""
    b = random_box(rng)
    snap = lambda v: round(v * resolution) / resolution
    return BBox(snap(b.x_min), snap(b.y_min), snap(b.x_max), snap(b.y_max))


def det(
    box: BBox,
    label: str = "boar",
    conf: float = 0.9,
    source: str = "yolo",
    frame: str = "f1",
) -> Detection:
    return Detection(bbox=box, label=label, confidence=conf, source=source, frame_id=frame)


def truth(box: BBox, label: str = "boar", frame: str = "f1") -> GroundTruthBox:
    return GroundTruthBox(bbox=box, label=label, frame_id=frame)


@pytest.fixture
def rng():
    return random.Random(0xA11CE)
