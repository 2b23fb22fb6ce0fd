import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def class_names_file(tmp_path):
    path = tmp_path / "classes.txt"
    path.write_text("elephant\nboar\nmonkey\n")
    return path


@pytest.fixture
def stub_model_file(tmp_path):
    path = tmp_path / "stub.json"
    path.write_text("{}")
    return path


@pytest.fixture
def sample_image(tmp_path):
    # a real decoder is only needed by real backends; the stub checks existence
    path = tmp_path / "frame.png"
    path.write_bytes(b"\x89PNG\r\n\x1a\nstub")
    return path


def stub_command(model_path, class_names_path, kind="stub"):
    return (
        f"{sys.executable} -m detector_adapter.cli "
        f"--model-kind {kind} --model-path {model_path} "
        f"--class-names-file {class_names_path}"
    )


def write_stub_model(tmp_path, doc, name="model.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path
