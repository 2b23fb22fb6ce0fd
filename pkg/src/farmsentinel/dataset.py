"""Ground-truth dataset loading.

Layout: ``<root>/images/*`` holds the stills, ``<root>/labels/<stem>.txt``
holds one annotation file per image with lines
``class_index x_center y_center width height`` (all normalized), and
``<root>/classes.txt`` maps indices to class names, one per line. An image
without a label file simply has no annotated objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import DatasetError
from .geometry import BBox, canonical_label
from .metrics import GroundTruthBox

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".bmp")


@dataclass(frozen=True)
class DatasetItem:
    frame_id: str
    image_path: Path
    truths: tuple[GroundTruthBox, ...]


@dataclass(frozen=True)
class Dataset:
    root: Path
    class_names: tuple[str, ...]
    items: tuple[DatasetItem, ...]

    def all_truths(self) -> list[GroundTruthBox]:
        return [t for item in self.items for t in item.truths]


def load_class_names(path: Path) -> tuple[str, ...]:
    if not path.is_file():
        raise DatasetError("class names file not found", path=path)
    names = []
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            names.append(canonical_label(line))
        except ValueError as exc:
            raise DatasetError(str(exc), path=path, line_no=line_no) from exc
    if not names:
        raise DatasetError("no class names defined", path=path)
    return tuple(names)


def parse_label_file(
    path: Path, class_names: tuple[str, ...], frame_id: str
) -> tuple[GroundTruthBox, ...]:
    truths = []
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 5:
            raise DatasetError(
                f"expected 5 fields, got {len(fields)}", path=path, line_no=line_no
            )
        try:
            idx = int(fields[0])
            xc, yc, w, h = (float(v) for v in fields[1:])
        except ValueError as exc:
            raise DatasetError(f"bad number: {exc}", path=path, line_no=line_no) from exc
        if not 0 <= idx < len(class_names):
            raise DatasetError(
                f"class index {idx} outside 0..{len(class_names) - 1}",
                path=path,
                line_no=line_no,
            )
        if w <= 0 or h <= 0:
            raise DatasetError("non-positive box size", path=path, line_no=line_no)
        try:
            bbox = BBox(xc - w / 2, yc - h / 2, xc + w / 2, yc + h / 2)
        except ValueError as exc:
            raise DatasetError(str(exc), path=path, line_no=line_no) from exc
        truths.append(GroundTruthBox(bbox=bbox, label=class_names[idx], frame_id=frame_id))
    return tuple(truths)


def load_trial_log(path: Path | str) -> list[tuple[str, str]]:
    """Recognition-trial log: one ``actual predicted`` pair per line.

    ``predicted`` is a class name or ``none`` for trials where nothing was
    recognized; '#' starts a comment.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError("trial log not found", path=path)
    trials = []
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise DatasetError(
                f"expected 'actual predicted', got {len(fields)} fields",
                path=path,
                line_no=line_no,
            )
        trials.append((fields[0], fields[1]))
    return trials


def load_dataset(root: Path | str) -> Dataset:
    root = Path(root)
    images_dir = root / "images"
    labels_dir = root / "labels"
    if not images_dir.is_dir():
        raise DatasetError("images/ directory not found", path=images_dir)
    class_names = load_class_names(root / "classes.txt")

    items = []
    for image_path in sorted(images_dir.iterdir()):
        if image_path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        frame_id = image_path.stem
        label_path = labels_dir / f"{frame_id}.txt"
        truths = (
            parse_label_file(label_path, class_names, frame_id)
            if label_path.is_file()
            else ()
        )
        items.append(DatasetItem(frame_id=frame_id, image_path=image_path, truths=truths))
    if not items:
        raise DatasetError("dataset has no images", path=images_dir)
    return Dataset(root=root, class_names=class_names, items=tuple(items))
