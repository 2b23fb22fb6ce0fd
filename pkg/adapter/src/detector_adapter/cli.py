"""Command line for the adapter process."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backends import MODEL_KINDS, ModelLoadError
from .serve import AdapterConfig, serve


def load_class_names(path: Path) -> tuple[str, ...]:
    names = tuple(
        line.strip().lower()
        for line in path.read_text().splitlines()
        if line.strip() and not line.startswith("#")
    )
    return names


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="detector-adapter",
        description="Serve an object detector over the line-delimited protocol",
    )
    parser.add_argument("--model-kind", required=True, choices=MODEL_KINDS)
    parser.add_argument("--model-path", required=True)
    parser.add_argument("--class-names-file", required=True,
                        help="text file, one class name per line")
    parser.add_argument("--device", default=None, help="compute device hint")
    args = parser.parse_args(argv)

    names_path = Path(args.class_names_file)
    if not names_path.is_file():
        print(f"class names file not found: {names_path}", file=sys.stderr)
        return 2
    cfg = AdapterConfig(
        model_kind=args.model_kind,
        model_path=Path(args.model_path),
        class_names=load_class_names(names_path),
        device_hint=args.device,
    )
    try:
        return serve(cfg)
    except ModelLoadError as exc:
        print(f"model load failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
