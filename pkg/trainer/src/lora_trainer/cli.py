"""Subprocess entry point.

    lora-trainer TRAINING_SET_FILE MANIFEST_FILE QUESTIONS_FILE OUT_DIR

Exit 0 on success. Any failure writes OUT_DIR/error_report.json and exits 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .train import train


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="lora-trainer",
        description=(
            "Fine-tune low-rank adapters on a training set and export "
            "per-epoch checkpoints, CE logs, and greedy answers."
        ),
    )
    parser.add_argument("training_set_file", type=Path)
    parser.add_argument("manifest_file", type=Path)
    parser.add_argument("questions_file", type=Path)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)

    try:
        records = train(
            args.training_set_file, args.manifest_file, args.questions_file, args.out_dir
        )
    except Exception as e:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / "error_report.json").write_text(
            json.dumps({"error": type(e).__name__, "message": str(e)}, indent=1) + "\n",
            encoding="utf-8",
        )
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"trained {len(records)} epochs; final loss {records[-1].train_loss:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
