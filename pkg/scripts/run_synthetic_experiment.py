#!/usr/bin/env python3
"""Run the frozen synthetic experiment end to end and print its report.

Synthesizes the corpus, mines every label with the oracle approver, builds
training sets, scores the test split, and writes the evaluation report.
Identical seeds reproduce the report byte for byte.
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from tagsift.config import load_config
from tagsift.pipeline import Workspace, run_full_pipeline

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "acceptance.ini"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workspace", required=True,
                        help="directory for corpus, artifacts, and report")
    parser.add_argument("--seed", type=int, default=20260813)
    parser.add_argument("--config", default=str(DEFAULT_CONFIG),
                        help=f"pipeline INI (default: {DEFAULT_CONFIG})")
    args = parser.parse_args()

    config = load_config(args.config)
    started = time.perf_counter()
    report = run_full_pipeline(
        Workspace.at(args.workspace), config, args.seed, oracle=True
    )
    print(report.read_text(encoding="utf-8"), end="")
    print(f"# wall_seconds={time.perf_counter() - started:.1f}")


if __name__ == "__main__":
    main()
