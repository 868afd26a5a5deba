#!/usr/bin/env python3
"""End-to-end benchmark on the bundled synthetic scenarios.

Renders the easy and hard fixtures, bootstraps a labelled dataset from the
first frames of each, trains a classifier, tracks the held-out tail, and
prints one evaluation row per scenario.  Everything goes through the same
CLI entry points a manual run would use, so the numbers printed here are
reproducible from the shell with the commands echoed along the way.
"""

import argparse
import sys
import time
from pathlib import Path

from herdtrack.cli import main as herdtrack
from herdtrack.evaluation import (
    ConfusionCounts,
    format_report_table,
    load_truth_boxes,
    precision_recall,
)

SCENARIOS = {
    # scenario -> (training frames, tracking start)
    "easy": (50, 50),
    "hard": (36, 36),
}


def _echo(argv):
    print("  $ herdtrack " + " ".join(argv))
    code = herdtrack(argv)
    if code != 0:
        print(f"command failed with exit code {code}", file=sys.stderr)
        sys.exit(code)


def _target_flag(truth_path):
    box = load_truth_boxes(truth_path)[0]
    if box is None:
        print("target hidden in the first frame; pick another seed", file=sys.stderr)
        sys.exit(3)
    x0, y0, x1, y1 = box
    return f"{x0},{y0},{x1 - x0 + 1},{y1 - y0 + 1}"


def _read_counts(path):
    header, row = Path(path).read_text().splitlines()
    tp, fp, tn, fn = (int(v) for v in row.split(",")[:4])
    return ConfusionCounts(tp, fp, tn, fn)


def run_scenario(name, out_root, frames_count, seed, trees):
    limit, start = SCENARIOS[name]
    root = out_root / name
    fixture = root / "fixture"
    print(f"\n=== {name} scenario ===")
    _echo(
        [
            "synth", "--scenario", name, "--frames-count", str(frames_count),
            "--seed", str(seed), "--out", str(fixture),
        ]
    )
    common = [
        "--frames", str(fixture / "frames"),
        "--masks", str(fixture / "masks"),
        "--edges", str(fixture / "edges"),
        "--stride", "1",
    ]
    _echo(
        [
            "bootstrap", *common,
            "--target-bbox", _target_flag(fixture / "truth.jsonl"),
            "--limit", str(limit), "--seed", "7",
            "--out", str(root / "boot"),
        ]
    )
    _echo(
        [
            "train", "--dataset", str(root / "boot" / "dataset.csv"),
            "--trees", str(trees), "--seed", "7",
            "--out", str(root / "model"),
        ]
    )
    _echo(
        [
            "track", *common,
            "--start", str(start),
            "--model", str(root / "model" / "model.json"),
            "--seed", "9", "--no-overlays",
            "--out", str(root / "track"),
        ]
    )
    _echo(
        [
            "eval",
            "--log", str(root / "track" / "track.jsonl"),
            "--truth", str(fixture / "truth.jsonl"),
            "--name", name,
            "--out", str(root / "eval"),
        ]
    )
    return _read_counts(root / "eval" / "report.csv")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("benchmark_out"))
    parser.add_argument("--frames-count", type=int, default=80,
                        help="frames per rendered fixture (hard uses 60)")
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--trees", type=int, default=300)
    args = parser.parse_args(argv)

    started = time.perf_counter()
    entries = []
    for name in SCENARIOS:
        frames_count = args.frames_count if name == "easy" else min(
            args.frames_count, 60
        )
        counts = run_scenario(name, args.out, frames_count, args.seed, args.trees)
        entries.append((name, counts, ""))
    print("\n=== summary ===")
    print(format_report_table(entries), end="")
    easy_r = precision_recall(entries[0][1])[1]
    hard_r = precision_recall(entries[1][1])[1]
    if easy_r is not None and hard_r is not None:
        print(f"recall drop under occlusion: {100 * (easy_r - hard_r):.1f} points")
    print(f"total {time.perf_counter() - started:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
