"""Command-line entry point for the two-step workflow: synthesize or load
a sequence, bootstrap a labelled dataset, train the forest, track, and
evaluate.  Every command writes a manifest next to its outputs so a run
can be reproduced from the output directory alone.

Exit codes: 0 success, 2 usage error, 3 data/environment error, 4 internal.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .bootstrap import build_dataset, export_csv, init_labels, load_csv
from .errors import ArgumentError, PipelineError, SelectionError
from .evaluation import (
    ConfusionCounts,
    align_with_target_boxes,
    confusion,
    format_report_table,
    load_truth_boxes,
    precision_recall,
    write_report_csv,
)
from .forest import Forest, ForestConfig, rebalance, rebalance_seed, time_split, train
from .imaging import load_sequence
from .providers import FileEdgeProvider, FileMaskProvider, GradientEdgeProvider
from .rng import Rng
from .segmentation import SegmentationConfig, segment_frame
from .synth import easy_scenario, hard_scenario, write_fixture
from .tracker import OverlayDirSink, load_log, run, write_log

log = logging.getLogger(__name__)

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "min_area": 800,
    "stride": 10,
    "trees": 300,
    "keep_fraction": 0.5,
    "train_fraction": 0.8,
    "iou": 0.3,
    "frames_count": 80,
    "port": 8008,
}


@dataclass
class RunManifest:
    """Everything needed to reproduce one command invocation."""

    command: str
    version: str
    started: str
    finished: str = ""
    options: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def write(self, out_dir) -> None:
        self.finished = _now()
        path = Path(out_dir) / "manifest.json"
        path.write_text(
            json.dumps(asdict(self), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None, help="master RNG seed")
    shared.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker cap (the current pipeline is single-threaded; values > 1 "
        "are accepted and reserved)",
    )
    shared.add_argument(
        "--min-area", type=int, default=None, help="area floor in px for blobs "
        "and instances",
    )
    shared.add_argument(
        "--stride", type=int, default=None, help="frame subsampling step"
    )
    shared.add_argument("--out", type=Path, default=None, help="output directory")
    shared.add_argument(
        "--config", type=Path, default=None, help="TOML file with option "
        "defaults (command-line flags win)",
    )

    parser = argparse.ArgumentParser(
        prog="herdtrack",
        description="Track one target among visually similar objects by "
        "bootstrapped instance classification.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser(
        "synth", parents=[shared], help="write a synthetic fixture"
    )
    p_synth.add_argument(
        "--scenario", choices=("easy", "hard"), default="easy"
    )
    p_synth.add_argument(
        "--frames-count", type=int, default=None, help="number of frames"
    )

    p_boot = sub.add_parser(
        "bootstrap", parents=[shared], help="build the labelled dataset"
    )
    p_boot.add_argument("--frames", type=Path, required=True)
    p_boot.add_argument("--masks", type=Path, required=True)
    p_boot.add_argument("--edges", type=Path, default=None)
    p_boot.add_argument(
        "--target-bbox",
        default=None,
        help="x,y,w,h of the target in the first frame (instance with the "
        "largest overlap is selected); omit to pick the target in the "
        "review UI instead",
    )
    p_boot.add_argument(
        "--no-edge-fallback",
        action="store_true",
        help="fail on missing edge files instead of computing gradients",
    )
    p_boot.add_argument(
        "--limit",
        type=int,
        default=None,
        help="use only the first N frames of the sequence",
    )

    p_train = sub.add_parser(
        "train", parents=[shared], help="train the classifier from a dataset CSV"
    )
    p_train.add_argument("--dataset", type=Path, required=True)
    p_train.add_argument("--trees", type=int, default=None)
    p_train.add_argument("--keep-fraction", type=float, default=None)
    p_train.add_argument("--train-fraction", type=float, default=None)

    p_track = sub.add_parser(
        "track", parents=[shared], help="run the tracker over a sequence"
    )
    p_track.add_argument("--frames", type=Path, required=True)
    p_track.add_argument("--masks", type=Path, required=True)
    p_track.add_argument("--edges", type=Path, default=None)
    p_track.add_argument("--model", type=Path, required=True)
    p_track.add_argument("--start", type=int, default=0, help="first frame position")
    p_track.add_argument(
        "--no-overlays", action="store_true", help="skip overlay rendering"
    )
    p_track.add_argument("--no-edge-fallback", action="store_true")

    p_eval = sub.add_parser(
        "eval", parents=[shared], help="score a track log against ground truth"
    )
    p_eval.add_argument("--log", type=Path, required=True)
    p_eval.add_argument("--truth", type=Path, required=True)
    p_eval.add_argument("--iou", type=float, default=None)
    p_eval.add_argument("--name", default="sequence")
    p_eval.add_argument("--notes", default="")

    p_serve = sub.add_parser(
        "serve", parents=[shared], help="start the review service"
    )
    p_serve.add_argument("--frames", type=Path, required=True)
    p_serve.add_argument("--masks", type=Path, required=True)
    p_serve.add_argument("--edges", type=Path, default=None)
    p_serve.add_argument("--dataset", type=Path, default=None)
    p_serve.add_argument("--state", type=Path, required=True)
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--host", default="127.0.0.1")
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    """Merge CLI flags over config-file values over built-in defaults."""
    options = dict(DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path is not None:
        try:
            with open(config_path, "rb") as fh:
                loaded = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ArgumentError(f"bad config file {config_path}: {exc}") from exc
        for key, value in loaded.items():
            options[key.replace("-", "_")] = value
    for key, value in vars(args).items():
        if value is not None or key not in options:
            options[key] = value
    if options.get("out") is None:
        options["out"] = Path("out")
    options["out"] = Path(options["out"])
    if options["threads"] < 1:
        raise ArgumentError("--threads must be >= 1")
    if options["stride"] < 1:
        raise ArgumentError("--stride must be >= 1")
    if options["min_area"] < 0:
        raise ArgumentError("--min-area must be >= 0")
    return options


def _seg_config(options: dict) -> SegmentationConfig:
    return SegmentationConfig(
        min_blob_area=options["min_area"],
        min_instance_area=options["min_area"],
    )


def _edge_provider(options: dict):
    edges = options.get("edges")
    fallback = None if options.get("no_edge_fallback") else GradientEdgeProvider()
    if edges is None:
        return GradientEdgeProvider()
    return FileEdgeProvider(edges, fallback=fallback)


def _parse_bbox(text: str) -> tuple:
    try:
        x, y, w, h = (int(v) for v in text.split(","))
    except ValueError:
        raise ArgumentError(
            f"--target-bbox must be x,y,w,h integers, got {text!r}"
        ) from None
    if w < 1 or h < 1:
        raise ArgumentError("--target-bbox width and height must be >= 1")
    return (x, y, x + w - 1, y + h - 1)


def _overlap(a, b) -> int:
    iw = min(a[2], b[2]) - max(a[0], b[0]) + 1
    ih = min(a[3], b[3]) - max(a[1], b[1]) + 1
    return max(0, iw) * max(0, ih)


def cmd_synth(options: dict) -> int:
    manifest = RunManifest("synth", __version__, _now(), options=_jsonable(options))
    scenario = easy_scenario if options["scenario"] == "easy" else hard_scenario
    cfg = scenario(n_frames=options["frames_count"], seed=options["seed"])
    out = options["out"]
    out.mkdir(parents=True, exist_ok=True)
    paths = write_fixture(out, cfg, _seg_config(options))
    manifest.outputs = {k: str(v) for k, v in paths.items()}
    manifest.write(out)
    print(f"fixture written to {out} ({options['frames_count']} frames)")
    return 0


def cmd_bootstrap(options: dict) -> int:
    manifest = RunManifest(
        "bootstrap", __version__, _now(), options=_jsonable(options)
    )
    if options.get("target_bbox") is None:
        raise ArgumentError(
            "no --target-bbox given; pick the target in the review UI "
            "(herdtrack serve) and re-run with the chosen box"
        )
    target_box = _parse_bbox(options["target_bbox"])
    seq = load_sequence(options["frames"], stride=options["stride"])
    limit = options.get("limit")
    if limit is not None:
        if limit < 1:
            raise ArgumentError("--limit must be >= 1")
        seq = seq.slice(0, limit)
    mask_provider = FileMaskProvider(options["masks"])
    edge_provider = _edge_provider(options)
    seg = _seg_config(options)
    first_id = seq.frame_ids[0]
    first_frame = seq.frames[0]
    mask = mask_provider.mask(first_id)
    instances = segment_frame(first_frame, mask, edge_provider, first_id, seg)
    if not instances:
        raise SelectionError(f"frame {first_id}: no instances to select from")
    overlaps = [_overlap(inst.bbox, target_box) for inst in instances]
    best = int(np.argmax(overlaps))
    if overlaps[best] == 0:
        raise SelectionError(
            f"--target-bbox {options['target_bbox']} overlaps no instance"
        )
    seed_frame = init_labels(instances, best, frame_id=first_id)
    ds = build_dataset(
        seq,
        seed_frame,
        mask_provider,
        edge_provider,
        seed=options["seed"],
        config=seg,
    )
    out = options["out"]
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "dataset.csv"
    export_csv(ds, csv_path)
    manifest.inputs = {
        "frames": str(options["frames"]),
        "masks": str(options["masks"]),
        "edges": str(options.get("edges") or ""),
    }
    manifest.outputs = {"dataset": str(csv_path)}
    manifest.write(out)
    positives = sum(r.label for r in ds.rows)
    print(f"dataset: {len(ds.rows)} rows, {positives} positive, -> {csv_path}")
    return 0


def cmd_train(options: dict) -> int:
    manifest = RunManifest("train", __version__, _now(), options=_jsonable(options))
    ds = load_csv(options["dataset"])
    X, y, frames = ds.matrices()
    keep = rebalance(
        y, Rng(rebalance_seed(options["seed"])), options["keep_fraction"]
    )
    X, y, frames = X[keep], y[keep], frames[keep]
    train_idx, val_idx = time_split(frames, options["train_fraction"])
    model = train(
        X[train_idx],
        y[train_idx],
        ForestConfig(n_trees=options["trees"], seed=options["seed"]),
    )
    out = options["out"]
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / "model.json"
    model.save(model_path)
    print(f"out-of-bag accuracy: {model.oob_score:.4f}")
    if val_idx.size:
        predicted = model.predict(X[val_idx])
        truth = y[val_idx]
        counts = ConfusionCounts(
            tp=int(((predicted == 1) & (truth == 1)).sum()),
            fp=int(((predicted == 1) & (truth == 0)).sum()),
            tn=int(((predicted == 0) & (truth == 0)).sum()),
            fn=int(((predicted == 0) & (truth == 1)).sum()),
        )
        p, r = precision_recall(counts)
        print(
            f"validation ({val_idx.size} rows): "
            f"precision {'n/a' if p is None else f'{p:.4f}'} "
            f"recall {'n/a' if r is None else f'{r:.4f}'}"
        )
    else:
        print("validation: no holdout rows")
    manifest.inputs = {"dataset": str(options["dataset"])}
    manifest.outputs = {"model": str(model_path)}
    manifest.write(out)
    print(f"model -> {model_path}")
    return 0


def cmd_track(options: dict) -> int:
    manifest = RunManifest("track", __version__, _now(), options=_jsonable(options))
    seq = load_sequence(options["frames"], stride=options["stride"])
    if options.get("start"):
        seq = seq.slice(options["start"], len(seq))
    model = Forest.load(options["model"])
    out = options["out"]
    out.mkdir(parents=True, exist_ok=True)
    sink = None if options.get("no_overlays") else OverlayDirSink(out / "overlays")
    track_log = run(
        seq,
        model,
        FileMaskProvider(options["masks"]),
        _edge_provider(options),
        seed=options["seed"],
        config=_seg_config(options),
        sink=sink,
    )
    log_path = out / "track.jsonl"
    write_log(track_log, log_path)
    selected = sum(1 for r in track_log if r.selected is not None)
    manifest.inputs = {
        "frames": str(options["frames"]),
        "model": str(options["model"]),
    }
    manifest.outputs = {"log": str(log_path)}
    manifest.write(out)
    print(f"tracked {len(track_log)} frames, target found in {selected}")
    print(f"log -> {log_path}")
    return 0


def cmd_eval(options: dict) -> int:
    manifest = RunManifest("eval", __version__, _now(), options=_jsonable(options))
    records = load_log(options["log"])
    boxes = load_truth_boxes(options["truth"])
    predictions, truth = align_with_target_boxes(
        records, boxes, iou_threshold=options["iou"]
    )
    counts = confusion(predictions, truth)
    out = options["out"]
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "report.csv"
    write_report_csv(counts, csv_path)
    table = format_report_table([(options["name"], counts, options["notes"])])
    (out / "report.txt").write_text(table, encoding="utf-8")
    manifest.inputs = {"log": str(options["log"]), "truth": str(options["truth"])}
    manifest.outputs = {"report": str(csv_path)}
    manifest.write(out)
    print(table, end="")
    return 0


def cmd_serve(options: dict) -> int:
    import uvicorn

    from .review_service import build_app

    app = build_app(
        frames_dir=options["frames"],
        masks_dir=options["masks"],
        edges_dir=options.get("edges"),
        dataset_path=options.get("dataset"),
        state_dir=options["state"],
        stride=options["stride"],
        seed=options["seed"],
        min_area=options["min_area"],
    )
    uvicorn.run(app, host=options["host"], port=options["port"], log_level="info")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "bootstrap": cmd_bootstrap,
    "train": cmd_train,
    "track": cmd_track,
    "eval": cmd_eval,
    "serve": cmd_serve,
}


def _jsonable(options: dict) -> dict:
    out = {}
    for key, value in options.items():
        if key in ("command", "config"):
            continue
        out[key] = str(value) if isinstance(value, Path) else value
    return out


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        options = _resolve(args)
        return _COMMANDS[args.command](options)
    except ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PipelineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception:  # pragma: no cover - defensive
        log.exception("internal error")
        return 4


if __name__ == "__main__":
    sys.exit(main())
