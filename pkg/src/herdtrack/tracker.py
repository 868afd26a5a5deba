"""Test-phase tracking loop: segment each frame, classify instances with
the trained forest, select the target, and carry its centroid forward.

When no instance is classified positive the tracker coasts: the reference
centroid stays at the last confirmed observation, so the displacement
feature keeps pointing at where the target was last seen.
"""

import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ArgumentError, ContractError, PipelineError
from .features import frame_features
from .forest import Forest
from .imaging import FrameSequence, GrayImage, render_overlay
from .segmentation import SegmentationConfig, segment_frame

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrackState:
    """Reference point for displacement features; centroid and frame move
    together (both set after the first confirmed target, both None before)."""

    model: Forest
    last_target_centroid: tuple = None
    last_seen_frame: int = None

    def __post_init__(self):
        if (self.last_target_centroid is None) != (self.last_seen_frame is None):
            raise ArgumentError(
                "last_target_centroid and last_seen_frame must be set together"
            )


@dataclass(frozen=True)
class TrackResult:
    frame_id: int
    instances: tuple
    labels: tuple
    votes: tuple
    selected: int = None  # index into instances, label 1 when set

    def extra_positives(self):
        """Positive-classified instances that lost the selection."""
        return [
            i
            for i, lab in enumerate(self.labels)
            if lab == 1 and i != self.selected
        ]


@dataclass(frozen=True)
class TrackLog:
    results: tuple

    def __iter__(self):
        return iter(self.results)

    def __len__(self):
        return len(self.results)


def _leaf_labels(tree: dict, out: set) -> None:
    if "label" in tree:
        out.add(tree["label"])
    else:
        _leaf_labels(tree["l"], out)
        _leaf_labels(tree["r"], out)


def check_model(model: Forest) -> None:
    """Reject degenerate models that can only ever emit one class."""
    labels = set()
    for tree in model.trees:
        _leaf_labels(tree, labels)
    if len(labels) < 2:
        raise ContractError(
            f"model can only predict class {labels.pop()}; refusing to track"
        )


def track_frame(
    state: TrackState,
    frame: GrayImage,
    frame_id: int,
    mask_provider,
    edge_provider,
    *,
    seed: int = 0,
    config: SegmentationConfig = SegmentationConfig(),
):
    """Process one frame; returns (TrackResult, new TrackState).

    The selected target is the positive instance with the highest vote
    fraction; ties go to the instance closer to the last target centroid,
    then to the lower index.  A segmentation failure yields an empty
    result and leaves the state untouched.
    """
    try:
        mask = mask_provider.mask(frame_id)
        instances = segment_frame(frame, mask, edge_provider, frame_id, config)
    except PipelineError as exc:
        log.warning("frame %d skipped: %s", frame_id, exc)
        return TrackResult(frame_id, (), (), ()), state
    if not instances:
        return TrackResult(frame_id, (), (), ()), state
    feats = frame_features(
        frame, instances, seed, frame_id, state.last_target_centroid
    )
    X = np.array([f.as_array() for f in feats], dtype=np.float64)
    votes = state.model.votes(X)
    labels = (votes > 0.5).astype(np.int64)
    selected = None
    best_key = None
    for i, (lab, vote) in enumerate(zip(labels, votes)):
        if lab != 1:
            continue
        if state.last_target_centroid is None:
            dist = 0.0
        else:
            cx, cy = instances[i].centroid
            px, py = state.last_target_centroid
            dist = math.hypot(cx - px, cy - py)
        key = (-vote, dist, i)
        if best_key is None or key < best_key:
            best_key = key
            selected = i
    result = TrackResult(
        frame_id,
        tuple(instances),
        tuple(int(v) for v in labels),
        tuple(float(v) for v in votes),
        selected,
    )
    if selected is None:
        return result, state
    new_state = replace(
        state,
        last_target_centroid=instances[selected].centroid,
        last_seen_frame=frame_id,
    )
    return result, new_state


def run(
    seq: FrameSequence,
    model: Forest,
    mask_provider,
    edge_provider,
    *,
    seed: int = 0,
    config: SegmentationConfig = SegmentationConfig(),
    sink=None,
) -> TrackLog:
    """Track over a whole sequence; per-frame failures are logged, not fatal.

    `sink`, when given, is called as sink(frame, result) after each frame
    (used to render overlay images).
    """
    check_model(model)
    state = TrackState(model=model)
    results = []
    for fid, frame in seq:
        result, state = track_frame(
            state, frame, fid, mask_provider, edge_provider, seed=seed,
            config=config,
        )
        results.append(result)
        if sink is not None:
            sink(frame, result)
    return TrackLog(tuple(results))


class OverlayDirSink:
    """Writes `<frame_id>.overlay.png` per frame into a directory."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def __call__(self, frame: GrayImage, result: TrackResult) -> None:
        image = render_overlay(
            frame,
            result.instances,
            labels=result.labels,
            votes=result.votes,
            selected=result.selected,
        )
        image.save(self.directory / f"{result.frame_id:06d}.overlay.png")


def write_log(track_log: TrackLog, path) -> None:
    """JSON-lines export, one record per frame."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for result in track_log:
            record = {
                "frame": result.frame_id,
                "instances": [
                    {
                        "bbox": list(inst.bbox),
                        "centroid": list(inst.centroid),
                        "label": lab,
                        "vote": vote,
                    }
                    for inst, lab, vote in zip(
                        result.instances, result.labels, result.votes
                    )
                ],
                "selected": result.selected,
            }
            fh.write(json.dumps(record) + "\n")


def load_log(path) -> list:
    """Parsed track-log records (plain dicts, geometry as lists)."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
