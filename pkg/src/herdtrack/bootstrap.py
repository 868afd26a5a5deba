"""Training-set bootstrapping: from one hand-labelled seed frame, labels
are carried forward frame by frame with a nearest-neighbour rule and each
instance becomes one feature row.

The target keeps label 1, every other instance is a distractor (label 0).
A later manual pass can flag mislabelled rows; flagged rows stay in the
dataset object but are excluded from the training export.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    ArgumentError,
    ContractError,
    FlagError,
    PipelineError,
    PropagationError,
    SelectionError,
)
from .features import FEATURE_ORDER, FeatureVector, frame_features
from .imaging import FrameSequence
from .segmentation import SegmentationConfig, segment_frame

log = logging.getLogger(__name__)

CSV_HEADER = (
    "frame_id,instance_id,i_mean,i_max,i_q1,i_q2,i_q3,bbox_w,bbox_h,dx,dy,label"
)


@dataclass(frozen=True)
class LabelledFrame:
    """Instances of one frame with aligned binary labels (1 = target)."""

    frame_id: int
    instances: tuple
    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))
        if len(self.labels) != len(self.instances):
            raise ArgumentError("labels and instances must align")
        if any(v not in (0, 1) for v in self.labels):
            raise ArgumentError("labels must be 0 or 1")
        if sum(self.labels) > 1:
            raise ArgumentError("at most one target per frame")

    def target_index(self):
        return self.labels.index(1) if 1 in self.labels else None


@dataclass(frozen=True)
class DatasetRow:
    frame_id: int
    instance_id: int
    features: FeatureVector
    label: int
    flagged: bool = False
    identity: str = ""  # bookkeeping tag only, never used in learning


@dataclass(frozen=True)
class TrainingDataset:
    """Feature rows ordered by (frame_id, instance_id)."""

    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        order = [(r.frame_id, r.instance_id) for r in self.rows]
        if order != sorted(order):
            raise ArgumentError("rows must be ordered by (frame_id, instance_id)")

    def active_rows(self):
        return [r for r in self.rows if not r.flagged]

    def matrices(self):
        """(X, y, frame_ids) over unflagged rows, ready for training."""
        active = self.active_rows()
        X = np.array([r.features.as_array() for r in active], dtype=np.float64)
        y = np.array([r.label for r in active], dtype=np.int64)
        frames = np.array([r.frame_id for r in active], dtype=np.int64)
        return X.reshape(len(active), len(FEATURE_ORDER)), y, frames


def _bbox_center(inst):
    x0, y0, x1, y1 = inst.bbox
    return ((x0 + x1) / 2.0, (y0 + y1) / 2.0)


def init_labels(instances, target: int, frame_id: int = 0) -> LabelledFrame:
    """Label the chosen instance 1 and everything else 0."""
    instances = list(instances)
    if not 0 <= target < len(instances):
        raise SelectionError(
            f"target index {target} out of range for {len(instances)} instances"
        )
    labels = [1 if i == target else 0 for i in range(len(instances))]
    return LabelledFrame(frame_id, tuple(instances), tuple(labels))


def propagate(prev: LabelledFrame, current, frame_id=None) -> LabelledFrame:
    """Carry labels one frame forward by nearest previous instance.

    Distances are Euclidean between bbox centers.  Each current instance
    inherits the label of its nearest previous instance (ties to the lower
    previous index).  If several instances inherit the target label, only
    the closest claimant keeps it (ties to the lower current index).
    """
    if not prev.instances:
        raise PropagationError(
            f"frame {prev.frame_id} has no instances to propagate from"
        )
    current = list(current)
    if frame_id is None:
        frame_id = prev.frame_id + 1
    prev_centers = [_bbox_center(p) for p in prev.instances]
    labels = []
    claims = []  # (distance, current index) of instances inheriting label 1
    for i, inst in enumerate(current):
        cx, cy = _bbox_center(inst)
        best_j = 0
        best_d = math.inf
        for j, (px, py) in enumerate(prev_centers):
            d = math.hypot(cx - px, cy - py)
            if d < best_d:
                best_d = d
                best_j = j
        label = prev.labels[best_j]
        labels.append(label)
        if label == 1:
            claims.append((best_d, i))
    if len(claims) > 1:
        keeper = min(claims)[1]
        for _, i in claims:
            if i != keeper:
                labels[i] = 0
    return LabelledFrame(frame_id, tuple(current), tuple(labels))


def build_dataset(
    seq: FrameSequence,
    seed_frame: LabelledFrame,
    mask_provider,
    edge_provider,
    *,
    seed: int = 0,
    config: SegmentationConfig = SegmentationConfig(),
) -> TrainingDataset:
    """Segment every frame, propagate labels, and emit feature rows.

    The displacement features are taken relative to the most recent frame
    that still had a target instance.  Frames whose segmentation fails or
    returns nothing are skipped with a warning; propagation then continues
    from the last labelled frame.
    """
    if len(seq) == 0:
        raise ArgumentError("empty sequence")
    if seed_frame.frame_id != seq.frame_ids[0]:
        raise ArgumentError(
            f"seed frame id {seed_frame.frame_id} is not the first frame "
            f"{seq.frame_ids[0]}"
        )
    rows = []
    prev_labelled = None
    prev_target_centroid = None
    for fid, frame in seq:
        if fid == seed_frame.frame_id:
            labelled = seed_frame
        else:
            try:
                mask = mask_provider.mask(fid)
                instances = segment_frame(frame, mask, edge_provider, fid, config)
            except PipelineError as exc:
                log.warning("frame %d skipped: %s", fid, exc)
                continue
            if not instances:
                log.warning("frame %d skipped: no instances", fid)
                continue
            try:
                labelled = propagate(prev_labelled, instances, fid)
            except PropagationError as exc:
                raise PropagationError(f"frame {fid}: {exc}") from exc
        feats = frame_features(
            frame, labelled.instances, seed, fid, prev_target_centroid
        )
        for idx, (lab, fv) in enumerate(zip(labelled.labels, feats)):
            rows.append(DatasetRow(fid, idx, fv, lab))
        prev_labelled = labelled
        target = labelled.target_index()
        if target is not None:
            prev_target_centroid = labelled.instances[target].centroid
    return TrainingDataset(tuple(rows))


def cleanse(ds: TrainingDataset, flags) -> TrainingDataset:
    """Mark rows as flagged so exports drop them.  Idempotent.

    `flags` is a set of (frame_id, instance_id).  References to rows that
    do not exist raise a flag error listing every offender.
    """
    flags = set(flags)
    known = {(r.frame_id, r.instance_id) for r in ds.rows}
    unknown = sorted(flags - known)
    if unknown:
        raise FlagError(f"flags reference unknown rows: {unknown}")
    rows = [
        replace(r, flagged=True)
        if (r.frame_id, r.instance_id) in flags
        else r
        for r in ds.rows
    ]
    return TrainingDataset(tuple(rows))


def _fmt(value: float) -> str:
    """Six significant digits, plain decimal notation, '.' separator."""
    text = f"{value:.6g}"
    if "e" in text or "E" in text:
        text = f"{value:f}"
    return text


def render_csv(ds: TrainingDataset) -> str:
    """Unflagged rows as CSV text (LF endings, 6 significant digits)."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for row in ds.active_rows():
        vec = row.features
        fields = [str(row.frame_id), str(row.instance_id)]
        fields += [_fmt(getattr(vec, name)) for name in FEATURE_ORDER]
        fields.append(str(row.label))
        buf.write(",".join(fields) + "\n")
    return buf.getvalue()


def export_csv(ds: TrainingDataset, path) -> None:
    """Write unflagged rows as CSV (UTF-8, LF endings)."""
    Path(path).write_text(render_csv(ds), encoding="utf-8", newline="\n")


def load_csv(path) -> TrainingDataset:
    """Read a dataset export back; the header is a compatibility contract."""
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ContractError(f"{path} is empty") from None
    if header != CSV_HEADER.split(","):
        raise ContractError(
            f"{path} header {header!r} does not match the dataset contract"
        )
    rows = []
    for lineno, record in enumerate(reader, start=2):
        if not record:
            continue
        if len(record) != len(header):
            raise ContractError(f"{path}:{lineno}: expected {len(header)} fields")
        try:
            frame_id, instance_id = int(record[0]), int(record[1])
            values = [float(v) for v in record[2:11]]
            label = int(record[11])
        except ValueError as exc:
            raise ContractError(f"{path}:{lineno}: {exc}") from None
        if label not in (0, 1):
            raise ContractError(f"{path}:{lineno}: label must be 0 or 1")
        rows.append(
            DatasetRow(
                frame_id,
                instance_id,
                FeatureVector.from_array(np.array(values)),
                label,
            )
        )
    return TrainingDataset(tuple(rows))
