"""Instance-level scoring: confusion counts and precision/recall.

Ground truth is a per-instance verdict (was this segmented instance the
tracked target?) plus, per frame, an optional "target present but never
segmented" marker.  That marker enters the truth mapping under the
sentinel instance id -1; since no prediction carries that id, every such
frame scores as a missed detection (FN).  With the target visible in all
frames, tp + fn then equals the frame count.
"""

import io
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import AlignmentError, ArgumentError

MISSED_INSTANCE = -1
DEFAULT_IOU = 0.3


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ArgumentError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(predictions: dict, truth: dict) -> ConfusionCounts:
    """Count tp/fp/tn/fn over aligned per-instance labels.

    Both arguments map (frame_id, instance_id) to 0/1.  Truth keys missing
    from predictions count as predicted 0 (unsegmented: FN when the truth
    says target, TN otherwise).  Prediction keys unknown to the truth are
    an alignment error listing the offenders.
    """
    offenders = sorted(set(predictions) - set(truth))
    if offenders:
        raise AlignmentError(
            f"predictions reference instances missing from truth: "
            f"{offenders[:10]}{'...' if len(offenders) > 10 else ''}"
        )
    tp = fp = tn = fn = 0
    for key, truth_label in truth.items():
        predicted = predictions.get(key, 0)
        if truth_label == 1:
            if predicted == 1:
                tp += 1
            else:
                fn += 1
        else:
            if predicted == 1:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def precision_recall(c: ConfusionCounts):
    """(precision, recall); a component is None when its denominator is 0."""
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp > 0 else None
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn > 0 else None
    return precision, recall


def bbox_iou(a, b) -> float:
    """Intersection over union of two inclusive (x0, y0, x1, y1) boxes."""
    ix0 = max(a[0], b[0])
    iy0 = max(a[1], b[1])
    ix1 = min(a[2], b[2])
    iy1 = min(a[3], b[3])
    iw = max(0, ix1 - ix0 + 1)
    ih = max(0, iy1 - iy0 + 1)
    inter = iw * ih
    if inter == 0:
        return 0.0
    area_a = (a[2] - a[0] + 1) * (a[3] - a[1] + 1)
    area_b = (b[2] - b[0] + 1) * (b[3] - b[1] + 1)
    return inter / float(area_a + area_b - inter)


def align_with_target_boxes(
    records: list, target_boxes: dict, iou_threshold: float = DEFAULT_IOU
):
    """(predictions, truth) mappings from a track log and known target boxes.

    `records` are parsed track-log dicts; `target_boxes` maps frame_id to
    the true target bbox, or None for frames where the target is absent.
    Per frame, the logged instance with the highest IoU against the true
    box (at least `iou_threshold`) is the truth-positive; every other
    instance is truth-negative.  A visible target matched by no instance
    becomes a missed-detection sentinel row.
    """
    predictions = {}
    truth = {}
    for record in records:
        fid = record["frame"]
        instances = record["instances"]
        for idx, inst in enumerate(instances):
            predictions[(fid, idx)] = int(inst["label"])
            truth[(fid, idx)] = 0
        target = target_boxes.get(fid)
        if target is None:
            continue
        best_idx = None
        best_iou = 0.0
        for idx, inst in enumerate(instances):
            iou = bbox_iou(inst["bbox"], target)
            if iou > best_iou:
                best_iou = iou
                best_idx = idx
        if best_idx is not None and best_iou >= iou_threshold:
            truth[(fid, best_idx)] = 1
        else:
            truth[(fid, MISSED_INSTANCE)] = 1
    return predictions, truth


def align_with_verdicts(records: list, verdicts: list):
    """(predictions, truth) from a track log and human review verdicts.

    Verdicts are dicts {frame, instance, verdict} with verdict one of
    "target", "not_target", "missed".  Instances without a verdict default
    to truth 0; "missed" records a frame whose target was never segmented
    (its instance field is ignored and the sentinel id is used).
    """
    predictions = {}
    truth = {}
    for record in records:
        fid = record["frame"]
        for idx, inst in enumerate(record["instances"]):
            predictions[(fid, idx)] = int(inst["label"])
            truth[(fid, idx)] = 0
    for mark in verdicts:
        verdict = mark["verdict"]
        fid = mark["frame"]
        if verdict == "missed":
            truth[(fid, MISSED_INSTANCE)] = 1
        elif verdict == "target":
            key = (fid, mark["instance"])
            if key not in truth:
                raise AlignmentError(f"verdict references unknown instance {key}")
            truth[key] = 1
        elif verdict == "not_target":
            key = (fid, mark["instance"])
            if key not in truth:
                raise AlignmentError(f"verdict references unknown instance {key}")
            truth[key] = 0
        else:
            raise ArgumentError(f"unknown verdict {verdict!r}")
    return predictions, truth


def _fmt_ratio(value) -> str:
    return "" if value is None else f"{value:.6g}"


def _fmt_pct(value) -> str:
    return "n/a" if value is None else f"{100.0 * value:.1f}%"


def write_report_csv(counts: ConfusionCounts, path) -> None:
    precision, recall = precision_recall(counts)
    buf = io.StringIO()
    buf.write("tp,fp,tn,fn,precision,recall\n")
    buf.write(
        f"{counts.tp},{counts.fp},{counts.tn},{counts.fn},"
        f"{_fmt_ratio(precision)},{_fmt_ratio(recall)}\n"
    )
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def format_report_table(entries) -> str:
    """Human-readable table; entries are (name, ConfusionCounts, notes).

    Percentages are rounded to one decimal; the raw counts stay alongside
    because rounded ratios alone cannot be audited.
    """
    header = ("sequence", "TP", "FP", "TN", "FN", "P", "R", "notes")
    rows = [header]
    for name, counts, notes in entries:
        precision, recall = precision_recall(counts)
        rows.append(
            (
                str(name),
                str(counts.tp),
                str(counts.fp),
                str(counts.tn),
                str(counts.fn),
                _fmt_pct(precision),
                _fmt_pct(recall),
                str(notes),
            )
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for r in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def load_truth_boxes(path) -> dict:
    """Frame -> target bbox (or None) from a ground-truth JSONL file."""
    boxes = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            target = record.get("target")
            boxes[record["frame"]] = None if target is None else tuple(target["bbox"])
    return boxes
