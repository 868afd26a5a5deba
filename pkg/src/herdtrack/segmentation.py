"""Instance segmentation: blobs from a semantic mask, edge maps, threshold
splitting, connected components, convex hulls and bounding boxes.

The flow per frame: connected mask blobs above an area floor are cropped
(with padding), an edge map is obtained for each crop, the edges are
binarized at an automatically chosen threshold, and the enclosed non-edge
regions become object instances.  All coordinates are (x, y) with y running
down the image; rectangles are inclusive (x_min, y_min, x_max, y_max).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ArgumentError,
    DegenerateInputError,
    FrameFormatError,
    GeometryError,
)
from .imaging import GrayImage


@dataclass(frozen=True)
class SemanticMask:
    """Per-pixel class map: 0 background, 1 target class."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.dtype != np.uint8:
            raise FrameFormatError("mask needs a 2-D uint8 array")
        if self.data.max(initial=0) > 1:
            raise FrameFormatError("mask class ids must be 0 or 1")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_raster(cls, arr: np.ndarray) -> "SemanticMask":
        """Any nonzero pixel counts as the target class."""
        return cls((np.asarray(arr) != 0).astype(np.uint8))


@dataclass(frozen=True)
class EdgeMap:
    """Edge strength per pixel in [0, 1]; higher means stronger edge."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2:
            raise FrameFormatError("edge map needs a 2-D array")
        if not np.isfinite(self.data).all():
            raise FrameFormatError("edge map values must be finite")
        if self.data.size and (self.data.min() < 0.0 or self.data.max() > 1.0):
            raise FrameFormatError("edge strengths must lie in [0, 1]")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class Blob:
    """Connected mask region above the blob area floor."""

    pixel_count: int
    bbox: tuple


@dataclass(frozen=True)
class Instance:
    """One isolated object: pixel set plus derived geometry (frame coords)."""

    pixels: np.ndarray  # (n, 2) int32 columns [x, y], row-major order
    area: int
    centroid: tuple
    hull: tuple  # counter-clockwise vertices, strictly convex
    bbox: tuple
    low_confidence: bool = False


@dataclass(frozen=True)
class SegmentationConfig:
    min_blob_area: int = 800
    min_instance_area: int = 800
    crop_pad: int = 5


# ---------------------------------------------------------------------------
# connected components (run-based union-find; fast on full frames)


def _row_runs(binary: np.ndarray):
    """Horizontal runs of True pixels: arrays (y, x_start, x_end_inclusive)."""
    h, w = binary.shape
    padded = np.zeros((h, w + 2), dtype=np.int8)
    padded[:, 1:-1] = binary
    deltas = np.diff(padded, axis=1)
    ys, starts = np.nonzero(deltas == 1)
    _, ends = np.nonzero(deltas == -1)
    return ys, starts, ends - 1


@dataclass
class Component:
    """Connected pixel region stored as horizontal runs."""

    runs: np.ndarray  # (k, 3) int64 rows (y, x0, x1), x1 inclusive
    area: int
    bbox: tuple

    def pixel_array(self) -> np.ndarray:
        """Materialize pixels as an (n, 2) int32 array of [x, y]."""
        y, x0, x1 = self.runs[:, 0], self.runs[:, 1], self.runs[:, 2]
        lengths = x1 - x0 + 1
        ends = np.cumsum(lengths)
        offsets = np.arange(ends[-1]) - np.repeat(ends - lengths, lengths)
        xs = np.repeat(x0, lengths) + offsets
        ys = np.repeat(y, lengths)
        return np.column_stack([xs, ys]).astype(np.int32)

    def centroid(self) -> tuple:
        y, x0, x1 = self.runs[:, 0], self.runs[:, 1], self.runs[:, 2]
        lengths = x1 - x0 + 1
        sum_x = int(((x0 + x1) * lengths).sum()) / 2.0
        sum_y = int((y * lengths).sum())
        return (sum_x / self.area, sum_y / self.area)

    def row_extremes(self) -> list:
        """Leftmost/rightmost pixel per row; a superset of hull vertices."""
        y, x0, x1 = self.runs[:, 0], self.runs[:, 1], self.runs[:, 2]
        rows, first = np.unique(y, return_index=True)
        min_x = np.minimum.reduceat(x0, first)
        max_x = np.maximum.reduceat(x1, first)
        pts = set()
        for ry, lo, hi in zip(rows, min_x, max_x):
            pts.add((int(lo), int(ry)))
            pts.add((int(hi), int(ry)))
        return sorted(pts)

    def touches_border(self, width: int, height: int) -> bool:
        x0, y0, x1, y1 = self.bbox
        return x0 == 0 or y0 == 0 or x1 == width - 1 or y1 == height - 1


def connected_components(
    binary: np.ndarray, connectivity: int = 8, min_area: int = 1
) -> list:
    """Connected components of a boolean raster, ordered by (y_min, x_min).

    Components smaller than min_area pixels are dropped before any per
    component state is materialized, which keeps noise rasters with many
    speckle components cheap.
    """
    if connectivity not in (4, 8):
        raise ArgumentError(f"connectivity must be 4 or 8, got {connectivity}")
    binary = np.asarray(binary, dtype=bool)
    if binary.ndim != 2:
        raise ArgumentError("connected_components needs a 2-D raster")
    ys, x0s, x1s = _row_runs(binary)
    n = len(ys)
    if n == 0:
        return []
    reach = 1 if connectivity == 8 else 0
    # Runs arrive sorted by (y, x0); within a row both endpoints ascend, so
    # row * span + x is a globally sorted key (span > width keeps rows apart).
    span = binary.shape[1] + 2
    base = ys.astype(np.int64) * span
    prev = base - span
    lo = np.searchsorted(base + x1s, prev + x0s - reach, side="left")
    hi = np.searchsorted(base + x0s, prev + x1s + reach, side="right")
    counts = hi - lo
    parent = list(range(n))
    total = int(counts.sum())
    if total:
        cum = np.cumsum(counts)
        offsets = np.arange(total) - np.repeat(cum - counts, counts)
        below = np.repeat(lo, counts) + offsets
        above = np.repeat(np.arange(n), counts)
        for a, b in zip(below.tolist(), above.tolist()):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            while parent[b] != b:
                parent[b] = parent[parent[b]]
                b = parent[b]
            if a != b:
                if a < b:
                    parent[b] = a
                else:
                    parent[a] = b
    roots = np.array(parent)
    while True:
        grand = roots[roots]
        if np.array_equal(grand, roots):
            break
        roots = grand
    order = np.argsort(roots, kind="stable")
    ys_s, x0_s, x1_s = ys[order], x0s[order], x1s[order]
    starts = np.flatnonzero(np.r_[True, np.diff(roots[order]) != 0])
    ends = np.r_[starts[1:], n]
    areas = np.add.reduceat(x1_s - x0_s + 1, starts)
    keep = np.flatnonzero(areas >= min_area)
    comps = []
    for g in keep.tolist():
        s, e = starts[g], ends[g]
        runs = np.column_stack([ys_s[s:e], x0_s[s:e], x1_s[s:e]]).astype(np.int64)
        bbox = (
            int(x0_s[s:e].min()),
            int(ys_s[s]),
            int(x1_s[s:e].max()),
            int(ys_s[e - 1]),
        )
        comps.append(Component(runs=runs, area=int(areas[g]), bbox=bbox))
    comps.sort(key=lambda c: (c.bbox[1], c.bbox[0]))
    return comps


# ---------------------------------------------------------------------------
# blob extraction


def extract_blobs(mask: SemanticMask, min_blob_area: int = 800) -> list:
    """Mask components of the target class with at least min_blob_area pixels."""
    comps = connected_components(mask.data == 1, connectivity=8, min_area=min_blob_area)
    return [Blob(pixel_count=c.area, bbox=c.bbox) for c in comps]


# ---------------------------------------------------------------------------
# edge maps


def gradient_edge_map(crop: GrayImage) -> EdgeMap:
    """Classical fallback: normalized central-difference gradient magnitude.

    Borders are replicated before differencing; the magnitude raster is
    scaled to [0, 1] by its own maximum (a constant crop maps to all zeros).
    """
    arr = crop.data.astype(np.float64)
    padded = np.pad(arr, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak > 0.0:
        mag /= peak
    return EdgeMap(mag)


def edge_map(crop: GrayImage, provider, *, frame_id=None, blob_index=None,
             origin=(0, 0)) -> EdgeMap:
    """Obtain the edge map for one blob crop from the given provider."""
    edges = provider.edges(
        crop, frame_id=frame_id, blob_index=blob_index, origin=origin
    )
    if edges.data.shape != crop.data.shape:
        raise ArgumentError(
            f"edge map shape {edges.data.shape} does not match crop "
            f"{crop.data.shape}"
        )
    return edges


# ---------------------------------------------------------------------------
# threshold selection


def isodata_threshold(values, *, histogram=None) -> float:
    """Two-class threshold by iterating the midpoint of the class means.

    `values` is either a raster/array of intensities in [0, 255] or a
    256-bin histogram of counts (auto-detected for 1-D integer arrays of
    length 256, or forced with `histogram=`).  Starting from the global
    mean, the threshold is replaced by the midpoint of the two class means
    it induces until it moves less than 0.5 intensity levels (at most 100
    rounds).
    """
    arr = np.asarray(values)
    if histogram is None:
        histogram = (
            arr.ndim == 1
            and arr.shape[0] == 256
            and np.issubdtype(arr.dtype, np.integer)
        )
    if histogram:
        hist = np.asarray(arr, dtype=np.int64)
        if hist.shape != (256,) or (hist < 0).any():
            raise ArgumentError("histogram must be 256 non-negative counts")
    else:
        flat = np.floor(arr.astype(np.float64).ravel() + 0.5)
        if flat.size == 0:
            raise DegenerateInputError("no values to threshold")
        if flat.min() < 0 or flat.max() > 255:
            raise ArgumentError("values must lie in [0, 255]")
        hist = np.bincount(flat.astype(np.int64), minlength=256)
    if np.count_nonzero(hist) < 2:
        raise DegenerateInputError(
            "threshold needs at least two distinct values"
        )
    count_cum = np.cumsum(hist)
    value_cum = np.cumsum(hist * np.arange(256, dtype=np.int64))
    total_n = int(count_cum[-1])
    total_v = int(value_cum[-1])
    t = total_v / total_n
    for _ in range(100):
        g = int(math.floor(t))
        n_low = int(count_cum[g])
        v_low = int(value_cum[g])
        n_high = total_n - n_low
        v_high = total_v - v_low
        t_next = (v_low / n_low + v_high / n_high) / 2.0
        if abs(t_next - t) < 0.5:
            return t_next
        t = t_next
    return t


# ---------------------------------------------------------------------------
# convex hull (monotone chain)


def convex_hull(points) -> list:
    """Strictly convex hull vertices in counter-clockwise order.

    Counter-clockwise is meant with x right / y up axes; in image
    coordinates (y down) the same vertex order appears clockwise on screen.
    Raises GeometryError for fewer than 3 distinct points or a collinear set.
    """
    arr = np.asarray(list(points) if not isinstance(points, np.ndarray) else points)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ArgumentError("points must be pairs of coordinates")
    integral = np.issubdtype(arr.dtype, np.integer)
    cast = int if integral else float
    pts = sorted({(cast(p[0]), cast(p[1])) for p in arr})
    if len(pts) < 3:
        raise GeometryError("convex hull needs at least 3 distinct points")

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise GeometryError("points are collinear; no 2-D hull exists")
    return hull


def _instance_from_component(comp: Component, origin, low_confidence=False) -> Instance:
    ox, oy = origin
    pixels = comp.pixel_array()
    if ox or oy:
        pixels = pixels + np.array([ox, oy], dtype=np.int32)
    cx, cy = comp.centroid()
    hull = convex_hull([(x + ox, y + oy) for x, y in comp.row_extremes()])
    x0, y0, x1, y1 = comp.bbox
    return Instance(
        pixels=pixels,
        area=comp.area,
        centroid=(cx + ox, cy + oy),
        hull=tuple(hull),
        bbox=(x0 + ox, y0 + oy, x1 + ox, y1 + oy),
        low_confidence=low_confidence,
    )


# ---------------------------------------------------------------------------
# contour-to-region instance extraction


def segment_instances(
    crop: GrayImage,
    edges: EdgeMap,
    min_instance_area: int = 800,
    origin=(0, 0),
    blob_mask=None,
) -> list:
    """Split one blob crop into isolated object instances.

    Edge strengths are binarized at the automatic threshold; edge pixels
    form contour walls.  Non-edge regions that do not reach the crop border
    (the background seed) and meet the area floor become instances, with
    geometry reported in full-frame coordinates via `origin`.

    A constant edge map cannot be split; in that case the blob itself (or
    the whole crop when no blob mask is given) is returned as a single
    low-confidence instance.
    """
    if edges.data.shape != crop.data.shape:
        raise ArgumentError("crop and edge map dimensions differ")
    h, w = crop.data.shape
    quantized = np.clip(np.floor(edges.data * 255.0 + 0.5), 0, 255)
    if quantized.max() - quantized.min() <= 0:
        if blob_mask is not None:
            comps = connected_components(np.asarray(blob_mask, dtype=bool))
            if not comps:
                return []
            comp = max(comps, key=lambda c: c.area)
        else:
            runs = np.column_stack(
                [np.arange(h), np.zeros(h, dtype=np.int64), np.full(h, w - 1)]
            ).astype(np.int64)
            comp = Component(runs=runs, area=h * w, bbox=(0, 0, w - 1, h - 1))
        if comp.area < min_instance_area:
            return []
        return [_instance_from_component(comp, origin, low_confidence=True)]
    threshold = isodata_threshold(quantized, histogram=False)
    open_space = quantized <= threshold
    comps = connected_components(open_space, connectivity=8, min_area=min_instance_area)
    instances = [
        _instance_from_component(c, origin)
        for c in comps
        if not c.touches_border(w, h)
    ]
    instances.sort(key=lambda i: (i.bbox[1], i.bbox[0]))
    return instances


def pad_bbox(bbox, pad: int, width: int, height: int) -> tuple:
    """Grow an inclusive bbox by pad on each side, clamped to the frame."""
    x0, y0, x1, y1 = bbox
    return (
        max(0, x0 - pad),
        max(0, y0 - pad),
        min(width - 1, x1 + pad),
        min(height - 1, y1 + pad),
    )


def segment_frame(
    frame: GrayImage,
    mask: SemanticMask,
    edge_provider,
    frame_id: int,
    config: SegmentationConfig = SegmentationConfig(),
) -> list:
    """Full per-frame segmentation: blobs, per-blob edges, instances.

    Blob crops are padded by config.crop_pad pixels (clamped to the frame)
    so boundary contours close before thresholding.  Instances are returned
    in (y_min, x_min) order; duplicates that arise when padded crops of
    nearby blobs overlap are dropped.
    """
    if (mask.height, mask.width) != (frame.height, frame.width):
        raise ArgumentError("mask dimensions do not match the frame")
    instances = []
    seen = set()
    for blob_index, blob in enumerate(extract_blobs(mask, config.min_blob_area)):
        x0, y0, x1, y1 = pad_bbox(
            blob.bbox, config.crop_pad, frame.width, frame.height
        )
        crop = frame.crop(x0, y0, x1, y1)
        edges = edge_map(
            crop,
            edge_provider,
            frame_id=frame_id,
            blob_index=blob_index,
            origin=(x0, y0),
        )
        blob_mask = mask.data[y0 : y1 + 1, x0 : x1 + 1] == 1
        for inst in segment_instances(
            crop,
            edges,
            config.min_instance_area,
            origin=(x0, y0),
            blob_mask=blob_mask,
        ):
            key = (inst.bbox, inst.area)
            if key not in seen:
                seen.add(key)
                instances.append(inst)
    instances.sort(key=lambda i: (i.bbox[1], i.bbox[0]))
    return instances
