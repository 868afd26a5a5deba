"""Per-instance feature vectors for the appearance classifier.

Nine components: five intensity statistics (mean, max, quartiles of 100
random 5x5 patch means around the instance centroid), bounding-box width
and height, and the centroid offset (dx, dy) from the previous frame's
selected target.

Every intensity statistic is quantized to a multiple of 2**-20.  When the
patch means are exact multiples of 1/patch_area (always true for means of
integer pixels) the statistics are carried in exact integer arithmetic up
to that final quantization, which makes constant intensity shifts commute
with the computation bitwise: adding c to every pixel adds exactly c to
each statistic, because the scaled offset is an even integer that changes
neither the rounding remainder nor the quotient parity.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, GeometryError
from .imaging import GrayImage
from .rng import ROLE_FEATURES, Rng, derive_seed

FEATURE_ORDER = (
    "i_mean",
    "i_max",
    "i_q1",
    "i_q2",
    "i_q3",
    "bbox_w",
    "bbox_h",
    "dx",
    "dy",
)

PATCH_COUNT = 100
PATCH_SIZE = 5
CENTER_STD = math.sqrt(5.0)  # per-axis variance of 5 px^2

_GRID_BITS = 20
_GRID = 1 << _GRID_BITS


@dataclass(frozen=True)
class FeatureVector:
    i_mean: float
    i_max: float
    i_q1: float
    i_q2: float
    i_q3: float
    bbox_w: float
    bbox_h: float
    dx: float
    dy: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [getattr(self, name) for name in FEATURE_ORDER], dtype=np.float64
        )

    @classmethod
    def from_array(cls, arr) -> "FeatureVector":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != (len(FEATURE_ORDER),):
            raise ArgumentError(
                f"feature array must have {len(FEATURE_ORDER)} components"
            )
        return cls(**{name: float(v) for name, v in zip(FEATURE_ORDER, arr)})


def _grid_round(numerator: int, denominator: int) -> float:
    """Round numerator/denominator half-to-even onto the 2**-20 grid."""
    scaled = numerator << _GRID_BITS
    q, r = divmod(scaled, denominator)
    twice = 2 * r
    if twice > denominator or (twice == denominator and q & 1):
        q += 1
    return q / float(_GRID)


def _grid_snap(x: float) -> float:
    """Nearest 2**-20 grid point of an already-float statistic."""
    return round(x * _GRID) / float(_GRID)


def sample_patch_sums(
    frame: GrayImage,
    center,
    rng: Rng,
    count: int = PATCH_COUNT,
    size: int = PATCH_SIZE,
) -> np.ndarray:
    """Integer pixel sums of `count` square patches near `center`.

    Patch centers are drawn per axis from a normal around the center
    (std = sqrt(5) px), rounded half-up to integer pixels, and clamped so
    the whole patch stays inside the frame.  The x offset of each patch is
    drawn before its y offset.
    """
    if size % 2 != 1 or size < 1:
        raise ArgumentError("patch size must be odd and positive")
    h, w = frame.data.shape
    if w < size or h < size:
        raise GeometryError(f"frame {w}x{h} cannot host {size}x{size} patches")
    half = size // 2
    cx, cy = float(center[0]), float(center[1])
    data = frame.data
    sums = np.empty(count, dtype=np.int64)
    for i in range(count):
        zx = rng.normal()
        zy = rng.normal()
        px = int(math.floor(cx + CENTER_STD * zx + 0.5))
        py = int(math.floor(cy + CENTER_STD * zy + 0.5))
        px = min(max(px, half), w - 1 - half)
        py = min(max(py, half), h - 1 - half)
        sums[i] = int(
            data[py - half : py + half + 1, px - half : px + half + 1].sum(
                dtype=np.int64
            )
        )
    return sums


def sample_patch_means(
    frame: GrayImage,
    inst,
    seed: int,
    count: int = PATCH_COUNT,
    size: int = PATCH_SIZE,
) -> np.ndarray:
    """The `count` patch means around the instance centroid, seeded."""
    sums = sample_patch_sums(frame, inst.centroid, Rng(seed), count, size)
    return sums / float(size * size)


def intensity_stats(patch_means, patch_area: int = PATCH_SIZE * PATCH_SIZE) -> tuple:
    """(mean, max, q1, q2, q3) of the patch-mean distribution.

    Quartiles interpolate linearly between order statistics at positions
    q * (n - 1).  Inputs that are exact multiples of 1/patch_area take the
    exact integer route; anything else is computed in floats.  Both routes
    end on the 2**-20 grid.
    """
    arr = np.asarray(patch_means, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ArgumentError("patch means must be a non-empty 1-D sequence")
    scaled = arr * patch_area
    nearest = np.rint(scaled)
    if np.max(np.abs(scaled - nearest)) < 1e-9:
        sums = np.sort(nearest.astype(np.int64))
        n = sums.size
        mean = _grid_round(int(sums.sum()), n * patch_area)
        peak = _grid_round(int(sums[-1]), patch_area)
        quartiles = []
        for k in (1, 2, 3):
            lo, frac4 = divmod((n - 1) * k, 4)
            if frac4 == 0:
                quartiles.append(_grid_round(int(sums[lo]), patch_area))
            else:
                num = (4 - frac4) * int(sums[lo]) + frac4 * int(sums[lo + 1])
                quartiles.append(_grid_round(num, 4 * patch_area))
        return (mean, peak, quartiles[0], quartiles[1], quartiles[2])
    q1, q2, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
    return (
        _grid_snap(float(arr.mean())),
        _grid_snap(float(arr.max())),
        _grid_snap(float(q1)),
        _grid_snap(float(q2)),
        _grid_snap(float(q3)),
    )


def instance_seed(seed: int, frame_id: int, instance_index: int) -> int:
    """Stream seed for one instance's patch sampling (stable across runs)."""
    return derive_seed(seed, ROLE_FEATURES, frame_id, instance_index)


def feature_vector(
    frame: GrayImage,
    inst,
    prev_target_centroid,
    seed: int,
) -> FeatureVector:
    """Assemble the 9-component vector for one instance.

    dx, dy are the instance centroid minus the previous target centroid;
    both are zero when no previous target is known (start of a sequence).
    """
    means = sample_patch_means(frame, inst, seed)
    stats = intensity_stats(means)
    x0, y0, x1, y1 = inst.bbox
    if prev_target_centroid is None:
        dx = dy = 0.0
    else:
        dx = inst.centroid[0] - prev_target_centroid[0]
        dy = inst.centroid[1] - prev_target_centroid[1]
    return FeatureVector(
        i_mean=stats[0],
        i_max=stats[1],
        i_q1=stats[2],
        i_q2=stats[3],
        i_q3=stats[4],
        bbox_w=float(x1 - x0 + 1),
        bbox_h=float(y1 - y0 + 1),
        dx=dx,
        dy=dy,
    )


def frame_features(
    frame: GrayImage,
    instances,
    seed: int,
    frame_id: int,
    prev_target_centroid=None,
) -> list:
    """Feature vectors for every instance of a frame, seeded per instance."""
    return [
        feature_vector(
            frame,
            inst,
            prev_target_centroid,
            instance_seed(seed, frame_id, idx),
        )
        for idx, inst in enumerate(instances)
    ]
