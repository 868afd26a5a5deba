"""Seeded synthetic scenes: textured ellipses moving through a shed-like
frame, with optional low-contrast background, bright skin patches, and
vertical occluder bars.

Besides the rendered frames the generator emits what a perfect upstream
model would produce: the semantic mask (union of visible object pixels),
an edge map that is 1 exactly on visible object boundaries, and per-frame
per-object ground truth.  Boundaries are Moore boundaries (a visible pixel
with any of its 8 neighbours outside the region), so the interior of every
object is sealed against 8-connected region growth.

Texture fields are drawn once per scenario and sampled at absolute pixel
positions; a static scene therefore renders identical frames, and repeated
generation with one seed is bit-identical.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ScenarioError
from .imaging import FrameSequence, GrayImage
from .providers import edge_filename, mask_filename
from .rng import ROLE_SCENE, derive_seed
from .segmentation import SegmentationConfig, SemanticMask, extract_blobs, pad_bbox

BAR_INTENSITY = 70.0
PATCH_BOOST = 60.0


@dataclass(frozen=True)
class OccluderBar:
    """Full-height vertical strip in front of everything."""

    x: int
    width: int


@dataclass(frozen=True)
class ObjectSpec:
    intensity: float
    axes: tuple  # (semi_axis_x, semi_axis_y) in px
    waypoints: tuple  # ((x, y), ...) piecewise-linear path
    speed: float  # px per raw frame
    wobble_amp: float = 0.0  # relative axis modulation
    wobble_period: float = 400.0  # raw frames per cycle
    phase: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    objects: tuple
    n_frames: int
    width: int = 1000
    height: int = 600
    stride: int = 10  # raw frames between emitted frames
    target: int = 0
    bars: tuple = ()
    light_patches: bool = False
    low_contrast: bool = False
    background_intensity: float = 40.0
    noise_amp: float = 8.0
    seed: int = 0


@dataclass(frozen=True)
class ObjectTruth:
    object_id: int
    bbox: tuple  # visible-pixel bbox, None when fully hidden
    centroid: tuple  # visible-pixel centroid, None when fully hidden
    pixel_count: int
    visible_fraction: float


@dataclass(frozen=True)
class FrameTruth:
    frame_id: int
    objects: tuple


@dataclass(frozen=True)
class GroundTruth:
    frames: tuple
    target_id: int

    def target_boxes(self) -> dict:
        """Frame -> visible target bbox or None (evaluation input)."""
        out = {}
        for ft in self.frames:
            obj = ft.objects[self.target_id]
            out[ft.frame_id] = obj.bbox
        return out


def _validate(cfg: ScenarioConfig) -> None:
    if not cfg.objects:
        raise ScenarioError("scenario needs at least one object")
    if not 0 <= cfg.target < len(cfg.objects):
        raise ScenarioError(f"target {cfg.target} out of range")
    if cfg.n_frames < 1 or cfg.stride < 1:
        raise ScenarioError("n_frames and stride must be positive")
    for i, obj in enumerate(cfg.objects):
        ax, ay = obj.axes
        margin = 1.0 + obj.wobble_amp
        if ax < 1 or ay < 1:
            raise ScenarioError(f"object {i}: axes must be at least 1 px")
        if 2 * ax * margin >= cfg.width or 2 * ay * margin >= cfg.height:
            raise ScenarioError(f"object {i} does not fit in the frame")
        if obj.speed < 0:
            raise ScenarioError(f"object {i}: speed must be >= 0")
        if not obj.waypoints:
            raise ScenarioError(f"object {i}: needs at least one waypoint")
        for wx, wy in obj.waypoints:
            if not (
                ax * margin <= wx <= cfg.width - 1 - ax * margin
                and ay * margin <= wy <= cfg.height - 1 - ay * margin
            ):
                raise ScenarioError(
                    f"object {i}: waypoint ({wx},{wy}) leaves the frame"
                )
    for bar in cfg.bars:
        if bar.width < 1:
            raise ScenarioError("bar widths must be >= 1 px")
        if not 0 <= bar.x < cfg.width:
            raise ScenarioError(f"bar at x={bar.x} outside the frame")


def _path_position(obj: ObjectSpec, raw_t: float) -> tuple:
    """Point at arc length speed*t along the waypoint polyline (clamped)."""
    pts = obj.waypoints
    if len(pts) == 1:
        return float(pts[0][0]), float(pts[0][1])
    remaining = obj.speed * raw_t
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        seg = math.hypot(x1 - x0, y1 - y0)
        if remaining <= seg or seg == 0.0:
            f = 0.0 if seg == 0.0 else remaining / seg
            return (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
        remaining -= seg
    return float(pts[-1][0]), float(pts[-1][1])


def _axes_at(obj: ObjectSpec, raw_t: float) -> tuple:
    if obj.wobble_amp == 0.0:
        return float(obj.axes[0]), float(obj.axes[1])
    s = obj.wobble_amp * math.sin(2.0 * math.pi * raw_t / obj.wobble_period + obj.phase)
    return obj.axes[0] * (1.0 + s), obj.axes[1] * (1.0 - s)


def _ellipse_window(cx, cy, ax, ay, width, height):
    """(in-frame bool window, window origin, unclipped pixel count)."""
    x_lo = math.floor(cx - ax) - 1
    x_hi = math.ceil(cx + ax) + 1
    y_lo = math.floor(cy - ay) - 1
    y_hi = math.ceil(cy + ay) + 1
    xs = np.arange(x_lo, x_hi + 1, dtype=np.float64)
    ys = np.arange(y_lo, y_hi + 1, dtype=np.float64)
    nx = (xs - cx) / ax
    ny = (ys - cy) / ay
    inside = (ny[:, None] ** 2 + nx[None, :] ** 2) <= 1.0
    full_count = int(inside.sum())
    cx0 = max(0, x_lo)
    cy0 = max(0, y_lo)
    cx1 = min(width - 1, x_hi)
    cy1 = min(height - 1, y_hi)
    if cx0 > cx1 or cy0 > cy1:
        window = np.zeros((0, 0), dtype=bool)
    else:
        window = inside[cy0 - y_lo : cy1 - y_lo + 1, cx0 - x_lo : cx1 - x_lo + 1]
    return window, (cx0, cy0), full_count


def _moore_boundary(region: np.ndarray) -> np.ndarray:
    """Pixels of region with any 8-neighbour outside it (frame edge counts)."""
    h, w = region.shape
    outside = np.pad(~region, 1, constant_values=True)
    near_outside = np.zeros((h, w), dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            near_outside |= outside[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return region & near_outside


def generate(cfg: ScenarioConfig):
    """Render the scenario.

    Returns (FrameSequence, masks, edges, GroundTruth) where masks maps
    frame id to a {0,1} uint8 raster and edges maps frame id to a {0.0,1.0}
    float raster.
    """
    _validate(cfg)
    h, w = cfg.height, cfg.width
    n_objects = len(cfg.objects)
    bg_rng = np.random.default_rng(derive_seed(cfg.seed, ROLE_SCENE, 0))
    bg_field = bg_rng.uniform(-cfg.noise_amp, cfg.noise_amp, (h, w))
    obj_fields = [
        np.random.default_rng(derive_seed(cfg.seed, ROLE_SCENE, 1 + k)).uniform(
            -cfg.noise_amp, cfg.noise_amp, (h, w)
        )
        for k in range(n_objects)
    ]
    patch_rng = np.random.default_rng(derive_seed(cfg.seed, ROLE_SCENE, 1000))
    patches = []
    for obj in cfg.objects:
        ax, ay = obj.axes
        patches.append(
            (
                float(patch_rng.uniform(-ax / 4.0, ax / 4.0)),
                float(patch_rng.uniform(-ay / 4.0, ay / 4.0)),
                max(2.0, ax / 2.0),
                max(2.0, ay / 3.0),
            )
        )
    if cfg.low_contrast:
        bg_base = float(np.mean([o.intensity for o in cfg.objects])) - 12.0
    else:
        bg_base = cfg.background_intensity

    frames = []
    frame_ids = []
    masks = {}
    edges = {}
    truth_frames = []
    yy = np.arange(h)[:, None]
    xx = np.arange(w)[None, :]
    for out_idx in range(cfg.n_frames):
        # emitted frames are numbered 0..n-1; stride scales motion only, as
        # if every stride-th frame of a faster raw recording were kept
        fid = out_idx
        raw_t = float(out_idx * cfg.stride)
        owner = np.full((h, w), -1, dtype=np.int16)
        img = bg_base + bg_field
        full_counts = []
        for k, obj in enumerate(cfg.objects):
            cx, cy = _path_position(obj, raw_t)
            ax, ay = _axes_at(obj, raw_t)
            window, (ox, oy), full_count = _ellipse_window(cx, cy, ax, ay, w, h)
            full_counts.append(full_count)
            if window.size == 0:
                continue
            wy, wx = np.nonzero(window)
            py = wy + oy
            px = wx + ox
            owner[py, px] = k
            values = obj.intensity + obj_fields[k][py, px]
            if cfg.light_patches:
                pdx, pdy, pw, ph_ = patches[k]
                in_patch = (np.abs(px - (cx + pdx)) <= pw / 2.0) & (
                    np.abs(py - (cy + pdy)) <= ph_ / 2.0
                )
                values = values + PATCH_BOOST * in_patch
            img[py, px] = values
        for bar in cfg.bars:
            x1 = min(w, bar.x + bar.width)
            owner[:, bar.x : x1] = -2
            img[:, bar.x : x1] = BAR_INTENSITY + bg_field[:, bar.x : x1]
        frame = GrayImage(
            np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
        )
        mask = (owner >= 0).astype(np.uint8)
        edge = np.zeros((h, w), dtype=np.float64)
        object_truths = []
        for k in range(n_objects):
            visible = owner == k
            count = int(visible.sum())
            if count:
                edge[_moore_boundary(visible)] = 1.0
                vy, vx = np.nonzero(visible)
                bbox = (int(vx.min()), int(vy.min()), int(vx.max()), int(vy.max()))
                centroid = (float(vx.mean()), float(vy.mean()))
            else:
                bbox = None
                centroid = None
            fraction = count / full_counts[k] if full_counts[k] else 0.0
            object_truths.append(
                ObjectTruth(k, bbox, centroid, count, float(fraction))
            )
        frames.append(frame)
        frame_ids.append(fid)
        masks[fid] = mask
        edges[fid] = edge
        truth_frames.append(FrameTruth(fid, tuple(object_truths)))
    seq = FrameSequence(tuple(frames), tuple(frame_ids), 1)
    return seq, masks, edges, GroundTruth(tuple(truth_frames), cfg.target)


def write_fixture(
    out_dir,
    cfg: ScenarioConfig,
    seg_config: SegmentationConfig = SegmentationConfig(),
) -> dict:
    """Generate and write the on-disk fixture layout.

    frames/<id>.png, masks/<id>.mask.png (255 = target class),
    edges/<id>.<blob>.edge.png (per-blob crops, 255 = strongest edge,
    cropped with the same padding rule segmentation uses), truth.jsonl.
    """
    out = Path(out_dir)
    seq, masks, edges, truth = generate(cfg)
    frames_dir = out / "frames"
    masks_dir = out / "masks"
    edges_dir = out / "edges"
    for d in (frames_dir, masks_dir, edges_dir):
        d.mkdir(parents=True, exist_ok=True)
    for fid, frame in seq:
        frame.save_png(frames_dir / f"{fid:06d}.png")
        Image.fromarray(masks[fid] * np.uint8(255), mode="L").save(
            masks_dir / mask_filename(fid)
        )
        semantic = SemanticMask(masks[fid])
        for blob_idx, blob in enumerate(
            extract_blobs(semantic, seg_config.min_blob_area)
        ):
            x0, y0, x1, y1 = pad_bbox(
                blob.bbox, seg_config.crop_pad, cfg.width, cfg.height
            )
            crop = edges[fid][y0 : y1 + 1, x0 : x1 + 1]
            raw = np.clip(np.floor(crop * 255.0 + 0.5), 0, 255).astype(np.uint8)
            Image.fromarray(raw, mode="L").save(
                edges_dir / edge_filename(fid, blob_idx)
            )
    truth_path = out / "truth.jsonl"
    with open(truth_path, "w", encoding="utf-8", newline="\n") as fh:
        for ft in truth.frames:
            tgt = ft.objects[truth.target_id]
            record = {
                "frame": ft.frame_id,
                "target": None
                if tgt.bbox is None
                else {
                    "object": truth.target_id,
                    "bbox": list(tgt.bbox),
                    "centroid": list(tgt.centroid),
                    "pixels": tgt.pixel_count,
                    "visible_fraction": tgt.visible_fraction,
                },
                "objects": [
                    {
                        "id": o.object_id,
                        "bbox": None if o.bbox is None else list(o.bbox),
                        "centroid": None if o.centroid is None else list(o.centroid),
                        "pixels": o.pixel_count,
                        "visible_fraction": o.visible_fraction,
                    }
                    for o in ft.objects
                ],
            }
            fh.write(json.dumps(record) + "\n")
    return {
        "frames": frames_dir,
        "masks": masks_dir,
        "edges": edges_dir,
        "truth": truth_path,
    }


def easy_scenario(n_frames: int = 80, seed: int = 11) -> ScenarioConfig:
    """Well-separated bright objects, no occluders: the training substrate."""
    objects = (
        ObjectSpec(
            intensity=210.0,
            axes=(55.0, 35.0),
            waypoints=((120.0, 120.0), (880.0, 120.0)),
            speed=0.35,
            wobble_amp=0.02,
        ),
        ObjectSpec(
            intensity=150.0,
            axes=(45.0, 30.0),
            waypoints=((860.0, 300.0), (140.0, 300.0)),
            speed=0.30,
            wobble_amp=0.02,
            phase=1.3,
        ),
        ObjectSpec(
            intensity=95.0,
            axes=(38.0, 26.0),
            waypoints=((160.0, 480.0), (840.0, 480.0)),
            speed=0.40,
            wobble_amp=0.02,
            phase=2.1,
        ),
    )
    return ScenarioConfig(
        objects=objects,
        n_frames=n_frames,
        target=0,
        seed=seed,
        background_intensity=40.0,
        noise_amp=8.0,
    )


def hard_scenario(n_frames: int = 60, seed: int = 23) -> ScenarioConfig:
    """Low contrast, skin patches, occluder bars, crossing paths."""
    objects = (
        ObjectSpec(
            intensity=120.0,
            axes=(50.0, 32.0),
            waypoints=((110.0, 180.0), (890.0, 420.0)),
            speed=0.5,
            wobble_amp=0.05,
        ),
        ObjectSpec(
            intensity=132.0,
            axes=(48.0, 31.0),
            waypoints=((890.0, 200.0), (110.0, 430.0)),
            speed=0.5,
            wobble_amp=0.05,
            phase=0.9,
        ),
        ObjectSpec(
            intensity=144.0,
            axes=(42.0, 28.0),
            waypoints=((150.0, 520.0), (850.0, 520.0)),
            speed=0.45,
            wobble_amp=0.05,
            phase=1.7,
        ),
    )
    return ScenarioConfig(
        objects=objects,
        n_frames=n_frames,
        target=0,
        bars=(OccluderBar(x=330, width=50), OccluderBar(x=700, width=26)),
        light_patches=True,
        low_contrast=True,
        noise_amp=10.0,
        seed=seed,
    )
