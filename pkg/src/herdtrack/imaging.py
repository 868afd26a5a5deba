"""Frame loading, subsampling, grayscale conversion, and overlay rendering.

Frames come from a directory of PNG (8-bit gray or RGB) or binary PGM (P5)
files; lexicographic filename order defines the frame order.  All raster
types hold (height, width) numpy arrays and are treated as immutable after
construction.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .errors import FrameFormatError, SourceNotFoundError

_FRAME_SUFFIXES = (".png", ".pgm")

DEFAULT_STRIDE = 10


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale raster; `data` is a (height, width) uint8 array."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.dtype != np.uint8:
            raise FrameFormatError(
                f"gray image needs a 2-D uint8 array, got {self.data.dtype} "
                f"with shape {self.data.shape}"
            )
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise FrameFormatError("gray image must be at least 1x1")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def crop(self, x0: int, y0: int, x1: int, y1: int) -> "GrayImage":
        """Inclusive-rectangle crop."""
        return GrayImage(np.ascontiguousarray(self.data[y0 : y1 + 1, x0 : x1 + 1]))

    def save_png(self, path) -> None:
        Image.fromarray(self.data, mode="L").save(path, format="PNG")


@dataclass(frozen=True)
class FrameSequence:
    """Subsampled frames plus their original source indices."""

    frames: list = field(default_factory=list)
    frame_ids: list = field(default_factory=list)
    stride: int = DEFAULT_STRIDE

    def __post_init__(self):
        if self.stride < 1:
            raise FrameFormatError(f"stride must be positive, got {self.stride}")
        if len(self.frames) != len(self.frame_ids):
            raise FrameFormatError("frames and frame_ids must align")
        for prev, cur in zip(self.frame_ids, self.frame_ids[1:]):
            if cur - prev != self.stride:
                raise FrameFormatError(
                    f"frame ids must advance by the stride: {prev} -> {cur}"
                )

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(zip(self.frame_ids, self.frames))

    def slice(self, start: int, stop: int) -> "FrameSequence":
        """Sub-range by position (not source index); keeps ids and stride."""
        return FrameSequence(
            frames=self.frames[start:stop],
            frame_ids=self.frame_ids[start:stop],
            stride=self.stride,
        )


def to_gray(rgb: np.ndarray) -> GrayImage:
    """ITU-R 601 luma with round-half-up: round(0.299 R + 0.587 G + 0.114 B)."""
    arr = np.asarray(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise FrameFormatError(
            f"expected a 3-channel raster, got shape {arr.shape}"
        )
    # integer weights keep equal-channel images exactly fixed
    luma = (
        299 * arr[:, :, 0].astype(np.int64)
        + 587 * arr[:, :, 1].astype(np.int64)
        + 114 * arr[:, :, 2].astype(np.int64)
    ) / 1000.0
    out = np.floor(luma + 0.5)
    return GrayImage(np.clip(out, 0, 255).astype(np.uint8))


def read_raster(path) -> np.ndarray:
    """Decode one PNG/PGM file to a uint8 array (2-D gray or 3-D RGB)."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode in ("L", "RGB"):
                return np.asarray(img)
            if mode == "I;16":  # 16-bit PGM: not an 8-bit source
                raise FrameFormatError(f"{path.name}: 16-bit rasters unsupported")
            raise FrameFormatError(f"{path.name}: unsupported image mode {mode!r}")
    except FrameFormatError:
        raise
    except FileNotFoundError:
        raise SourceNotFoundError(f"no such frame: {path}") from None
    except Exception as exc:
        raise FrameFormatError(f"cannot decode frame {path.name}: {exc}") from exc


def read_gray(path) -> GrayImage:
    """Decode one frame file, converting RGB to luma if needed."""
    arr = read_raster(path)
    if arr.ndim == 2:
        return GrayImage(arr.astype(np.uint8))
    return to_gray(arr)


def list_frame_files(source) -> list:
    """Frame files of a directory in lexicographic (= frame) order."""
    src = Path(source)
    if not src.is_dir():
        raise SourceNotFoundError(f"frame source does not exist: {src}")
    files = sorted(
        p for p in src.iterdir() if p.suffix.lower() in _FRAME_SUFFIXES
    )
    if not files:
        raise SourceNotFoundError(f"frame source holds no PNG/PGM frames: {src}")
    return files


def load_sequence(source, stride: int = DEFAULT_STRIDE) -> FrameSequence:
    """Load every stride-th frame of a directory, in filename order."""
    if stride < 1:
        raise FrameFormatError(f"stride must be positive, got {stride}")
    files = list_frame_files(source)
    frames, ids = [], []
    for idx in range(0, len(files), stride):
        frames.append(read_gray(files[idx]))
        ids.append(idx)
    return FrameSequence(frames=frames, frame_ids=ids, stride=stride)


def render_overlay(
    frame: GrayImage,
    instances,
    labels=None,
    votes=None,
    selected=None,
) -> Image.Image:
    """Draw hull outlines, bounding boxes and label text onto a frame.

    `instances` is a list of segmentation.Instance; `labels`/`votes` align
    with it when given.  The selected instance is boxed in red, positives in
    green, the rest in orange.
    """
    img = Image.fromarray(frame.data, mode="L").convert("RGB")
    draw = ImageDraw.Draw(img)
    for idx, inst in enumerate(instances):
        label = labels[idx] if labels is not None else None
        color = (255, 160, 0)
        if label == 1:
            color = (0, 220, 0)
        if selected is not None and idx == selected:
            color = (255, 40, 40)
        x0, y0, x1, y1 = inst.bbox
        draw.rectangle([x0, y0, x1, y1], outline=color, width=2)
        if inst.hull is not None and len(inst.hull) >= 3:
            draw.polygon([tuple(p) for p in inst.hull], outline=color)
        text = f"#{idx}"
        if label is not None:
            text += f" {label}"
        if votes is not None:
            text += f" {votes[idx]:.2f}"
        draw.text((x0 + 2, max(0, y0 - 12)), text, fill=color)
    return img
