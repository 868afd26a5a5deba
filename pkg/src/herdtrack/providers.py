"""Sources for semantic masks and edge maps.

Segmentation only sees two small interfaces: a mask per frame and an edge
map per blob crop.  Implementations here cover precomputed artifacts on
disk, a classical gradient fallback, and in-memory rasters (used by the
synthetic scenes and by tests).
"""

from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import MissingArtifactError
from .imaging import GrayImage, read_raster
from .segmentation import EdgeMap, SemanticMask, gradient_edge_map


def frame_stem(frame_id: int) -> str:
    """Canonical file stem for a frame id (zero-padded, sorts correctly)."""
    return f"{frame_id:06d}"


def mask_filename(frame_id: int) -> str:
    return f"{frame_stem(frame_id)}.mask.png"


def edge_filename(frame_id: int, blob_index: int) -> str:
    return f"{frame_stem(frame_id)}.{blob_index}.edge.png"


class MaskProvider(Protocol):
    def mask(self, frame_id: int) -> SemanticMask: ...


class EdgeProvider(Protocol):
    def edges(self, crop: GrayImage, *, frame_id, blob_index, origin) -> EdgeMap: ...


class FileMaskProvider:
    """Reads `<frame_id>.mask.png`; any nonzero pixel is the target class."""

    def __init__(self, directory):
        self.directory = Path(directory)

    def mask(self, frame_id: int) -> SemanticMask:
        path = self.directory / mask_filename(frame_id)
        if not path.is_file():
            raise MissingArtifactError(f"no mask file for frame {frame_id}: {path}")
        return SemanticMask.from_raster(read_raster(path))


class ArrayMaskProvider:
    """Serves masks from an in-memory mapping of frame id to raster."""

    def __init__(self, masks):
        self._masks = {fid: SemanticMask.from_raster(arr) for fid, arr in masks.items()}

    def mask(self, frame_id: int) -> SemanticMask:
        if frame_id not in self._masks:
            raise MissingArtifactError(f"no mask for frame {frame_id}")
        return self._masks[frame_id]


class GradientEdgeProvider:
    """Computes edges from the crop itself (no external artifacts)."""

    def edges(self, crop, *, frame_id=None, blob_index=None, origin=(0, 0)):
        return gradient_edge_map(crop)


class FileEdgeProvider:
    """Reads `<frame_id>.<blob_index>.edge.png` (255 = strongest edge).

    Stored 8-bit values are scaled to strengths in [0, 1] at load.  When a
    file is absent the optional fallback provider is consulted instead;
    without one, a missing artifact is an error.
    """

    def __init__(self, directory, fallback=None):
        self.directory = Path(directory)
        self.fallback = fallback

    def edges(self, crop, *, frame_id, blob_index, origin=(0, 0)):
        path = self.directory / edge_filename(frame_id, blob_index)
        if not path.is_file():
            if self.fallback is not None:
                return self.fallback.edges(
                    crop, frame_id=frame_id, blob_index=blob_index, origin=origin
                )
            raise MissingArtifactError(
                f"no edge file for frame {frame_id} blob {blob_index}: {path}"
            )
        raw = read_raster(path)
        if raw.shape != crop.data.shape:
            raise MissingArtifactError(
                f"edge file {path} shape {raw.shape} does not match crop "
                f"{crop.data.shape}"
            )
        return EdgeMap(raw.astype(np.float64) / 255.0)


class FullFrameEdgeProvider:
    """Slices blob crops out of full-frame strength rasters.

    Used with synthetic scenes where edges are known for the whole frame;
    `origin` locates the crop.  Falls back per frame when no raster exists.
    """

    def __init__(self, frames, fallback=None):
        self._frames = dict(frames)
        self.fallback = fallback

    def edges(self, crop, *, frame_id, blob_index=None, origin=(0, 0)):
        if frame_id not in self._frames:
            if self.fallback is not None:
                return self.fallback.edges(
                    crop, frame_id=frame_id, blob_index=blob_index, origin=origin
                )
            raise MissingArtifactError(f"no edge raster for frame {frame_id}")
        ox, oy = origin
        h, w = crop.data.shape
        window = self._frames[frame_id][oy : oy + h, ox : ox + w]
        return EdgeMap(np.asarray(window, dtype=np.float64))
