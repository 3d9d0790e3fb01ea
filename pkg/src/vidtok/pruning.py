"""Difference-based pruning of video tokens in pixel space.

For every region-aligned block of every frame after the first, the block is
compared against the same spatial block of the immediately previous raw
frame.  Blocks whose distance falls below the threshold are considered
redundant and their tokens dropped; the first frame is always kept in full.

The distance is the mean absolute elementwise difference by default.  The
plain 1-norm is a sum over elements, which makes any fixed threshold depend
on the region size; dividing by the element count keeps the default
threshold of 0.1 meaningful across patch sizes.  Set
``PruneConfig(normalized=False)`` to use the raw sum instead.

Region granularity should equal the footprint of one emitted token
(patch_size * merge_factor pixels), so every mask entry maps to exactly one
token downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, ContractViolationError, DimensionMismatchError
from .geometry import ImageBuffer, PatchGrid
from .rope2d import PositionIndex

__all__ = [
    "FrameSequence",
    "PruneConfig",
    "PruneMask",
    "VisionToken",
    "patch_distance",
    "compute_prune_mask",
    "apply_mask",
    "compression_stats",
    "CompressionStats",
]


@dataclass(frozen=True)
class FrameSequence:
    """An ordered run of same-shaped frames with strictly increasing timestamps."""

    frames: tuple[ImageBuffer, ...]
    timestamps: tuple[float, ...]

    def __post_init__(self):
        frames = tuple(self.frames)
        timestamps = tuple(float(t) for t in self.timestamps)
        if not frames:
            raise DimensionMismatchError("a frame sequence needs at least one frame")
        if len(timestamps) != len(frames):
            raise DimensionMismatchError(
                f"{len(frames)} frames but {len(timestamps)} timestamps"
            )
        shape = (frames[0].height, frames[0].width, frames[0].channels)
        for i, f in enumerate(frames):
            if (f.height, f.width, f.channels) != shape:
                raise DimensionMismatchError(
                    f"frame {i} has shape {(f.height, f.width, f.channels)}, "
                    f"expected {shape}"
                )
        if any(b <= a for a, b in zip(timestamps, timestamps[1:])):
            raise ConfigError("timestamps must be strictly increasing")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "timestamps", timestamps)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def channels(self) -> int:
        return self.frames[0].channels


@dataclass(frozen=True)
class PruneConfig:
    """Threshold and region footprint for the pruning decision.

    ``normalized=True`` (default): mean absolute difference per region.
    ``normalized=False``: raw 1-norm sum, threshold scales with region size.
    """

    threshold: float = 0.1
    region_size: int = 28
    normalized: bool = True

    def __post_init__(self):
        if self.threshold < 0:
            raise ConfigError(f"threshold must be >= 0, got {self.threshold}")
        if self.region_size < 1:
            raise ConfigError(f"region_size must be >= 1, got {self.region_size}")


@dataclass(frozen=True)
class PruneMask:
    """Per-(frame, row, col) keep decisions; frame 0 is always all-kept."""

    frames: int
    rows: int
    cols: int
    keep: np.ndarray = field(repr=False)

    def __post_init__(self):
        keep = np.asarray(self.keep, dtype=bool)
        if keep.shape != (self.frames, self.rows, self.cols):
            raise DimensionMismatchError(
                f"keep has shape {keep.shape}, expected "
                f"{(self.frames, self.rows, self.cols)}"
            )
        if not keep[0].all():
            raise ContractViolationError("every token of frame 0 must be kept")
        keep.flags.writeable = False
        object.__setattr__(self, "keep", keep)


@dataclass(frozen=True)
class VisionToken:
    """One surviving token: where it came from and what it encodes."""

    frame: int
    position: PositionIndex
    timestamp: float
    feature: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class CompressionStats:
    kept: int
    dropped: int
    ratio: float


def patch_distance(a, b, normalized: bool = True) -> float:
    """Distance between two equal-length pixel patches.

    With ``normalized`` this is the 1-norm divided by the element count,
    which stays in [0, 1] for intensities in [0, 1], is symmetric, and is
    zero exactly when the patches agree.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"patch lengths differ: {a.shape[0]} vs {b.shape[0]}"
        )
    total = float(np.abs(a - b).sum())
    return total / a.size if normalized else total


def _region_distances(seq: FrameSequence, cfg: PruneConfig) -> np.ndarray:
    """(frames-1, rows, cols) distances between consecutive raw frames."""
    size = cfg.region_size
    rows = seq.height // size
    cols = seq.width // size
    stack = np.stack([f.data for f in seq.frames])  # (T, H, W, C)
    diff = np.abs(stack[1:] - stack[:-1])
    blocks = diff.reshape(len(seq) - 1, rows, size, cols, size, seq.channels)
    sums = blocks.sum(axis=(2, 4, 5))
    if cfg.normalized:
        sums = sums / (size * size * seq.channels)
    return sums


def compute_prune_mask(seq: FrameSequence, cfg: PruneConfig) -> PruneMask:
    """Keep/drop mask over the token grid, one entry per region per frame.

    A token of frame t >= 1 is dropped iff the distance between its region
    and the same region of frame t-1 (kept or not) is strictly below the
    threshold, so a threshold of 0 never drops anything.  Frame 0 is kept
    whole.
    """
    size = cfg.region_size
    if seq.height % size != 0:
        raise DimensionMismatchError(
            f"height {seq.height} is not a multiple of region_size {size}"
        )
    if seq.width % size != 0:
        raise DimensionMismatchError(
            f"width {seq.width} is not a multiple of region_size {size}"
        )
    rows = seq.height // size
    cols = seq.width // size
    keep = np.ones((len(seq), rows, cols), dtype=bool)
    if len(seq) > 1:
        keep[1:] = _region_distances(seq, cfg) >= cfg.threshold
    return PruneMask(frames=len(seq), rows=rows, cols=cols, keep=keep)


def apply_mask(
    grids: Sequence[PatchGrid], mask: PruneMask, timestamps: Sequence[float]
) -> list[VisionToken]:
    """Select the kept tokens of per-frame feature grids, in (frame, row-major) order.

    Every surviving token keeps its grid position and its frame timestamp.
    """
    if len(grids) != mask.frames:
        raise DimensionMismatchError(
            f"{len(grids)} grids but mask covers {mask.frames} frames"
        )
    if len(timestamps) != mask.frames:
        raise DimensionMismatchError(
            f"{len(timestamps)} timestamps but mask covers {mask.frames} frames"
        )
    tokens: list[VisionToken] = []
    for t, grid in enumerate(grids):
        if (grid.rows, grid.cols) != (mask.rows, mask.cols):
            raise DimensionMismatchError(
                f"grid {t} is {grid.rows}x{grid.cols}, mask is "
                f"{mask.rows}x{mask.cols}"
            )
        ts = float(timestamps[t])
        for r in range(mask.rows):
            for c in range(mask.cols):
                if mask.keep[t, r, c]:
                    tokens.append(
                        VisionToken(
                            frame=t,
                            position=PositionIndex(r, c),
                            timestamp=ts,
                            feature=grid.cell(r, c),
                        )
                    )
    return tokens


def compression_stats(mask: PruneMask) -> CompressionStats:
    total = mask.frames * mask.rows * mask.cols
    kept = int(mask.keep.sum())
    dropped = total - kept
    return CompressionStats(kept=kept, dropped=dropped, ratio=dropped / total)
