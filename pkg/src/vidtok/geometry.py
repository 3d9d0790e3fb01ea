"""Raster containers, resolution arithmetic, patch extraction and bilinear resize.

Everything downstream (pruning, tokenization, curation) builds on the types
here.  Pixel intensities are normalized to [0, 1] at ingest so that distance
thresholds are independent of bit depth, and all arithmetic is done in
float64 so the exactness guarantees (round-trip patchify, identity resize)
are meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DimensionMismatchError

__all__ = [
    "Resolution",
    "ImageBuffer",
    "PatchGrid",
    "TokenBudget",
    "smart_resize",
    "patchify",
    "unpatchify",
    "bilinear_resize",
]

# Relative aspect-ratio drift tolerated by smart_resize before it prefers a
# smaller grid that tracks the input shape more closely.
ASPECT_TOLERANCE = 0.02


class Resolution(NamedTuple):
    """A height x width pixel extent."""

    height: int
    width: int

    def validate(self) -> "Resolution":
        if self.height < 1 or self.width < 1:
            raise DimensionMismatchError(
                f"resolution must be at least 1x1, got {self.height}x{self.width}"
            )
        return self


@dataclass(frozen=True)
class ImageBuffer:
    """An H x W x C grid of pixel intensities in [0, 1].

    ``data`` is stored as a float64 array of shape (height, width, channels).
    Only 1 (grayscale) or 3 (RGB) channels are supported; alpha is stripped
    at ingest.
    """

    height: int
    width: int
    channels: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.height < 1:
            raise DimensionMismatchError(f"height must be >= 1, got {self.height}")
        if self.width < 1:
            raise DimensionMismatchError(f"width must be >= 1, got {self.width}")
        if self.channels not in (1, 3):
            raise ConfigError(f"channels must be 1 or 3, got {self.channels}")
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.size != self.height * self.width * self.channels:
            raise DimensionMismatchError(
                f"data has {arr.size} values, expected "
                f"{self.height}x{self.width}x{self.channels}"
            )
        arr = arr.reshape(self.height, self.width, self.channels)
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ConfigError("pixel intensities must lie in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, array) -> "ImageBuffer":
        """Build a buffer from an (H, W) or (H, W, C) array of [0, 1] floats."""
        arr = np.asarray(array, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise DimensionMismatchError(
                f"expected a 2-D or 3-D array, got {arr.ndim}-D"
            )
        h, w, c = arr.shape
        return cls(height=h, width=w, channels=c, data=arr)

    @property
    def resolution(self) -> Resolution:
        return Resolution(self.height, self.width)


@dataclass(frozen=True)
class PatchGrid:
    """A rows x cols arrangement of patches or feature vectors.

    ``cells`` holds one row-major vector per grid cell, shape
    (rows * cols, cell_len).  For pixel grids the cell length is
    patch_size^2 * channels; for feature grids it is the feature dimension
    and ``patch_size`` records the pixel footprint each cell descends from.
    """

    rows: int
    cols: int
    patch_size: int
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise DimensionMismatchError(
                f"grid must be at least 1x1, got {self.rows}x{self.cols}"
            )
        if self.patch_size < 1:
            raise ConfigError(f"patch_size must be >= 1, got {self.patch_size}")
        cells = np.asarray(self.cells, dtype=np.float64)
        if cells.ndim != 2 or cells.shape[0] != self.rows * self.cols:
            raise DimensionMismatchError(
                f"cells must have shape ({self.rows * self.cols}, cell_len), "
                f"got {cells.shape}"
            )
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)

    @property
    def cell_len(self) -> int:
        return self.cells.shape[1]

    def cell(self, row: int, col: int) -> np.ndarray:
        return self.cells[row * self.cols + col]


@dataclass(frozen=True)
class TokenBudget:
    """Sequence-length limits: total tokens and the vision-only sublimit."""

    max_total_tokens: int = 16384
    max_vision_tokens: int = 10240

    def __post_init__(self):
        if self.max_total_tokens <= 0 or self.max_vision_tokens <= 0:
            raise ConfigError("token budgets must be positive")
        if self.max_vision_tokens > self.max_total_tokens:
            raise ConfigError(
                f"max_vision_tokens ({self.max_vision_tokens}) must not exceed "
                f"max_total_tokens ({self.max_total_tokens})"
            )


def _aspect_deviation(out_h: int, out_w: int, in_h: int, in_w: int) -> float:
    """Relative deviation of the output width/height ratio from the input's."""
    return abs((out_w * in_h) / (out_h * in_w) - 1.0)


def smart_resize(
    input: Resolution,
    patch_size: int,
    merge_factor: int,
    max_vision_tokens: int,
) -> Resolution:
    """Snap a resolution to the patch lattice under a token budget.

    Returns the largest resolution whose sides are multiples of
    ``patch_size * merge_factor``, that does not exceed ``input`` in either
    dimension, whose post-merge token count fits ``max_vision_tokens``, and
    whose aspect ratio stays within 2% of the input's whenever any conforming
    resolution can achieve that.  Sides are snapped down, never up, except
    that an input smaller than one block in a dimension is clamped up to
    exactly one block.

    Largest means maximal grid area; among equal areas the candidate whose
    aspect ratio tracks the input most closely wins.
    """
    if patch_size < 1 or merge_factor < 1:
        raise ConfigError("patch_size and merge_factor must be >= 1")
    if max_vision_tokens < 1:
        raise ConfigError("max_vision_tokens must be >= 1")
    input = Resolution(*input).validate()

    unit = patch_size * merge_factor
    max_rows = max(1, input.height // unit)
    max_cols = max(1, input.width // unit)
    ratio = input.width / input.height  # target cols/rows shape

    best = None  # ((area, -log_dev, -rows), rows, cols)
    best_fallback = None
    for rows in range(1, max_rows + 1):
        cols_cap = min(max_cols, max_vision_tokens // rows)
        if cols_cap < 1:
            break
        # Widest column count keeping the aspect ratio within tolerance.
        # Both linear bounds are relaxed by one column; the deviation check
        # below is the actual feasibility test, so round-off in ceil/floor
        # at the exact tolerance boundary cannot drop a candidate.
        cols_lo = max(1, math.ceil((1.0 - ASPECT_TOLERANCE) * ratio * rows) - 1)
        cols = min(cols_cap, math.floor((1.0 + ASPECT_TOLERANCE) * ratio * rows) + 1)
        while cols >= cols_lo and _aspect_deviation(
            rows * unit, cols * unit, *input
        ) > ASPECT_TOLERANCE:
            cols -= 1  # float round-off guard at the tolerance boundary
        if cols >= cols_lo:
            cand = (rows * cols, -_log_dev(rows, cols, ratio), -rows)
            if best is None or cand > best[0]:
                best = (cand, rows, cols)
        # Fallback ignores the aspect constraint entirely.
        cand = (rows * cols_cap, -_log_dev(rows, cols_cap, ratio), -rows)
        if best_fallback is None or cand > best_fallback[0]:
            best_fallback = (cand, rows, cols_cap)

    chosen = best if best is not None else best_fallback
    _, rows, cols = chosen
    return Resolution(rows * unit, cols * unit)


def _log_dev(rows: int, cols: int, ratio: float) -> float:
    return abs(math.log((cols / rows) / ratio))


def patchify(image: ImageBuffer, patch_size: int) -> PatchGrid:
    """Cut an image into non-overlapping patch_size x patch_size cells.

    The image dimensions must be exact multiples of ``patch_size`` (run
    :func:`smart_resize` plus :func:`bilinear_resize` first).  Each cell is
    the row-major flattening of its pixel block, so the operation is lossless
    and :func:`unpatchify` inverts it exactly.
    """
    if patch_size < 1:
        raise ConfigError(f"patch_size must be >= 1, got {patch_size}")
    if image.height % patch_size != 0:
        raise DimensionMismatchError(
            f"height {image.height} is not a multiple of patch_size {patch_size}"
        )
    if image.width % patch_size != 0:
        raise DimensionMismatchError(
            f"width {image.width} is not a multiple of patch_size {patch_size}"
        )
    rows = image.height // patch_size
    cols = image.width // patch_size
    blocks = image.data.reshape(rows, patch_size, cols, patch_size, image.channels)
    cells = blocks.transpose(0, 2, 1, 3, 4).reshape(rows * cols, -1)
    return PatchGrid(rows=rows, cols=cols, patch_size=patch_size, cells=cells)


def unpatchify(grid: PatchGrid, channels: int) -> ImageBuffer:
    """Reassemble a pixel PatchGrid back into the image it came from."""
    p = grid.patch_size
    expected = p * p * channels
    if grid.cell_len != expected:
        raise DimensionMismatchError(
            f"cell length {grid.cell_len} does not match patch_size^2 * channels "
            f"= {expected}"
        )
    blocks = grid.cells.reshape(grid.rows, grid.cols, p, p, channels)
    data = blocks.transpose(0, 2, 1, 3, 4).reshape(grid.rows * p, grid.cols * p, channels)
    return ImageBuffer(
        height=grid.rows * p, width=grid.cols * p, channels=channels, data=data
    )


def bilinear_resize(image: ImageBuffer, target: Resolution) -> ImageBuffer:
    """Resize with half-pixel-center bilinear sampling.

    Source coordinates are ``(dst + 0.5) * scale - 0.5`` with edge clamping,
    the convention that is self-consistent under repeated 2x downsampling.
    Outputs are convex combinations of inputs, so values stay inside [0, 1],
    and resizing to the identical resolution reproduces the input exactly.
    """
    target = Resolution(*target).validate()
    th, tw = target
    sh, sw = image.height, image.width
    if (th, tw) == (sh, sw):
        return image

    src_y = (np.arange(th, dtype=np.float64) + 0.5) * (sh / th) - 0.5
    src_x = (np.arange(tw, dtype=np.float64) + 0.5) * (sw / tw) - 0.5
    src_y = np.clip(src_y, 0.0, sh - 1)
    src_x = np.clip(src_x, 0.0, sw - 1)

    y0 = np.floor(src_y).astype(np.intp)
    x0 = np.floor(src_x).astype(np.intp)
    y1 = np.minimum(y0 + 1, sh - 1)
    x1 = np.minimum(x0 + 1, sw - 1)
    wy = (src_y - y0)[:, None, None]
    wx = (src_x - x0)[None, :, None]

    d = image.data
    top = d[y0][:, x0] * (1.0 - wx) + d[y0][:, x1] * wx
    bot = d[y1][:, x0] * (1.0 - wx) + d[y1][:, x1] * wx
    out = top * (1.0 - wy) + bot * wy
    # Guard against float round-off pushing convex combinations out of range.
    out = np.clip(out, 0.0, 1.0)
    return ImageBuffer(height=th, width=tw, channels=image.channels, data=out)
