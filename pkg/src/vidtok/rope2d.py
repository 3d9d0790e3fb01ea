"""2D rotary position indices and rotations for patch-grid tokens.

The feature vector is split into two halves: the first half is rotated by
angles proportional to the grid row, the second half by angles proportional
to the grid column.  Within each half, dimensions are paired (2k, 2k+1) and
pair k turns by ``theta_k * coordinate`` with
``theta_k = base ** (-2k / (head_dim / 2))``.

Rotations are isometries, and inner products between rotated vectors depend
only on the difference of their grid positions; both properties are what
make this a drop-in replacement for absolute position embeddings.  Angles
are always computed in float64 so these guarantees hold to tight tolerances
regardless of the feature precision upstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DimensionMismatchError

__all__ = [
    "PositionIndex",
    "RopeConfig",
    "position_indices",
    "rope_rotate",
    "relative_inner_product_check",
]


class PositionIndex(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class RopeConfig:
    """Rotation parameters: feature size per head and the frequency base."""

    head_dim: int
    base: float = 10000.0

    def __post_init__(self):
        if self.head_dim < 4 or self.head_dim % 4 != 0:
            raise ConfigError(
                f"head_dim must be a positive multiple of 4, got {self.head_dim}"
            )
        if not self.base > 1.0:
            raise ConfigError(f"base must be > 1, got {self.base}")

    def frequencies(self) -> np.ndarray:
        """theta_k for k = 0 .. head_dim/4 - 1, shared by both halves."""
        half = self.head_dim // 2
        k = np.arange(half // 2, dtype=np.float64)
        return self.base ** (-2.0 * k / half)


def position_indices(rows: int, cols: int) -> list[PositionIndex]:
    """Row-major enumeration of an rows x cols grid."""
    if rows < 1 or cols < 1:
        raise DimensionMismatchError(
            f"grid must be at least 1x1, got {rows}x{cols}"
        )
    return [PositionIndex(r, c) for r in range(rows) for c in range(cols)]


def _rotate_half(x: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Rotate adjacent pairs of x clockwise by the given angles."""
    cos = np.cos(angles)
    sin = np.sin(angles)
    even = x[0::2]
    odd = x[1::2]
    out = np.empty_like(x)
    out[0::2] = even * cos + odd * sin
    out[1::2] = -even * sin + odd * cos
    return out


def rope_rotate(v, p: PositionIndex, cfg: RopeConfig) -> np.ndarray:
    """Apply the position-(row, col) rotation to a head_dim vector."""
    vec = np.asarray(v, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != cfg.head_dim:
        raise DimensionMismatchError(
            f"vector length {vec.shape} does not match head_dim {cfg.head_dim}"
        )
    half = cfg.head_dim // 2
    theta = cfg.frequencies()
    out = np.empty_like(vec)
    out[:half] = _rotate_half(vec[:half], theta * p.row)
    out[half:] = _rotate_half(vec[half:], theta * p.col)
    return out


def relative_inner_product_check(
    u, v, p: PositionIndex, q: PositionIndex, cfg: RopeConfig
) -> float:
    """Inner product of two rotated vectors.

    Depends only on (p - q); translating both positions by the same offset
    leaves the result unchanged, which is the property attention inherits.
    """
    return float(np.dot(rope_rotate(u, p, cfg), rope_rotate(v, q, cfg)))
