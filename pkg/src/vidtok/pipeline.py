"""End-to-end video tokenization.

Per frame: patchify, encode, spatially downsample the token grid, then drop
tokens flagged by the pixel-space prune mask and enforce the sequence
budgets.  Encoders are pluggable callables mapping a pixel PatchGrid to a
feature PatchGrid with the same rows x cols; two deterministic reference
encoders ship here so the whole pipeline is verifiable without trained
weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np

from .errors import (
    ConfigError,
    ContractViolationError,
    DimensionMismatchError,
    UnsatisfiableBudgetError,
)
from .geometry import ImageBuffer, PatchGrid, TokenBudget, patchify
from .pruning import (
    FrameSequence,
    PruneConfig,
    PruneMask,
    VisionToken,
    apply_mask,
    compute_prune_mask,
)

__all__ = [
    "SamplingPolicy",
    "TextToken",
    "TokenSequence",
    "sample_timestamps",
    "uniform_indices",
    "downsample_tokens",
    "identity_encoder",
    "random_projection_encoder",
    "make_encoder",
    "ENCODERS",
    "tokenize_video",
    "enforce_budget",
]

Encoder = Callable[[PatchGrid], PatchGrid]


@dataclass(frozen=True)
class SamplingPolicy:
    """Frame sampling rate and the hard cap on frames per clip."""

    fps: float = 1.0
    max_frames: int = 180

    def __post_init__(self):
        if not self.fps > 0:
            raise ConfigError(f"fps must be > 0, got {self.fps}")
        if self.max_frames < 1:
            raise ConfigError(f"max_frames must be >= 1, got {self.max_frames}")


@dataclass(frozen=True)
class TextToken:
    text: str


Element = Union[VisionToken, TextToken]


@dataclass(frozen=True)
class TokenSequence:
    """Ordered vision and text tokens with their counts."""

    elements: tuple[Element, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))

    @property
    def vision_count(self) -> int:
        return sum(1 for e in self.elements if isinstance(e, VisionToken))

    @property
    def total_count(self) -> int:
        return len(self.elements)

    def vision_tokens(self) -> list[VisionToken]:
        return [e for e in self.elements if isinstance(e, VisionToken)]

    def frame_timestamps(self) -> list[float]:
        """Distinct frame timestamps in order of first appearance."""
        return list(
            dict.fromkeys(
                e.timestamp for e in self.elements if isinstance(e, VisionToken)
            )
        )


def sample_timestamps(duration: float, policy: SamplingPolicy) -> list[float]:
    """Timestamps at 1/fps spacing from 0, capped at max_frames.

    When the first pass yields more than ``max_frames`` stamps they are
    uniformly resampled in index space down to exactly ``max_frames``; the
    result is always strictly increasing and below ``duration``.
    """
    if not duration > 0:
        raise ConfigError(f"duration must be > 0, got {duration}")
    count = max(1, math.ceil(duration * policy.fps))
    stamps = [i / policy.fps for i in range(count)]
    stamps = [t for t in stamps if t < duration] or [0.0]
    if len(stamps) > policy.max_frames:
        idx = uniform_indices(len(stamps), policy.max_frames)
        stamps = [stamps[i] for i in idx]
    return stamps


def uniform_indices(n: int, k: int) -> list[int]:
    """k indices spread evenly over range(n): floor(j * n / k)."""
    if k >= n:
        return list(range(n))
    return [j * n // k for j in range(k)]


def downsample_tokens(grid: PatchGrid, factor: int = 2) -> PatchGrid:
    """Average factor x factor blocks of a feature grid.

    For factor 2 the uniform block mean equals bilinear interpolation
    sampled at the block centers.  The feature dimension is unchanged.
    """
    if factor < 1:
        raise ConfigError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return grid
    if grid.rows % factor != 0:
        raise DimensionMismatchError(
            f"rows {grid.rows} is not a multiple of factor {factor}"
        )
    if grid.cols % factor != 0:
        raise DimensionMismatchError(
            f"cols {grid.cols} is not a multiple of factor {factor}"
        )
    rows = grid.rows // factor
    cols = grid.cols // factor
    cells = grid.cells.reshape(rows, factor, cols, factor, grid.cell_len)
    merged = cells.mean(axis=(1, 3)).reshape(rows * cols, grid.cell_len)
    return PatchGrid(
        rows=rows, cols=cols, patch_size=grid.patch_size * factor, cells=merged
    )


def identity_encoder(grid: PatchGrid) -> PatchGrid:
    """Features are the flattened pixel patches themselves."""
    return grid


def random_projection_encoder(seed: int, dim: int = 32) -> Encoder:
    """Seeded Gaussian projection of each patch to a fixed feature size.

    The projection matrix is derived from (seed, input length), so equal
    inputs and seeds produce bit-identical features.
    """

    matrices: dict[int, np.ndarray] = {}

    def encode(grid: PatchGrid) -> PatchGrid:
        n = grid.cell_len
        if n not in matrices:
            rng = np.random.default_rng((seed, n))
            matrices[n] = rng.standard_normal((n, dim)) / math.sqrt(n)
        return PatchGrid(
            rows=grid.rows,
            cols=grid.cols,
            patch_size=grid.patch_size,
            cells=grid.cells @ matrices[n],
        )

    return encode


ENCODERS = ("identity", "randproj")


def make_encoder(name: str, seed: int = 0) -> Encoder:
    """Build a named encoder and reject it if it breaks the shape contract.

    The probe feeds a tiny 2x3 grid through the encoder and checks that
    rows and cols come back unchanged.
    """
    if name == "identity":
        encoder = identity_encoder
    elif name == "randproj":
        encoder = random_projection_encoder(seed)
    else:
        raise ConfigError(f"unknown encoder {name!r}; choose from {ENCODERS}")
    _shape_probe(encoder)
    return encoder


def _shape_probe(encoder: Encoder) -> None:
    probe = PatchGrid(rows=2, cols=3, patch_size=1, cells=np.zeros((6, 4)))
    out = encoder(probe)
    if not isinstance(out, PatchGrid) or (out.rows, out.cols) != (2, 3):
        raise ContractViolationError(
            "encoder must preserve the grid shape (rows, cols)"
        )


def tokenize_video(
    seq: FrameSequence,
    encoder: Encoder,
    prune: PruneConfig,
    budget: TokenBudget,
    patch_size: int,
    merge: int = 2,
    policy: SamplingPolicy | None = None,
) -> TokenSequence:
    """Tokenize a pre-resized frame sequence into a budgeted token sequence.

    Frame dimensions must already be multiples of patch_size * merge (run
    smart_resize + bilinear_resize upstream).  The prune mask is computed on
    the raw pixels at the post-merge token footprint, so mask entries and
    emitted tokens correspond one to one.

    Raises UnsatisfiableBudgetError when no uniform frame subsample fits the
    budget; the error carries the offending counts.
    """
    if patch_size < 1 or merge < 1:
        raise ConfigError("patch_size and merge must be >= 1")
    region = patch_size * merge
    if seq.height % region != 0:
        raise DimensionMismatchError(
            f"height {seq.height} is not a multiple of patch_size*merge {region}"
        )
    if seq.width % region != 0:
        raise DimensionMismatchError(
            f"width {seq.width} is not a multiple of patch_size*merge {region}"
        )

    policy = policy or SamplingPolicy()
    if len(seq) > policy.max_frames:
        idx = uniform_indices(len(seq), policy.max_frames)
        seq = FrameSequence(
            frames=tuple(seq.frames[i] for i in idx),
            timestamps=tuple(seq.timestamps[i] for i in idx),
        )

    grids = []
    for frame in seq.frames:
        encoded = encoder(patchify(frame, patch_size))
        if (encoded.rows, encoded.cols) != (
            seq.height // patch_size,
            seq.width // patch_size,
        ):
            raise ContractViolationError(
                "encoder changed the grid shape during tokenization"
            )
        grids.append(downsample_tokens(encoded, merge))

    mask = compute_prune_mask(seq, replace(prune, region_size=region))
    tokens = apply_mask(grids, mask, seq.timestamps)
    sequence = TokenSequence(elements=tuple(tokens))
    return enforce_budget(sequence, budget, policy)


def enforce_budget(
    seq: TokenSequence, budget: TokenBudget, policy: SamplingPolicy
) -> TokenSequence:
    """Drop whole frames, uniformly, until the sequence fits both budgets.

    A sequence already under budget is returned unchanged.  When over budget
    the largest uniform frame subsample that fits is kept, never larger than
    policy.max_frames.  Text tokens are never touched; if even a single
    frame cannot fit, an UnsatisfiableBudgetError is raised with the counts.
    """
    text_count = seq.total_count - seq.vision_count
    if (
        seq.vision_count <= budget.max_vision_tokens
        and seq.total_count <= budget.max_total_tokens
    ):
        return seq

    stamps = seq.frame_timestamps()
    per_frame: dict[float, int] = {t: 0 for t in stamps}
    for tok in seq.vision_tokens():
        per_frame[tok.timestamp] += 1

    n = len(stamps)
    for k in range(min(n - 1, policy.max_frames), 0, -1):
        chosen = {stamps[i] for i in uniform_indices(n, k)}
        vision = sum(per_frame[t] for t in chosen)
        if (
            vision <= budget.max_vision_tokens
            and vision + text_count <= budget.max_total_tokens
        ):
            elements = tuple(
                e
                for e in seq.elements
                if isinstance(e, TextToken) or e.timestamp in chosen
            )
            return TokenSequence(elements=elements)

    raise UnsatisfiableBudgetError(
        "even a single frame exceeds the token budget: "
        f"frame 0 holds {per_frame[stamps[0]] if stamps else 0} vision tokens, "
        f"budget is {budget.max_vision_tokens} vision / {budget.max_total_tokens} total",
        vision_tokens=per_frame[stamps[0]] if stamps else 0,
        total_tokens=(per_frame[stamps[0]] if stamps else 0) + text_count,
        max_vision_tokens=budget.max_vision_tokens,
        max_total_tokens=budget.max_total_tokens,
    )
