"""Run configuration and its flat key=value file format.

Defaults mirror the production constants: 14px patches merged 2x, prune
threshold 0.1, 1 fps capped at 180 frames, and 16384/10240 token budgets.
A config file is plain ``key=value`` lines (``#`` comments allowed), which
stays trivially diffable:

    patch_size=14
    merge_factor=2
    prune_threshold=0.1
    fps=1
    max_frames=180
    max_total_tokens=16384
    max_vision_tokens=10240
    seed=0
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .geometry import TokenBudget
from .pipeline import SamplingPolicy
from .pruning import PruneConfig

__all__ = ["Config"]


@dataclass(frozen=True)
class Config:
    patch_size: int = 14
    merge_factor: int = 2
    prune_threshold: float = 0.1
    fps: float = 1.0
    max_frames: int = 180
    max_total_tokens: int = 16384
    max_vision_tokens: int = 10240
    seed: int = 0

    def __post_init__(self):
        if self.patch_size < 1 or self.merge_factor < 1:
            raise ConfigError("patch_size and merge_factor must be >= 1")
        # Constructing the derived objects validates the remaining fields.
        self.budget()
        self.policy()
        self.prune()

    def budget(self) -> TokenBudget:
        return TokenBudget(
            max_total_tokens=self.max_total_tokens,
            max_vision_tokens=self.max_vision_tokens,
        )

    def policy(self) -> SamplingPolicy:
        return SamplingPolicy(fps=self.fps, max_frames=self.max_frames)

    def prune(self) -> PruneConfig:
        return PruneConfig(
            threshold=self.prune_threshold,
            region_size=self.patch_size * self.merge_factor,
        )

    @classmethod
    def load(cls, path) -> "Config":
        values = {}
        types = {f.name: f.type for f in fields(cls)}
        casts = {"int": int, "float": float}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in types:
                raise ConfigError(f"{path}:{lineno}: unrecognized line {line!r}")
            try:
                values[key] = casts[types[key]](value.strip())
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
        return cls(**values)

    def dump(self, path) -> None:
        lines = [f"{f.name}={getattr(self, f.name)}" for f in fields(self)]
        Path(path).write_text("\n".join(lines) + "\n")
