"""Shared helpers for the test suite."""

import numpy as np

from vidtok import FrameSequence, ImageBuffer


def random_image(rng, height, width, channels=1):
    return ImageBuffer.from_array(rng.random((height, width, channels)))


def random_sequence(rng, n_frames, height, width, channels=1):
    return FrameSequence(
        frames=tuple(random_image(rng, height, width, channels) for _ in range(n_frames)),
        timestamps=tuple(float(i) for i in range(n_frames)),
    )


def assert_tokens_equal(got, expected):
    """Compare VisionToken lists field by field.

    Dataclass equality is unusable here: the feature field is an ndarray,
    so ``==`` would raise on the ambiguous array truth value.
    """
    assert len(got) == len(expected)
    for g, e in zip(got, expected):
        assert g.frame == e.frame
        assert g.position == e.position
        assert g.timestamp == e.timestamp
        assert np.array_equal(g.feature, e.feature)


def brute_force_mask(seq, cfg):
    """Reference pruning mask built with plain loops.

    Walks every region of every frame and compares it against the same
    region of the immediately previous raw frame; a region is dropped only
    when its mean absolute difference falls strictly below the threshold.
    """
    r = cfg.region_size
    rows = seq.height // r
    cols = seq.width // r
    keep = np.ones((len(seq), rows, cols), dtype=bool)
    for t in range(1, len(seq)):
        cur = seq.frames[t].data
        prev = seq.frames[t - 1].data
        for i in range(rows):
            for j in range(cols):
                a = cur[i * r:(i + 1) * r, j * r:(j + 1) * r]
                b = prev[i * r:(i + 1) * r, j * r:(j + 1) * r]
                dist = float(np.abs(a - b).sum())
                if cfg.normalized:
                    dist /= a.size
                keep[t, i, j] = dist >= cfg.threshold
    return keep
