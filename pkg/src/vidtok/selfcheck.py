"""Self-contained invariant suites over synthetic data.

Each suite re-derives expected behavior through an independent route
(brute force, enumeration, hand arithmetic) and checks the library against
it.  The CLI exposes this as ``vidtok selfcheck``; the same properties are
covered more exhaustively in the test suite.
"""

from __future__ import annotations

import numpy as np

from . import curation, pipeline, pruning, rope2d, seqformat
from .errors import UnsatisfiableBudgetError
from .geometry import (
    ImageBuffer,
    Resolution,
    TokenBudget,
    bilinear_resize,
    patchify,
    smart_resize,
    unpatchify,
)

__all__ = ["run_all", "SUITES"]


def _random_frames(rng, count, height, width, channels=1):
    frames = tuple(
        ImageBuffer.from_array(rng.random((height, width, channels)))
        for _ in range(count)
    )
    return pruning.FrameSequence(frames=frames, timestamps=tuple(range(count)))


def check_geometry(seed: int) -> int:
    rng = np.random.default_rng(seed)
    checks = 0
    for _ in range(50):
        res = Resolution(int(rng.integers(1, 600)), int(rng.integers(1, 600)))
        patch = int(rng.integers(1, 17))
        merge = int(rng.integers(1, 3))
        budget = int(rng.integers(1, 2000))
        out = smart_resize(res, patch, merge, budget)
        unit = patch * merge
        assert out.height % unit == 0 and out.width % unit == 0
        assert (out.height // unit) * (out.width // unit) <= budget
        again = smart_resize(out, patch, merge, budget)
        assert again == out, f"smart_resize not idempotent on {res}"
        checks += 1
    for _ in range(20):
        img = ImageBuffer.from_array(rng.random((int(rng.integers(1, 40)),
                                                  int(rng.integers(1, 40)))))
        target = Resolution(int(rng.integers(1, 40)), int(rng.integers(1, 40)))
        out = bilinear_resize(img, target)
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0
        checks += 1
    for _ in range(20):
        patch = int(rng.integers(1, 8))
        rows, cols = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        ch = int(rng.choice([1, 3]))
        img = ImageBuffer.from_array(rng.random((rows * patch, cols * patch, ch)))
        back = unpatchify(patchify(img, patch), ch)
        assert np.array_equal(back.data, img.data), "patchify round-trip broke"
        checks += 1
    return checks


def check_rope(seed: int) -> int:
    rng = np.random.default_rng(seed)
    cfg = rope2d.RopeConfig(head_dim=16)
    checks = 0
    for _ in range(200):
        v = rng.standard_normal(cfg.head_dim)
        p = rope2d.PositionIndex(int(rng.integers(0, 50)), int(rng.integers(0, 50)))
        out = rope2d.rope_rotate(v, p, cfg)
        assert abs(np.linalg.norm(out) - np.linalg.norm(v)) <= 1e-9 * np.linalg.norm(v)
        checks += 1
    for _ in range(200):
        u = rng.standard_normal(cfg.head_dim)
        v = rng.standard_normal(cfg.head_dim)
        p = rope2d.PositionIndex(int(rng.integers(0, 20)), int(rng.integers(0, 20)))
        q = rope2d.PositionIndex(int(rng.integers(0, 20)), int(rng.integers(0, 20)))
        d = rope2d.PositionIndex(int(rng.integers(0, 20)), int(rng.integers(0, 20)))
        a = rope2d.relative_inner_product_check(u, v, p, q, cfg)
        b = rope2d.relative_inner_product_check(
            u, v,
            rope2d.PositionIndex(p.row + d.row, p.col + d.col),
            rope2d.PositionIndex(q.row + d.row, q.col + d.col),
            cfg,
        )
        assert abs(a - b) <= 1e-6, "translation invariance violated"
        checks += 1
    return checks


def _brute_force_mask(seq: pruning.FrameSequence, cfg: pruning.PruneConfig):
    size = cfg.region_size
    rows, cols = seq.height // size, seq.width // size
    keep = np.ones((len(seq), rows, cols), dtype=bool)
    for t in range(1, len(seq)):
        for r in range(rows):
            for c in range(cols):
                a = seq.frames[t].data[r * size:(r + 1) * size,
                                       c * size:(c + 1) * size]
                b = seq.frames[t - 1].data[r * size:(r + 1) * size,
                                           c * size:(c + 1) * size]
                dist = np.abs(a - b).sum()
                if cfg.normalized:
                    dist /= a.size
                keep[t, r, c] = not (dist < cfg.threshold)
    return keep


def check_pruning(seed: int) -> int:
    rng = np.random.default_rng(seed)
    checks = 0
    for _ in range(100):
        seq = _random_frames(rng, 3, 8, 8)
        cfg = pruning.PruneConfig(threshold=float(rng.random() * 0.3), region_size=2)
        mask = pruning.compute_prune_mask(seq, cfg)
        assert np.array_equal(mask.keep, _brute_force_mask(seq, cfg))
        checks += 1
    for _ in range(30):
        seq = _random_frames(rng, 4, 8, 8)
        t1, t2 = sorted(rng.random(2) * 0.3)
        drop1 = ~pruning.compute_prune_mask(
            seq, pruning.PruneConfig(threshold=float(t1), region_size=4)).keep
        drop2 = ~pruning.compute_prune_mask(
            seq, pruning.PruneConfig(threshold=float(t2), region_size=4)).keep
        assert not (drop1 & ~drop2).any(), "threshold monotonicity violated"
        checks += 1
    for t_count in (2, 5, 12):
        frame = ImageBuffer.from_array(rng.random((8, 8)))
        seq = pruning.FrameSequence(frames=(frame,) * t_count,
                                    timestamps=tuple(range(t_count)))
        stats = pruning.compression_stats(
            pruning.compute_prune_mask(seq, pruning.PruneConfig(0.1, 4)))
        assert stats.ratio == (t_count - 1) / t_count, "static-video law violated"
        checks += 1
    return checks


def check_pipeline(seed: int) -> int:
    rng = np.random.default_rng(seed)
    checks = 0
    stamps = pipeline.sample_timestamps(200.0, pipeline.SamplingPolicy())
    assert len(stamps) == 180 and all(b > a for a, b in zip(stamps, stamps[1:]))
    assert pipeline.sample_timestamps(5.0, pipeline.SamplingPolicy()) == [0, 1, 2, 3, 4]
    checks += 2
    budget = TokenBudget(max_total_tokens=64, max_vision_tokens=32)
    encoder = pipeline.make_encoder("randproj", seed)
    for _ in range(60):
        frames = int(rng.integers(1, 6))
        seq = _random_frames(rng, frames, 8, 8)
        try:
            out = pipeline.tokenize_video(
                seq, encoder, pruning.PruneConfig(0.1, 4), budget,
                patch_size=2, merge=2,
            )
        except UnsatisfiableBudgetError as exc:
            assert (exc.vision_tokens > budget.max_vision_tokens
                    or exc.total_tokens > budget.max_total_tokens)
            checks += 1
            continue
        assert out.vision_count <= budget.max_vision_tokens
        assert out.total_count <= budget.max_total_tokens
        checks += 1
    return checks


def check_seqformat(seed: int) -> int:
    rng = np.random.default_rng(seed)
    checks = 0
    words = ("what", "happens", "next", "describe", "the", "scene")
    for _ in range(100):
        items = []
        for _ in range(int(rng.integers(1, 6))):
            if rng.random() < 0.7:
                items.append(seqformat.ImageTokens(int(rng.integers(1, 50))))
            else:
                items.append(seqformat.Text(str(rng.choice(words))))
        rendered = seqformat.render_image_sequence(items)
        assert seqformat.parse_image_sequence(rendered.text) == items
        checks += 1
    for _ in range(100):
        t = 0.0
        frames = []
        for _ in range(int(rng.integers(1, 6))):
            t += round(float(rng.integers(1, 30)) / 10, 1)
            frames.append(seqformat.FrameTokens(int(rng.integers(1, 50)), round(t, 1)))
        trailing = str(rng.choice(words)) if rng.random() < 0.5 else None
        rendered = seqformat.render_video_sequence(frames, trailing)
        assert seqformat.parse_video_sequence(rendered.text) == (frames, trailing)
        checks += 1
    for _ in range(100):
        start = round(float(rng.random() * 100), 3)
        end = round(start + float(rng.random() * 100), 3)
        text = seqformat.format_time_interval(start, end)
        s, e = seqformat.parse_time_interval(text)
        # One-decimal quantization error is at most 0.05 exactly; allow for
        # float round-off on half-boundary inputs like 28.25.
        tol = 0.05 + 1e-9
        assert abs(s - start) <= tol and abs(e - end) <= tol
        checks += 1
    return checks


def check_curation(seed: int) -> int:
    rng = np.random.default_rng(seed)
    checks = 0
    for _ in range(30):
        batch = [
            curation.CurationSample(
                id=f"s{i}",
                resolution=Resolution(int(rng.integers(1, 100)),
                                      int(rng.integers(1, 100))),
            )
            for i in range(int(rng.integers(1, 20)))
        ]
        kept, removed = curation.filter_aspect_ratio(batch, 1 / 3, 3.0)
        assert len(kept) + len(removed) == len(batch)
        assert {s.id for s in kept} | {s.id for s in removed} == {s.id for s in batch}
        assert not ({s.id for s in kept} & {s.id for s in removed})
        checks += 1
    cloud_a = rng.normal(0.0, 0.5, (20, 4))
    cloud_b = rng.normal(50.0, 0.5, (20, 4))
    feats = np.vstack([cloud_a, cloud_b])
    picks = curation.cluster_select(feats, k=2, per_cluster=1, seed=seed)
    assert len(picks) == 2 and (picks[0] < 20) != (picks[1] < 20)
    for _ in range(5):
        assert curation.cluster_select(feats, 2, 1, seed) == picks
    checks += 6
    return checks


SUITES = (
    ("geometry", check_geometry),
    ("rope2d", check_rope),
    ("pruning", check_pruning),
    ("pipeline", check_pipeline),
    ("seqformat", check_seqformat),
    ("curation", check_curation),
)


def run_all(seed: int, out=print) -> bool:
    """Run every suite; returns True when all pass."""
    ok = True
    for name, fn in SUITES:
        try:
            n = fn(seed)
        except AssertionError as exc:
            out(f"FAIL {name}: {exc}")
            ok = False
        else:
            out(f"ok {name} ({n} checks)")
    return ok
