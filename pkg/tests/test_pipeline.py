"""Tests for sampling, token downsampling, encoding, and budget enforcement."""

import dataclasses

import numpy as np
import pytest

from vidtok import (
    ConfigError,
    ContractViolationError,
    DimensionMismatchError,
    FrameSequence,
    PatchGrid,
    PruneConfig,
    SamplingPolicy,
    TextToken,
    TokenBudget,
    TokenSequence,
    UnsatisfiableBudgetError,
    VisionToken,
    apply_mask,
    compute_prune_mask,
    downsample_tokens,
    enforce_budget,
    identity_encoder,
    make_encoder,
    patchify,
    random_projection_encoder,
    sample_timestamps,
    tokenize_video,
    uniform_indices,
)
from support import assert_tokens_equal, random_sequence


def synthetic_sequence(tokens_per_frame, n_frames, text=0):
    """Build a TokenSequence of placeholder vision tokens plus text."""
    elements = []
    for f in range(n_frames):
        for i in range(tokens_per_frame):
            elements.append(VisionToken(
                frame=f, position=(0, i), timestamp=float(f),
                feature=np.zeros(2)))
    elements.extend(TextToken(text="x") for _ in range(text))
    return TokenSequence(elements=tuple(elements))


class TestSampleTimestamps:
    def test_five_second_clip(self):
        assert sample_timestamps(5.0, SamplingPolicy()) == [0.0, 1.0, 2.0, 3.0, 4.0]

    def test_long_clip_capped_at_max_frames(self):
        stamps = sample_timestamps(200.0, SamplingPolicy(fps=1.0, max_frames=180))
        assert len(stamps) == 180
        assert all(b > a for a, b in zip(stamps, stamps[1:]))
        assert stamps[0] == 0.0
        assert set(stamps) <= {float(i) for i in range(200)}

    def test_sub_second_clip_yields_one_stamp(self):
        assert sample_timestamps(0.5, SamplingPolicy()) == [0.0]

    def test_two_fps(self):
        got = sample_timestamps(3.0, SamplingPolicy(fps=2.0))
        assert got == [0.0, 0.5, 1.0, 1.5, 2.0, 2.5]

    def test_stamps_never_reach_duration(self):
        rng = np.random.default_rng(401)
        for _ in range(50):
            duration = float(rng.uniform(0.1, 50.0))
            fps = float(rng.choice([0.5, 1.0, 2.0, 3.0]))
            policy = SamplingPolicy(fps=fps, max_frames=int(rng.integers(1, 60)))
            stamps = sample_timestamps(duration, policy)
            assert 1 <= len(stamps) <= policy.max_frames
            assert all(0.0 <= t < duration for t in stamps)
            assert all(b > a for a, b in zip(stamps, stamps[1:]))

    def test_non_positive_duration(self):
        with pytest.raises(ConfigError):
            sample_timestamps(0.0, SamplingPolicy())

    def test_policy_validation(self):
        with pytest.raises(ConfigError):
            SamplingPolicy(fps=0.0)
        with pytest.raises(ConfigError):
            SamplingPolicy(max_frames=0)


class TestUniformIndices:
    def test_small_n_passthrough(self):
        assert uniform_indices(3, 5) == [0, 1, 2]
        assert uniform_indices(4, 4) == [0, 1, 2, 3]

    def test_twenty_to_ten(self):
        assert uniform_indices(20, 10) == [0, 2, 4, 6, 8, 10, 12, 14, 16, 18]

    def test_floor_spacing(self):
        assert uniform_indices(5, 2) == [0, 2]
        assert uniform_indices(7, 3) == [0, 2, 4]

    def test_always_starts_at_zero_and_increases(self):
        rng = np.random.default_rng(402)
        for _ in range(100):
            n = int(rng.integers(1, 400))
            k = int(rng.integers(1, 200))
            idx = uniform_indices(n, k)
            assert idx[0] == 0
            assert len(idx) == min(n, k)
            assert all(b > a for a, b in zip(idx, idx[1:]))
            assert all(0 <= i < n for i in idx)


class TestDownsampleTokens:
    def test_identical_vectors_average_to_themselves(self):
        v = np.array([0.2, 0.9, 0.4])
        grid = PatchGrid(rows=2, cols=2, patch_size=1, cells=np.tile(v, (4, 1)))
        out = downsample_tokens(grid, 2)
        assert (out.rows, out.cols) == (1, 1)
        assert np.array_equal(out.cells[0], v)

    def test_scalar_block_mean(self):
        cells = np.array([[1.0], [2.0], [3.0], [4.0]])
        grid = PatchGrid(rows=2, cols=2, patch_size=1, cells=cells)
        out = downsample_tokens(grid, 2)
        assert out.cells.tolist() == [[2.5]]

    def test_four_by_four_ramp(self):
        vals = np.arange(16.0).reshape(16, 1)
        grid = PatchGrid(rows=4, cols=4, patch_size=1, cells=vals)
        out = downsample_tokens(grid, 2)
        # Row-major 4x4 ramp: each 2x2 block mean is the block centre value.
        want = np.array([[2.5], [4.5], [10.5], [12.5]])
        assert np.allclose(out.cells, want, atol=1e-12)
        assert (out.rows, out.cols) == (2, 2)

    def test_block_mean_oracle(self):
        rng = np.random.default_rng(403)
        grid = PatchGrid(rows=6, cols=4, patch_size=1,
                         cells=rng.random((24, 5)))
        out = downsample_tokens(grid, 2)
        for r in range(3):
            for c in range(2):
                block = [grid.cell(2 * r + i, 2 * c + j)
                         for i in range(2) for j in range(2)]
                want = np.mean(block, axis=0)
                assert np.allclose(out.cell(r, c), want, atol=1e-12)

    def test_factor_one_is_identity(self):
        rng = np.random.default_rng(404)
        grid = PatchGrid(rows=2, cols=3, patch_size=1, cells=rng.random((6, 4)))
        out = downsample_tokens(grid, 1)
        assert np.array_equal(out.cells, grid.cells)

    def test_footprint_scales_with_factor(self):
        grid = PatchGrid(rows=2, cols=2, patch_size=14, cells=np.zeros((4, 7)))
        out = downsample_tokens(grid, 2)
        assert out.patch_size == 28

    def test_non_divisible_grid_rejected(self):
        grid = PatchGrid(rows=3, cols=4, patch_size=1, cells=np.zeros((12, 2)))
        with pytest.raises(DimensionMismatchError):
            downsample_tokens(grid, 2)

    def test_bad_factor(self):
        grid = PatchGrid(rows=2, cols=2, patch_size=1, cells=np.zeros((4, 2)))
        with pytest.raises(ConfigError):
            downsample_tokens(grid, 0)


class TestEncoders:
    def test_identity_passthrough(self):
        rng = np.random.default_rng(405)
        grid = PatchGrid(rows=2, cols=2, patch_size=2, cells=rng.random((4, 8)))
        assert identity_encoder(grid) is grid

    def test_random_projection_deterministic(self):
        rng = np.random.default_rng(406)
        grid = PatchGrid(rows=2, cols=2, patch_size=2, cells=rng.random((4, 8)))
        a = random_projection_encoder(seed=5)(grid)
        b = random_projection_encoder(seed=5)(grid)
        assert np.array_equal(a.cells, b.cells)
        c = random_projection_encoder(seed=6)(grid)
        assert not np.array_equal(a.cells, c.cells)
        assert (a.rows, a.cols) == (grid.rows, grid.cols)

    def test_make_encoder_names(self):
        assert make_encoder("identity") is identity_encoder
        enc = make_encoder("randproj", seed=3)
        grid = PatchGrid(rows=1, cols=2, patch_size=2, cells=np.zeros((2, 8)))
        assert enc(grid).cells.shape[0] == 2
        with pytest.raises(ConfigError):
            make_encoder("bogus")

    def test_shape_changing_encoder_rejected(self):
        rng = np.random.default_rng(407)
        seq = random_sequence(rng, 1, 4, 4)

        def transposing(grid):
            return PatchGrid(rows=grid.cols, cols=grid.rows,
                             patch_size=grid.patch_size, cells=grid.cells)

        def widening(grid):
            cells = np.concatenate([grid.cells, grid.cells], axis=0)
            return PatchGrid(rows=grid.rows * 2, cols=grid.cols,
                             patch_size=grid.patch_size, cells=cells)

        for bad in (widening,):
            with pytest.raises(ContractViolationError):
                tokenize_video(seq, bad, PruneConfig(), TokenBudget(),
                               patch_size=2, merge=2)
        # Square inputs do not expose transposition, so probe with a
        # non-square clip.
        seq = random_sequence(rng, 1, 4, 8)
        with pytest.raises(ContractViolationError):
            tokenize_video(seq, transposing, PruneConfig(), TokenBudget(),
                           patch_size=2, merge=2)


class TestTokenizeVideo:
    def test_single_frame_token_count(self):
        rng = np.random.default_rng(408)
        seq = random_sequence(rng, 1, 28, 56)
        out = tokenize_video(seq, identity_encoder, PruneConfig(),
                             TokenBudget(), patch_size=14, merge=2)
        # 28x56 at patch 14 merge 2: one 1x2 post-merge grid.
        assert out.vision_count == 2
        assert out.total_count == 2

    def test_static_clip_costs_one_frame(self):
        frame_seq = random_sequence(np.random.default_rng(409), 1, 8, 8)
        static = FrameSequence(
            frames=frame_seq.frames * 5,
            timestamps=tuple(float(i) for i in range(5)),
        )
        out = tokenize_video(static, identity_encoder, PruneConfig(),
                             TokenBudget(), patch_size=2, merge=2)
        single = tokenize_video(frame_seq, identity_encoder, PruneConfig(),
                                TokenBudget(), patch_size=2, merge=2)
        assert out.vision_count == single.vision_count == 4
        assert {t.frame for t in out.vision_tokens()} == {0}

    def test_matches_manual_composition(self):
        rng = np.random.default_rng(410)
        for _ in range(10):
            n = int(rng.integers(1, 4))
            seq = random_sequence(rng, n, 8, 12)
            prune = PruneConfig(threshold=0.2)
            enc = random_projection_encoder(seed=9, dim=6)
            got = tokenize_video(seq, enc, prune, TokenBudget(),
                                 patch_size=2, merge=2)
            grids = [downsample_tokens(enc(patchify(f, 2)), 2)
                     for f in seq.frames]
            mask = compute_prune_mask(
                seq, dataclasses.replace(prune, region_size=4))
            want = apply_mask(grids, mask, seq.timestamps)
            assert_tokens_equal(list(got.elements), want)

    def test_deterministic(self):
        rng = np.random.default_rng(411)
        seq = random_sequence(rng, 3, 8, 8)
        enc = random_projection_encoder(seed=2, dim=4)
        a = tokenize_video(seq, enc, PruneConfig(), TokenBudget(), 2, 2)
        b = tokenize_video(seq, enc, PruneConfig(), TokenBudget(), 2, 2)
        assert_tokens_equal(list(a.elements), list(b.elements))

    def test_max_frames_cap_applies_before_tokenizing(self):
        rng = np.random.default_rng(412)
        seq = random_sequence(rng, 10, 4, 4)
        policy = SamplingPolicy(max_frames=4)
        out = tokenize_video(seq, identity_encoder, PruneConfig(threshold=0.0),
                             TokenBudget(), 2, 2, policy=policy)
        want_stamps = [seq.timestamps[i] for i in uniform_indices(10, 4)]
        assert out.frame_timestamps() == want_stamps

    def test_non_multiple_dimensions_rejected(self):
        rng = np.random.default_rng(413)
        seq = random_sequence(rng, 1, 6, 8)
        with pytest.raises(DimensionMismatchError):
            tokenize_video(seq, identity_encoder, PruneConfig(),
                           TokenBudget(), patch_size=2, merge=2)

    def test_over_budget_single_frame_raises(self):
        rng = np.random.default_rng(414)
        seq = random_sequence(rng, 1, 16, 16)
        budget = TokenBudget(max_total_tokens=10, max_vision_tokens=10)
        with pytest.raises(UnsatisfiableBudgetError) as info:
            tokenize_video(seq, identity_encoder, PruneConfig(threshold=0.0),
                           budget, patch_size=2, merge=2)
        err = info.value
        # One 16x16 frame at patch 2 merge 2 is a 4x4 post-merge grid.
        assert err.vision_tokens == 16
        assert err.max_vision_tokens == 10


class TestEnforceBudget:
    def test_under_budget_returns_same_object(self):
        seq = synthetic_sequence(tokens_per_frame=10, n_frames=3, text=2)
        out = enforce_budget(seq, TokenBudget(), SamplingPolicy())
        assert out is seq

    def test_twenty_frames_drop_to_ten(self):
        seq = synthetic_sequence(tokens_per_frame=1000, n_frames=20)
        out = enforce_budget(
            seq,
            TokenBudget(max_total_tokens=16384, max_vision_tokens=10240),
            SamplingPolicy(),
        )
        assert out.vision_count == 10 * 1000
        assert out.frame_timestamps() == [float(i) for i in range(0, 20, 2)]

    def test_text_tokens_survive(self):
        seq = synthetic_sequence(tokens_per_frame=100, n_frames=8, text=5)
        out = enforce_budget(
            seq,
            TokenBudget(max_total_tokens=1000, max_vision_tokens=300),
            SamplingPolicy(),
        )
        texts = [e for e in out.elements if isinstance(e, TextToken)]
        assert len(texts) == 5
        assert out.vision_count <= 300

    def test_total_budget_counts_text(self):
        # Vision alone fits (400 <= 400) but vision plus text busts the total.
        seq = synthetic_sequence(tokens_per_frame=100, n_frames=4, text=50)
        out = enforce_budget(
            seq,
            TokenBudget(max_total_tokens=420, max_vision_tokens=400),
            SamplingPolicy(),
        )
        assert out.total_count == 350
        assert out.vision_count == 300

    def test_single_oversized_frame_raises_with_counts(self):
        seq = synthetic_sequence(tokens_per_frame=20000, n_frames=1)
        with pytest.raises(UnsatisfiableBudgetError) as info:
            enforce_budget(seq, TokenBudget(), SamplingPolicy())
        err = info.value
        assert err.vision_tokens == 20000
        assert err.total_tokens == 20000
        assert err.max_vision_tokens == 10240
        assert err.max_total_tokens == 16384
        assert "20000" in str(err)

    def test_never_violates_budget_fuzz(self):
        rng = np.random.default_rng(415)
        for _ in range(100):
            n = int(rng.integers(1, 15))
            per = int(rng.integers(1, 40))
            text = int(rng.integers(0, 10))
            seq = synthetic_sequence(per, n, text)
            vision_cap = int(rng.integers(1, 400))
            total_cap = vision_cap + int(rng.integers(0, 100))
            budget = TokenBudget(max_total_tokens=total_cap,
                                 max_vision_tokens=vision_cap)
            try:
                out = enforce_budget(seq, budget, SamplingPolicy())
            except UnsatisfiableBudgetError:
                assert per > vision_cap or per + text > total_cap
                continue
            assert out.vision_count <= vision_cap
            assert out.total_count <= total_cap

    def test_respects_policy_max_frames(self):
        seq = synthetic_sequence(tokens_per_frame=10, n_frames=12)
        out = enforce_budget(
            seq,
            TokenBudget(max_total_tokens=200, max_vision_tokens=110),
            SamplingPolicy(max_frames=5),
        )
        assert len(out.frame_timestamps()) <= 5


class TestTokenSequence:
    def test_counts_and_timestamps(self):
        elements = (
            VisionToken(frame=0, position=(0, 0), timestamp=0.0, feature=np.zeros(1)),
            TextToken(text="hi"),
            VisionToken(frame=0, position=(0, 1), timestamp=0.0, feature=np.zeros(1)),
            VisionToken(frame=1, position=(0, 0), timestamp=2.0, feature=np.zeros(1)),
        )
        seq = TokenSequence(elements=elements)
        assert seq.vision_count == 3
        assert seq.total_count == 4
        assert seq.frame_timestamps() == [0.0, 2.0]
        assert len(seq.vision_tokens()) == 3
