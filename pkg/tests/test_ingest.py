"""Tests for image files, the raw intensity format, and frame directories."""

import struct

import numpy as np
import pytest
from PIL import Image

from vidtok import VidtokError, FrameSequence, ImageBuffer, read_frame_dir, write_frame_dir
from vidtok.ingest import (
    RAW_MAGIC,
    read_image,
    read_png,
    read_raw,
    write_frames_meta,
    write_image,
    write_png,
    write_raw,
)


def f32_image(rng, h, w, c=1):
    # Round-trip through float32 so raw read-back is bit-exact.
    data = rng.random((h, w, c)).astype(np.float32).astype(np.float64)
    return ImageBuffer.from_array(data)


class TestRawFormat:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(501)
        img = f32_image(rng, 5, 7, 3)
        path = tmp_path / "a.raw"
        write_raw(img, path)
        back = read_raw(path)
        assert (back.height, back.width, back.channels) == (5, 7, 3)
        assert np.array_equal(back.data, img.data)

    def test_exact_byte_layout(self, tmp_path):
        img = ImageBuffer.from_array(np.array([[0.0, 0.5, 1.0],
                                               [1.0, 0.25, 0.0]]))
        path = tmp_path / "b.raw"
        write_raw(img, path)
        blob = path.read_bytes()
        want = RAW_MAGIC + struct.pack("<IIB", 2, 3, 1)
        want += struct.pack("<6f", 0.0, 0.5, 1.0, 1.0, 0.25, 0.0)
        assert blob == want

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "c.raw"
        path.write_bytes(b"NOTAFORMAT" + struct.pack("<IIB", 1, 1, 1) + b"\0" * 4)
        with pytest.raises(VidtokError, match="magic"):
            read_raw(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "d.raw"
        path.write_bytes(RAW_MAGIC[:4])
        with pytest.raises(VidtokError, match="truncated"):
            read_raw(path)

    def test_payload_length_mismatch(self, tmp_path):
        path = tmp_path / "e.raw"
        path.write_bytes(RAW_MAGIC + struct.pack("<IIB", 2, 2, 1) + b"\0" * 8)
        with pytest.raises(VidtokError, match="payload"):
            read_raw(path)


class TestPng:
    def test_round_trip_exact_on_quantized_values(self, tmp_path):
        rng = np.random.default_rng(502)
        data = rng.integers(0, 256, size=(6, 4, 3)).astype(np.float64) / 255.0
        img = ImageBuffer.from_array(data)
        path = tmp_path / "a.png"
        write_png(img, path)
        back = read_png(path)
        assert np.array_equal(back.data, img.data)

    def test_grayscale_round_trip(self, tmp_path):
        data = np.array([[0.0, 1.0], [128 / 255.0, 17 / 255.0]])
        img = ImageBuffer.from_array(data)
        path = tmp_path / "g.png"
        write_png(img, path)
        back = read_png(path)
        assert back.channels == 1
        assert np.array_equal(back.data[:, :, 0], data)

    def test_alpha_is_stripped(self, tmp_path):
        rgba = Image.new("RGBA", (3, 2), (10, 20, 30, 128))
        path = tmp_path / "rgba.png"
        rgba.save(path)
        img = read_png(path)
        assert img.channels == 3
        assert np.allclose(img.data[0, 0], [10 / 255, 20 / 255, 30 / 255])


class TestDispatch:
    def test_read_image_sniffs_raw_magic_regardless_of_suffix(self, tmp_path):
        rng = np.random.default_rng(503)
        img = f32_image(rng, 3, 3)
        path = tmp_path / "mislabeled.png"
        write_raw(img, path)
        back = read_image(path)
        assert np.array_equal(back.data, img.data)

    def test_write_image_dispatches_on_suffix(self, tmp_path):
        rng = np.random.default_rng(504)
        img = f32_image(rng, 3, 3)
        write_image(img, tmp_path / "x.raw")
        assert (tmp_path / "x.raw").read_bytes().startswith(RAW_MAGIC)
        write_image(img, tmp_path / "x.png")
        assert (tmp_path / "x.png").read_bytes().startswith(b"\x89PNG")


class TestFrameDir:
    def make_seq(self, rng, n=3):
        return FrameSequence(
            frames=tuple(f32_image(rng, 4, 6) for _ in range(n)),
            timestamps=tuple(float(i) * 0.5 for i in range(n)),
        )

    def test_round_trip_raw(self, tmp_path):
        rng = np.random.default_rng(505)
        seq = self.make_seq(rng)
        write_frame_dir(seq, tmp_path / "clip", duration_s=2.0, fps_src=2.0,
                        fmt="raw")
        back, duration, fps = read_frame_dir(tmp_path / "clip")
        assert duration == 2.0 and fps == 2.0
        assert back.timestamps == seq.timestamps
        for a, b in zip(back.frames, seq.frames):
            assert np.array_equal(a.data, b.data)

    def test_default_duration_extends_past_last_stamp(self, tmp_path):
        rng = np.random.default_rng(506)
        seq = self.make_seq(rng)
        write_frame_dir(seq, tmp_path / "clip", fmt="raw")
        _, duration, _ = read_frame_dir(tmp_path / "clip")
        assert duration == seq.timestamps[-1] + 1.0

    def test_zero_padded_filenames(self, tmp_path):
        rng = np.random.default_rng(507)
        seq = self.make_seq(rng, n=2)
        write_frame_dir(seq, tmp_path / "clip")
        assert (tmp_path / "clip" / "000000.png").is_file()
        assert (tmp_path / "clip" / "000001.png").is_file()
        assert (tmp_path / "clip" / "frames.meta").is_file()

    def test_missing_sidecar(self, tmp_path):
        (tmp_path / "clip").mkdir()
        with pytest.raises(VidtokError, match="frames.meta"):
            read_frame_dir(tmp_path / "clip")

    def test_missing_image_for_index(self, tmp_path):
        d = tmp_path / "clip"
        d.mkdir()
        write_frames_meta(d / "frames.meta", 1.0, 1.0, [0.0])
        with pytest.raises(VidtokError, match="frame index 0"):
            read_frame_dir(d)


class TestMetaParsing:
    def write_clip(self, tmp_path, meta_text):
        d = tmp_path / "clip"
        d.mkdir()
        rng = np.random.default_rng(508)
        write_raw(f32_image(rng, 2, 2), d / "000000.raw")
        (d / "frames.meta").write_text(meta_text)
        return d

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        d = self.write_clip(tmp_path, (
            "# produced by an external decoder\n"
            "\n"
            "duration_s=1.5\n"
            "fps_src=30\n"
            "frame 0 0.0\n"
        ))
        seq, duration, fps = read_frame_dir(d)
        assert (duration, fps, len(seq)) == (1.5, 30.0, 1)

    def test_missing_headers(self, tmp_path):
        d = self.write_clip(tmp_path, "frame 0 0.0\n")
        with pytest.raises(VidtokError, match="duration_s"):
            read_frame_dir(d)

    def test_unrecognized_line_reports_number(self, tmp_path):
        d = self.write_clip(tmp_path, (
            "duration_s=1\nfps_src=1\nframe 0 0.0\nbogus line\n"
        ))
        with pytest.raises(VidtokError, match=":4:"):
            read_frame_dir(d)

    def test_no_frame_lines(self, tmp_path):
        d = self.write_clip(tmp_path, "duration_s=1\nfps_src=1\n")
        with pytest.raises(VidtokError, match="no frame lines"):
            read_frame_dir(d)
