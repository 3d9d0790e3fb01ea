"""File ingest: PNG images, the raw intensity format, and frame directories.

Raw format (extension-agnostic, magic-sniffed):

    bytes 0..9    magic "VIDTOKRAW1" (ASCII)
    bytes 10..13  height, u32 little-endian
    bytes 14..17  width, u32 little-endian
    byte  18      channels, u8 (1 or 3)
    bytes 19..    height * width * channels float32 little-endian
                  intensities in [0, 1], row-major, channel-minor

A frame directory holds zero-padded numbered images (PNG or raw) plus a
``frames.meta`` sidecar:

    duration_s=<float>
    fps_src=<float>
    frame <index> <timestamp_s>
    frame <index> <timestamp_s>
    ...

Every ``frame`` line names the image whose numeric file stem equals
``<index>``.  Container decoding (mp4/mkv) is out of scope; produce frame
directories with an external decoder, e.g.::

    ffmpeg -i clip.mp4 -vf fps=1 frames/%06d.png

then write the sidecar with :func:`write_frames_meta`.
"""

from __future__ import annotations

import re
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import VidtokError
from .pruning import FrameSequence
from .geometry import ImageBuffer

__all__ = [
    "RAW_MAGIC",
    "read_image",
    "write_image",
    "read_raw",
    "write_raw",
    "read_png",
    "write_png",
    "read_frame_dir",
    "write_frame_dir",
    "write_frames_meta",
]

RAW_MAGIC = b"VIDTOKRAW1"
_RAW_HEADER = struct.Struct("<10sIIB")


def read_raw(path) -> ImageBuffer:
    blob = Path(path).read_bytes()
    if len(blob) < _RAW_HEADER.size:
        raise VidtokError(f"{path}: truncated raw header")
    magic, height, width, channels = _RAW_HEADER.unpack_from(blob)
    if magic != RAW_MAGIC:
        raise VidtokError(f"{path}: bad magic {magic!r}")
    count = height * width * channels
    payload = blob[_RAW_HEADER.size:]
    if len(payload) != 4 * count:
        raise VidtokError(
            f"{path}: expected {4 * count} payload bytes, got {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    return ImageBuffer(height=height, width=width, channels=channels, data=data)


def write_raw(image: ImageBuffer, path) -> None:
    header = _RAW_HEADER.pack(RAW_MAGIC, image.height, image.width, image.channels)
    payload = image.data.astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_png(path) -> ImageBuffer:
    """Load a PNG, strip alpha, normalize to [0, 1] float."""
    with Image.open(path) as img:
        if img.mode in ("RGBA", "P", "CMYK"):
            img = img.convert("RGB")
        elif img.mode == "LA":
            img = img.convert("L")
        elif img.mode not in ("RGB", "L"):
            img = img.convert("RGB")
        arr = np.asarray(img, dtype=np.float64) / 255.0
    return ImageBuffer.from_array(arr)


def write_png(image: ImageBuffer, path) -> None:
    arr = np.clip(np.rint(image.data * 255.0), 0, 255).astype(np.uint8)
    if image.channels == 1:
        pil = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(arr, mode="RGB")
    pil.save(path, format="PNG")


def read_image(path) -> ImageBuffer:
    """Dispatch on content: raw magic first, PNG otherwise."""
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(len(RAW_MAGIC))
    if head == RAW_MAGIC:
        return read_raw(path)
    return read_png(path)


def write_image(image: ImageBuffer, path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".raw":
        write_raw(image, path)
    else:
        write_png(image, path)


_FRAME_LINE = re.compile(r"^frame\s+(\d+)\s+(\S+)\s*$")


def _parse_meta(text: str, where: str) -> tuple[float, float, list[tuple[int, float]]]:
    duration = fps_src = None
    entries: list[tuple[int, float]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("duration_s="):
            duration = float(line.partition("=")[2])
        elif line.startswith("fps_src="):
            fps_src = float(line.partition("=")[2])
        else:
            m = _FRAME_LINE.match(line)
            if not m:
                raise VidtokError(f"{where}:{lineno}: unrecognized line {line!r}")
            entries.append((int(m.group(1)), float(m.group(2))))
    if duration is None or fps_src is None:
        raise VidtokError(f"{where}: missing duration_s= or fps_src= header")
    if not entries:
        raise VidtokError(f"{where}: no frame lines")
    return duration, fps_src, entries


def read_frame_dir(directory) -> tuple[FrameSequence, float, float]:
    """Load a frame directory; returns (sequence, duration_s, fps_src)."""
    directory = Path(directory)
    meta_path = directory / "frames.meta"
    if not meta_path.is_file():
        raise VidtokError(f"{directory}: missing frames.meta sidecar")
    duration, fps_src, entries = _parse_meta(meta_path.read_text(), str(meta_path))

    by_index: dict[int, Path] = {}
    for p in sorted(directory.iterdir()):
        if p.suffix.lower() in (".png", ".raw") and p.stem.isdigit():
            by_index[int(p.stem)] = p

    frames = []
    timestamps = []
    for index, ts in sorted(entries):
        if index not in by_index:
            raise VidtokError(f"{directory}: no image file for frame index {index}")
        frames.append(read_image(by_index[index]))
        timestamps.append(ts)
    return FrameSequence(frames=tuple(frames), timestamps=tuple(timestamps)), duration, fps_src


def write_frames_meta(path, duration_s: float, fps_src: float,
                      timestamps) -> None:
    lines = [f"duration_s={duration_s}", f"fps_src={fps_src}"]
    lines += [f"frame {i} {t}" for i, t in enumerate(timestamps)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_frame_dir(seq: FrameSequence, directory, duration_s: float | None = None,
                    fps_src: float = 1.0, fmt: str = "png") -> Path:
    """Write frames as zero-padded numbered files plus the sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    suffix = ".raw" if fmt == "raw" else ".png"
    for i, frame in enumerate(seq.frames):
        write_image(frame, directory / f"{i:06d}{suffix}")
    if duration_s is None:
        duration_s = seq.timestamps[-1] + 1.0
    write_frames_meta(directory / "frames.meta", duration_s, fps_src, seq.timestamps)
    return directory
