"""Serializers and parsers for the three multimodal sequence layouts.

Image sequences: one ``<|vis:N|>`` placeholder per image, items separated by
a single newline, text following the images after a newline.

Video sequences: each frame rendered as ``Time: <t>s<|vis:N|>``, frames
joined by ``,``, then a newline before any trailing text.

Streaming sequences: frames, user text and ``GPT: `` answers interleaved
verbatim with no extra separators.

``<|vis:N|>`` is a placeholder standing for N vision tokens; the span table
of a rendered sequence records where each placeholder sits and how many
tokens it stands for.  Timestamps render without decimals when integral
(``Time: 3s``) and with one decimal otherwise (``Time: 3.5s``).

Because the streaming layout has no separators, rendering enforces the
constraints that keep it parseable: text and answer payloads are non-empty,
contain neither the ``Time: ...s<|vis:N|>`` frame pattern nor the ``GPT: ``
marker, and bare text never immediately follows an answer or another text
(nothing would terminate the preceding span).  Image/video text payloads
must not contain newlines or placeholder syntax for the same reason.  Under
these rules every render round-trips exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .errors import SequenceFormatError

__all__ = [
    "ImageTokens",
    "FrameTokens",
    "Text",
    "Answer",
    "RenderedSequence",
    "render_image_sequence",
    "parse_image_sequence",
    "render_video_sequence",
    "parse_video_sequence",
    "render_streaming_sequence",
    "parse_streaming_sequence",
    "format_time_interval",
    "parse_time_interval",
]


@dataclass(frozen=True)
class ImageTokens:
    count: int


@dataclass(frozen=True)
class FrameTokens:
    count: int
    timestamp: float


@dataclass(frozen=True)
class Text:
    text: str


@dataclass(frozen=True)
class Answer:
    text: str


RenderItem = Union[ImageTokens, FrameTokens, Text, Answer]


@dataclass(frozen=True)
class RenderedSequence:
    """Rendered text plus (offset, count) spans for each vision placeholder."""

    text: str
    spans: tuple[tuple[int, int], ...]

    @property
    def vision_token_count(self) -> int:
        return sum(count for _, count in self.spans)


_PLACEHOLDER = re.compile(r"<\|vis:(\d+)\|>")
_TIMESTAMP = re.compile(r"(\d+(?:\.\d)?)")
_FRAME = re.compile(r"Time: (\d+(?:\.\d)?)s<\|vis:(\d+)\|>")
_ANSWER_MARK = "GPT: "


def _placeholder(count: int) -> str:
    if count < 1:
        raise SequenceFormatError(f"vision token count must be >= 1, got {count}")
    return f"<|vis:{count}|>"


def _format_timestamp(t: float) -> str:
    if t < 0:
        raise SequenceFormatError(f"timestamps must be >= 0, got {t}")
    if float(t).is_integer():
        return str(int(t))
    return f"{t:.1f}"


def _check_plain_text(s: str, kind: str) -> str:
    if s == "":
        raise SequenceFormatError(f"{kind} payloads must be non-empty")
    if "\n" in s:
        raise SequenceFormatError(f"{kind} payloads must not contain newlines")
    if _PLACEHOLDER.search(s):
        raise SequenceFormatError(
            f"{kind} payloads must not contain vision placeholders"
        )
    return s


def _check_stream_text(s: str, kind: str) -> str:
    if s == "":
        raise SequenceFormatError(f"{kind} payloads must be non-empty")
    if _FRAME.search(s) or _ANSWER_MARK in s:
        raise SequenceFormatError(
            f"{kind} payloads must not contain frame or answer markers"
        )
    return s


def _finalize(text: str) -> RenderedSequence:
    spans = tuple(
        (m.start(), int(m.group(1))) for m in _PLACEHOLDER.finditer(text)
    )
    return RenderedSequence(text=text, spans=spans)


def render_image_sequence(items: Sequence[RenderItem]) -> RenderedSequence:
    """Join image placeholders and trailing text with single newlines."""
    if not items:
        raise SequenceFormatError("image sequences need at least one item")
    parts = []
    for item in items:
        if isinstance(item, ImageTokens):
            parts.append(_placeholder(item.count))
        elif isinstance(item, Text):
            parts.append(_check_plain_text(item.text, "text"))
        else:
            raise SequenceFormatError(
                f"image sequences accept image and text items only, got "
                f"{type(item).__name__}"
            )
    return _finalize("\n".join(parts))


def parse_image_sequence(text: str) -> list[RenderItem]:
    if text == "":
        raise SequenceFormatError("cannot parse an empty image sequence")
    items: list[RenderItem] = []
    for part in text.split("\n"):
        m = _PLACEHOLDER.fullmatch(part)
        if m:
            items.append(ImageTokens(count=int(m.group(1))))
        else:
            items.append(Text(text=_check_plain_text(part, "text")))
    return items


def _render_frame(frame: FrameTokens) -> str:
    return f"Time: {_format_timestamp(frame.timestamp)}s{_placeholder(frame.count)}"


def render_video_sequence(
    frames: Sequence[FrameTokens], trailing_text: Optional[str] = None
) -> RenderedSequence:
    """Comma-join timestamped frames, newline before any trailing text."""
    if not frames:
        raise SequenceFormatError("video sequences need at least one frame")
    stamps = [f.timestamp for f in frames]
    if any(b <= a for a, b in zip(stamps, stamps[1:])):
        raise SequenceFormatError("frame timestamps must be strictly increasing")
    text = ",".join(_render_frame(f) for f in frames)
    if trailing_text is not None:
        text += "\n" + _check_plain_text(trailing_text, "text")
    return _finalize(text)


def parse_video_sequence(text: str) -> tuple[list[FrameTokens], Optional[str]]:
    video_part, sep, text_part = text.partition("\n")
    frames: list[FrameTokens] = []
    for chunk in video_part.split(","):
        m = _FRAME.fullmatch(chunk)
        if not m:
            raise SequenceFormatError(f"malformed frame chunk {chunk!r}")
        frames.append(FrameTokens(count=int(m.group(2)), timestamp=float(m.group(1))))
    stamps = [f.timestamp for f in frames]
    if any(b <= a for a, b in zip(stamps, stamps[1:])):
        raise SequenceFormatError("frame timestamps must be strictly increasing")
    return frames, (text_part if sep else None)


def render_streaming_sequence(events: Sequence[RenderItem]) -> RenderedSequence:
    """Interleave frames, text and answers verbatim, no separators."""
    parts = []
    last_ts = None
    previous = None
    for event in events:
        if isinstance(event, FrameTokens):
            if last_ts is not None and event.timestamp < last_ts:
                raise SequenceFormatError(
                    "frame timestamps must be non-decreasing across the stream"
                )
            last_ts = event.timestamp
            parts.append(_render_frame(event))
        elif isinstance(event, Answer):
            parts.append(_ANSWER_MARK + _check_stream_text(event.text, "answer"))
        elif isinstance(event, Text):
            if isinstance(previous, (Answer, Text)):
                raise SequenceFormatError(
                    "bare text cannot directly follow an answer or another "
                    "text; nothing would terminate the preceding span"
                )
            parts.append(_check_stream_text(event.text, "text"))
        else:
            raise SequenceFormatError(
                f"streaming sequences accept frame, text and answer items, "
                f"got {type(event).__name__}"
            )
        previous = event
    return _finalize("".join(parts))


def parse_streaming_sequence(text: str) -> list[RenderItem]:
    events: list[RenderItem] = []
    pos = 0
    while pos < len(text):
        m = _FRAME.match(text, pos)
        if m:
            events.append(
                FrameTokens(count=int(m.group(2)), timestamp=float(m.group(1)))
            )
            pos = m.end()
            continue
        is_answer = text.startswith(_ANSWER_MARK, pos)
        if is_answer:
            pos += len(_ANSWER_MARK)
        # Payload runs until the next frame or answer marker.
        frame_next = _FRAME.search(text, pos)
        answer_next = text.find(_ANSWER_MARK, pos)
        ends = [e for e in (frame_next.start() if frame_next else -1, answer_next)
                if e >= 0]
        end = min(ends) if ends else len(text)
        payload = text[pos:end]
        if payload == "":
            raise SequenceFormatError(
                f"empty {'answer' if is_answer else 'text'} span at offset {pos}"
            )
        events.append(Answer(payload) if is_answer else Text(payload))
        pos = end
    stamps = [e.timestamp for e in events if isinstance(e, FrameTokens)]
    if any(b < a for a, b in zip(stamps, stamps[1:])):
        raise SequenceFormatError(
            "frame timestamps must be non-decreasing across the stream"
        )
    return events


def format_time_interval(start: float, end: float) -> str:
    """Render a grounding interval with one decimal, e.g. ``1.0-2.0 s``."""
    if start < 0:
        raise SequenceFormatError(f"interval start must be >= 0, got {start}")
    if start > end:
        raise SequenceFormatError(
            f"interval start {start} must not exceed end {end}"
        )
    return f"{start:.1f}-{end:.1f} s"


_INTERVAL = re.compile(r"(\d+\.\d)-(\d+\.\d) s")


def parse_time_interval(text: str) -> tuple[float, float]:
    m = _INTERVAL.fullmatch(text)
    if not m:
        raise SequenceFormatError(f"malformed time interval {text!r}")
    start, end = float(m.group(1)), float(m.group(2))
    if start > end:
        raise SequenceFormatError(
            f"interval start {start} must not exceed end {end}"
        )
    return start, end
