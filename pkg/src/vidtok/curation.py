"""Deterministic image-curation filter chain and OCR annotation synthesis.

Filters partition a batch into (kept, removed) without ever aborting, so a
pipeline of stages is just function composition.  Scoring models are
injected as plain callables; the package ships deterministic stubs for
testing, not real aesthetic or similarity models.  Captioning by external
models is likewise a pluggable call and intentionally not implemented here.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, VidtokError
from .geometry import Resolution

__all__ = [
    "TextBox",
    "CurationSample",
    "Scorer",
    "filter_aspect_ratio",
    "filter_by_score",
    "cluster_select",
    "reading_order",
    "compose_ocr_caption",
    "parse_ocr_caption",
    "OCR_TASKS",
    "InstructionRecord",
    "generate_ocr_instructions",
]

# Boxes whose top edges differ by at most this much are treated as one text
# row when sorting into reading order.
ROW_BAND_TOLERANCE = 0.02


@dataclass(frozen=True)
class TextBox:
    """A text string and its (x1, y1, x2, y2) box, normalized to [0, 1]."""

    text: str
    box: tuple[float, float, float, float]

    def __post_init__(self):
        x1, y1, x2, y2 = self.box
        if not (0.0 <= x1 <= x2 <= 1.0) or not (0.0 <= y1 <= y2 <= 1.0):
            raise ConfigError(
                f"box must satisfy 0 <= x1 <= x2 <= 1 and 0 <= y1 <= y2 <= 1, "
                f"got {self.box}"
            )
        object.__setattr__(self, "box", tuple(float(v) for v in self.box))


@dataclass(frozen=True)
class CurationSample:
    """One image record flowing through the filter chain."""

    id: str
    resolution: Resolution
    caption: Optional[str] = None
    feature: Optional[np.ndarray] = field(default=None, repr=False)
    scores: dict[str, float] = field(default_factory=dict)
    boxes: tuple[TextBox, ...] = ()
    notes: tuple[str, ...] = ()


Scorer = Callable[[CurationSample], float]


def filter_aspect_ratio(
    batch: Sequence[CurationSample], min_ratio: float, max_ratio: float
) -> tuple[list[CurationSample], list[CurationSample]]:
    """Keep samples whose width/height ratio lies inside [min_ratio, max_ratio]."""
    if not 0 < min_ratio <= max_ratio:
        raise ConfigError(
            f"need 0 < min_ratio <= max_ratio, got {min_ratio}, {max_ratio}"
        )
    kept, removed = [], []
    for sample in batch:
        ratio = sample.resolution.width / sample.resolution.height
        (kept if min_ratio <= ratio <= max_ratio else removed).append(sample)
    return kept, removed


def filter_by_score(
    batch: Sequence[CurationSample],
    scorer: Scorer,
    score_name: str,
    threshold: float,
) -> tuple[list[CurationSample], list[CurationSample]]:
    """Score every sample, keep those at or above the threshold.

    The computed score is recorded under ``score_name`` on kept and removed
    samples alike.  A scorer failure routes the sample to removed with a
    note instead of aborting the batch.
    """
    kept, removed = [], []
    for sample in batch:
        try:
            score = float(scorer(sample))
        except Exception as exc:  # scorer bugs must not kill the pipeline
            removed.append(
                replace(
                    sample,
                    notes=sample.notes + (f"{score_name}: scorer failed: {exc}",),
                )
            )
            continue
        scored = replace(sample, scores={**sample.scores, score_name: score})
        (kept if score >= threshold else removed).append(scored)
    return kept, removed


def _farthest_point_init(features: np.ndarray, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    # The first center is the extreme point along a seeded direction, a
    # content-based pick, so reordering the batch permutes the selection
    # instead of changing it.
    direction = rng.standard_normal(features.shape[1])
    centers = [int(np.argmax(features @ direction))]
    dist = np.linalg.norm(features - features[centers[0]], axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(dist))  # argmax takes the lowest index on ties
        centers.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(features - features[nxt], axis=1))
    return features[centers].copy()


def cluster_select(
    features: Sequence, k: int, per_cluster: int, seed: int, max_iter: int = 100
) -> list[int]:
    """Pick diverse representatives: cluster, then take the most central members.

    Lloyd iterations from a seeded farthest-point initialization; from each
    non-empty cluster the ``per_cluster`` members nearest its centroid are
    selected (ties resolved toward the lower index).  With fewer samples
    than clusters every sample is its own cluster and all are selected.
    Output indices are sorted and unique; the result is a pure function of
    (features, k, per_cluster, seed).
    """
    if k < 1 or per_cluster < 1:
        raise ConfigError("k and per_cluster must be >= 1")
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] == 0:
        raise ConfigError("features must be a non-empty list of same-length vectors")
    n = feats.shape[0]
    if n <= k:
        return list(range(n))

    centroids = _farthest_point_init(feats, k, seed)
    assign = None
    for _ in range(max_iter):
        dists = np.linalg.norm(feats[:, None, :] - centroids[None, :, :], axis=2)
        new_assign = dists.argmin(axis=1)
        if assign is not None and (new_assign == assign).all():
            break
        assign = new_assign
        for c in range(k):
            members = feats[assign == c]
            if len(members):
                centroids[c] = members.mean(axis=0)

    selected: set[int] = set()
    for c in range(k):
        members = np.flatnonzero(assign == c)
        if len(members) == 0:
            continue
        d = np.linalg.norm(feats[members] - centroids[c], axis=1)
        order = np.lexsort((members, d))  # distance, then lower index
        selected.update(int(members[i]) for i in order[:per_cluster])
    return sorted(selected)


def reading_order(boxes: Sequence[TextBox]) -> list[TextBox]:
    """Sort boxes top-to-bottom, then left-to-right.

    Boxes whose top edges lie within ROW_BAND_TOLERANCE of the first box in
    a band belong to the same text row.
    """
    by_top = sorted(range(len(boxes)), key=lambda i: (boxes[i].box[1], i))
    bands: list[list[int]] = []
    band_top = None
    for i in by_top:
        top = boxes[i].box[1]
        if band_top is None or top - band_top > ROW_BAND_TOLERANCE:
            bands.append([i])
            band_top = top
        else:
            bands[-1].append(i)
    ordered: list[TextBox] = []
    for band in bands:
        band.sort(key=lambda i: (boxes[i].box[0], i))
        ordered.extend(boxes[i] for i in band)
    return ordered


_OCR_HEADER = ". The texts in this image are "


def _render_box(box: tuple[float, float, float, float]) -> str:
    return "<box>[" + ", ".join(f"{v:.3f}" for v in box) + "]</box>"


def compose_ocr_caption(caption: str, boxes: Sequence[TextBox]) -> str:
    """Append located text annotations to a caption.

    Produces ``{caption}. The texts in this image are
    {text}<box>[x1, y1, x2, y2]</box>, ...`` with three-decimal coordinates.
    With zero boxes the header is still emitted with an empty list.
    """
    if not caption:
        raise VidtokError("caption must be non-empty")
    for b in boxes:
        # Markup inside a box text would make the rendered caption ambiguous.
        if "<box>" in b.text or "</box>" in b.text:
            raise VidtokError(f"box text contains reserved markup: {b.text!r}")
    entries = ", ".join(b.text + _render_box(b.box) for b in boxes)
    return caption + _OCR_HEADER + entries


def parse_ocr_caption(text: str) -> tuple[str, list[TextBox]]:
    """Invert :func:`compose_ocr_caption`; box coordinates come back within 5e-4."""
    caption, sep, tail = text.partition(_OCR_HEADER)
    if not sep:
        raise VidtokError("missing text annotation header")
    boxes: list[TextBox] = []
    if tail:
        for entry in tail.split("</box>, "):
            if not entry.endswith("</box>"):
                entry += "</box>"
            body, sep2, coords = entry.rpartition("<box>[")
            if not sep2 or not coords.endswith("]</box>"):
                raise VidtokError(f"malformed box entry {entry!r}")
            values = [float(v) for v in coords[: -len("]</box>")].split(", ")]
            if len(values) != 4:
                raise VidtokError(f"expected 4 coordinates in entry {entry!r}")
            boxes.append(TextBox(text=body, box=tuple(values)))
    return caption, boxes


OCR_TASKS = (
    "existence",
    "localization",
    "recognition",
    "comparison",
    "full_read",
)

# Decoys for absent-text existence questions; deterministic, never random
# strings, so prompts stay reproducible and readable.
_ABSENT_CANDIDATES = (
    "ZEBRA", "QUARTZ", "NIMBUS", "FJORD", "GLYPH", "VORTEX", "PYLON", "WICKET",
)


@dataclass(frozen=True)
class InstructionRecord:
    task: str
    prompt: str
    answer: str


def generate_ocr_instructions(
    sample: CurationSample,
    task: str,
    seed: int,
    other: Optional[CurationSample] = None,
) -> InstructionRecord:
    """Synthesize one prompt/answer record for an OCR sub-task.

    Tasks: ``existence`` asks whether a (seeded choice of) present or absent
    string occurs; ``localization`` asks for the box of a chosen text;
    ``recognition`` asks for the text inside a given box; ``comparison``
    asks which of two images (``sample`` and ``other``) contains a text;
    ``full_read`` asks for every text with its box in reading order.
    Deterministic for a fixed seed.
    """
    if task not in OCR_TASKS:
        raise ConfigError(f"unknown task {task!r}; choose from {OCR_TASKS}")
    rng = np.random.default_rng(seed)

    if task == "comparison":
        if other is None:
            raise VidtokError("task comparison needs a second sample")
        if not sample.boxes and not other.boxes:
            raise VidtokError("task comparison needs boxes in at least one image")
        first_texts = {b.text for b in sample.boxes}
        second_texts = {b.text for b in other.boxes}
        exclusive = sorted((first_texts | second_texts) - (first_texts & second_texts))
        if not exclusive:
            raise VidtokError(
                "task comparison needs a text present in exactly one image"
            )
        target = exclusive[int(rng.integers(len(exclusive)))]
        answer = "Image 1" if target in first_texts else "Image 2"
        return InstructionRecord(
            task=task,
            prompt=f'Which image contains the text "{target}"?',
            answer=answer,
        )

    if not sample.boxes:
        raise VidtokError(f"task {task} needs at least one text box")

    if task == "existence":
        if rng.integers(2) == 1:
            target = sample.boxes[int(rng.integers(len(sample.boxes)))].text
            answer = "Yes"
        else:
            present = {b.text for b in sample.boxes}
            pool = [w for w in _ABSENT_CANDIDATES if w not in present]
            if not pool:
                raise VidtokError(
                    "task existence could not pick an absent decoy string"
                )
            target = pool[int(rng.integers(len(pool)))]
            answer = "No"
        return InstructionRecord(
            task=task,
            prompt=f'Is the text "{target}" present in the image?',
            answer=answer,
        )

    if task == "localization":
        box = sample.boxes[int(rng.integers(len(sample.boxes)))]
        return InstructionRecord(
            task=task,
            prompt=f'Where is the text "{box.text}" located in the image?',
            answer=_render_box(box.box),
        )

    if task == "recognition":
        box = sample.boxes[int(rng.integers(len(sample.boxes)))]
        return InstructionRecord(
            task=task,
            prompt=f"What text is contained in the region {_render_box(box.box)}?",
            answer=box.text,
        )

    # full_read
    ordered = reading_order(sample.boxes)
    answer = ", ".join(b.text + _render_box(b.box) for b in ordered)
    return InstructionRecord(
        task=task,
        prompt="Detect and recognize all text in the image, with bounding boxes.",
        answer=answer,
    )
