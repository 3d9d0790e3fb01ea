"""Command-line interface.

Subcommands:

    tokenize         frame directory -> budgeted token sequence summary (JSON)
    prune-stats      per-frame kept/dropped token table (TSV), optional figure
    render-sequence  JSONL event list -> serialized sequence text
    curate           JSONL manifest -> kept/rejected manifests via staged filters
    selfcheck        run the synthetic invariant suites

Exit codes: 0 on success, 1 on input errors (unknown flags, unreadable or
malformed files), 2 on budget or contract violations.  All outputs are
byte-identical across runs for identical inputs and seeds.

Frames enter ``tokenize`` and ``prune-stats`` at their stored resolution,
snapped down to the nearest patch-lattice size with aspect ratio preserved;
no budget-driven shrinking happens here.  Token budgets are enforced by
uniform frame dropping alone, so a clip whose single frame exceeds the
budget fails with exit code 2 and the offending counts instead of being
silently degraded.  Callers who want budget-aware resolution reduction can
pre-resize with the library's ``smart_resize``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import struct
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import Config
from .curation import (
    CurationSample,
    TextBox,
    cluster_select,
    filter_aspect_ratio,
    filter_by_score,
)
from .errors import (
    BudgetExceededError,
    ContractViolationError,
    SequenceFormatError,
    VidtokError,
)
from .geometry import Resolution, smart_resize, bilinear_resize
from .ingest import read_frame_dir
from .pipeline import ENCODERS, make_encoder, tokenize_video
from .pruning import (
    FrameSequence,
    PruneConfig,
    compression_stats,
    compute_prune_mask,
)
from .seqformat import (
    Answer,
    FrameTokens,
    ImageTokens,
    Text,
    render_image_sequence,
    render_streaming_sequence,
    render_video_sequence,
)
from .selfcheck import run_all

__all__ = ["main", "build_parser"]

# Default bounds for the bare `aspect` curation stage (width/height).
ASPECT_BOUNDS = (1.0 / 3.0, 3.0)


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="vidtok",
        description="Vision-side preprocessing: any-resolution tokenization, "
        "frame pruning, sequence serialization, and dataset curation.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser(
        "tokenize",
        help="tokenize a frame directory into a budgeted token sequence",
        description="Read a frame directory (images plus a frames.meta "
        "sidecar), snap frames to the patch lattice, encode, prune and "
        "budget them, and write a JSON summary with a feature digest.",
    )
    p.add_argument("--frames", required=True, metavar="DIR",
                   help="frame directory containing a frames.meta sidecar")
    p.add_argument("--config", metavar="FILE",
                   help="key=value config file supplying defaults")
    p.add_argument("--patch", type=int, metavar="N",
                   help="patch size in pixels (default 14)")
    p.add_argument("--merge", type=int, metavar="N",
                   help="spatial merge factor (default 2)")
    p.add_argument("--threshold", type=float, metavar="X",
                   help="pruning distance threshold (default 0.1)")
    p.add_argument("--max-frames", type=int, metavar="N",
                   help="frame cap before tokenization (default 180)")
    p.add_argument("--budget-vision", type=int, metavar="N",
                   help="vision token budget (default 10240)")
    p.add_argument("--budget-total", type=int, metavar="N",
                   help="total token budget (default 16384)")
    p.add_argument("--encoder", choices=ENCODERS, default="identity",
                   help="feature encoder (default identity)")
    p.add_argument("--seed", type=int, metavar="N",
                   help="seed for seeded encoders (default 0)")
    p.add_argument("--out", metavar="FILE",
                   help="output JSON path (default: stdout)")
    p.set_defaults(func=_cmd_tokenize)

    p = sub.add_parser(
        "prune-stats",
        help="report kept/dropped token counts per frame",
        description="Compute the pruning mask for a frame directory and "
        "emit one tab-separated record per frame (frame index, timestamp, "
        "kept, dropped) followed by the overall compression ratio.",
    )
    p.add_argument("--frames", required=True, metavar="DIR",
                   help="frame directory containing a frames.meta sidecar")
    p.add_argument("--threshold", type=float, default=0.1, metavar="X",
                   help="pruning distance threshold (default 0.1)")
    p.add_argument("--region", type=int, default=28, metavar="N",
                   help="pruning region size in pixels (default 28)")
    p.add_argument("--out", metavar="FILE",
                   help="output TSV path (default: stdout)")
    p.add_argument("--plot", metavar="FILE",
                   help="also render a kept/dropped bar figure to FILE")
    p.set_defaults(func=_cmd_prune_stats)

    p = sub.add_parser(
        "render-sequence",
        help="serialize a JSONL event list into sequence text",
        description="Events are JSON objects, one per line: "
        '{"kind": "image", "count": N}, '
        '{"kind": "frame", "count": N, "timestamp": T}, '
        '{"kind": "text", "text": S} or {"kind": "answer", "text": S}. '
        "The rendered sequence is written without a trailing newline.",
    )
    p.add_argument("--format", required=True,
                   choices=("image", "video", "streaming"),
                   help="sequence layout to render")
    p.add_argument("--in", dest="infile", required=True, metavar="FILE",
                   help="JSONL event list ('-' for stdin)")
    p.add_argument("--out", metavar="FILE",
                   help="output text path (default: stdout)")
    p.add_argument("--spans", metavar="FILE",
                   help="also write placeholder spans and token counts as JSON")
    p.set_defaults(func=_cmd_render_sequence)

    p = sub.add_parser(
        "curate",
        help="run a staged filter chain over a sample manifest",
        description="The manifest is JSONL with fields id, width, height "
        "and optional caption, scores, feature (inline vector or .npy "
        "path), boxes.  Stages run left to right; kept samples go to "
        "--out, rejected ones to --rejects, both as JSONL.",
    )
    p.add_argument("--manifest", required=True, metavar="FILE",
                   help="input manifest (JSONL)")
    p.add_argument(
        "--stages", required=True, metavar="SPEC",
        help="comma-separated stages: aspect[:MIN:MAX], score:NAME:THRESHOLD, "
        "cluster:K:PER_CLUSTER (e.g. aspect,score:aesthetic:0.5,cluster:10:2)",
    )
    p.add_argument("--seed", type=int, default=0, metavar="N",
                   help="seed for clustering (default 0)")
    p.add_argument("--out", metavar="FILE",
                   help="kept-samples manifest path (default: stdout)")
    p.add_argument("--rejects", metavar="FILE",
                   help="rejected-samples manifest path (default: not written)")
    p.add_argument("--plot", metavar="FILE",
                   help="also render score histograms to FILE")
    p.set_defaults(func=_cmd_curate)

    p = sub.add_parser(
        "selfcheck",
        help="run the synthetic invariant suites",
        description="Run every invariant suite on seeded synthetic data and "
        "print one pass line per suite; any failure exits 2.",
    )
    p.add_argument("--seed", type=int, default=0, metavar="N",
                   help="seed for the synthetic data (default 0)")
    p.set_defaults(func=_cmd_selfcheck)

    return parser


def _write_text(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _dumps(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _align_frames(seq: FrameSequence, unit: int) -> tuple[Resolution, FrameSequence]:
    """Snap a sequence to the unit lattice (aspect-preserving, no budget)."""
    res = seq.frames[0].resolution
    cap = max(1, res.height // unit) * max(1, res.width // unit)
    target = smart_resize(res, unit, 1, cap)
    if target == res:
        return target, seq
    frames = tuple(bilinear_resize(f, target) for f in seq.frames)
    return target, FrameSequence(frames=frames, timestamps=seq.timestamps)


def _cmd_tokenize(args) -> int:
    cfg = Config.load(args.config) if args.config else Config()
    overrides = {
        "patch_size": args.patch,
        "merge_factor": args.merge,
        "prune_threshold": args.threshold,
        "max_frames": args.max_frames,
        "max_vision_tokens": args.budget_vision,
        "max_total_tokens": args.budget_total,
        "seed": args.seed,
    }
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})

    seq, duration, fps_src = read_frame_dir(args.frames)
    available = len(seq)
    source = seq.frames[0].resolution
    aligned, seq = _align_frames(seq, cfg.patch_size * cfg.merge_factor)

    encoder = make_encoder(args.encoder, cfg.seed)
    result = tokenize_video(
        seq, encoder, cfg.prune(), cfg.budget(),
        cfg.patch_size, cfg.merge_factor, cfg.policy(),
    )

    per_frame: dict[int, dict] = {}
    digest = hashlib.sha256()
    feature_dim = 0
    for tok in result.vision_tokens():
        entry = per_frame.setdefault(
            tok.frame, {"frame": tok.frame, "timestamp": tok.timestamp, "tokens": 0}
        )
        entry["tokens"] += 1
        feature_dim = tok.feature.shape[0]
        digest.update(struct.pack(
            "<iiid", tok.frame, tok.position.row, tok.position.col, tok.timestamp
        ))
        digest.update(np.ascontiguousarray(tok.feature, dtype=np.float64).tobytes())

    payload = {
        "config": {**asdict(cfg), "encoder": args.encoder},
        "input": {
            "duration_s": duration,
            "fps_src": fps_src,
            "frame_count": available,
            "source_resolution": list(source),
            "aligned_resolution": list(aligned),
        },
        "result": {
            "vision_tokens": result.vision_count,
            "total_tokens": result.total_count,
            "frames_kept": len(per_frame),
            "per_frame": [per_frame[k] for k in sorted(per_frame)],
            "feature_dim": feature_dim,
            "feature_digest": digest.hexdigest(),
        },
    }
    _write_text(args.out, _dumps(payload))
    return 0


def _cmd_prune_stats(args) -> int:
    seq, _, _ = read_frame_dir(args.frames)
    _, seq = _align_frames(seq, args.region)
    mask = compute_prune_mask(
        seq, PruneConfig(threshold=args.threshold, region_size=args.region)
    )
    stats = compression_stats(mask)

    cells = mask.rows * mask.cols
    kept_per_frame = mask.keep.reshape(mask.frames, -1).sum(axis=1)
    lines = []
    rows = []
    for i, ts in enumerate(seq.timestamps):
        kept = int(kept_per_frame[i])
        lines.append(f"{i}\t{ts!r}\t{kept}\t{cells - kept}")
        rows.append((i, ts, kept, cells - kept))
    lines.append(f"ratio\t{stats.ratio!r}")
    _write_text(args.out, "\n".join(lines) + "\n")

    if args.plot:
        from .report import render_prune_figure

        render_prune_figure(rows, args.plot)
    return 0


def _read_events(path: str) -> list:
    if path == "-":
        text = sys.stdin.read()
        where = "<stdin>"
    else:
        text = Path(path).read_text(encoding="utf-8")
        where = path
    events = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise VidtokError(f"{where}:{lineno}: {exc}") from exc
        if not isinstance(rec, dict) or "kind" not in rec:
            raise VidtokError(f"{where}:{lineno}: each event needs a 'kind' field")
        kind = rec["kind"]
        try:
            if kind == "image":
                events.append(ImageTokens(count=int(rec["count"])))
            elif kind == "frame":
                events.append(FrameTokens(
                    count=int(rec["count"]), timestamp=float(rec["timestamp"])
                ))
            elif kind == "text":
                events.append(Text(text=str(rec["text"])))
            elif kind == "answer":
                events.append(Answer(text=str(rec["text"])))
            else:
                raise VidtokError(f"{where}:{lineno}: unknown kind {kind!r}")
        except KeyError as exc:
            raise VidtokError(
                f"{where}:{lineno}: missing field {exc} for kind {kind!r}"
            ) from exc
    if not events:
        raise VidtokError(f"{where}: no events")
    return events


def _cmd_render_sequence(args) -> int:
    events = _read_events(args.infile)
    if args.format == "image":
        rendered = render_image_sequence(events)
    elif args.format == "video":
        frames = [e for e in events if isinstance(e, FrameTokens)]
        texts = [e for e in events if isinstance(e, Text)]
        if len(frames) + len(texts) != len(events):
            raise SequenceFormatError(
                "video sequences accept frame and text events only"
            )
        if texts and (len(texts) > 1 or not isinstance(events[-1], Text)):
            raise SequenceFormatError(
                "video sequences allow at most one text event, at the end"
            )
        rendered = render_video_sequence(frames, texts[0].text if texts else None)
    else:
        rendered = render_streaming_sequence(events)

    _write_text(args.out, rendered.text)
    if args.spans:
        payload = {
            "spans": [[offset, count] for offset, count in rendered.spans],
            "vision_tokens": rendered.vision_token_count,
        }
        Path(args.spans).write_text(_dumps(payload), encoding="utf-8")
    return 0


def _parse_stages(spec: str) -> list[tuple]:
    stages: list[tuple] = []
    for part in spec.split(","):
        fields = part.strip().split(":")
        try:
            if fields[0] == "aspect" and len(fields) == 1:
                stages.append(("aspect",) + ASPECT_BOUNDS)
            elif fields[0] == "aspect" and len(fields) == 3:
                stages.append(("aspect", float(fields[1]), float(fields[2])))
            elif fields[0] == "score" and len(fields) == 3:
                stages.append(("score", fields[1], float(fields[2])))
            elif fields[0] == "cluster" and len(fields) == 3:
                stages.append(("cluster", int(fields[1]), int(fields[2])))
            else:
                raise VidtokError(
                    f"unknown stage {part.strip()!r}; expected aspect[:MIN:MAX], "
                    "score:NAME:THRESHOLD or cluster:K:PER_CLUSTER"
                )
        except ValueError as exc:
            raise VidtokError(f"bad stage {part.strip()!r}: {exc}") from exc
    if not stages:
        raise VidtokError("at least one stage is required")
    return stages


def _read_manifest(path: str) -> list[tuple[dict, CurationSample]]:
    base = Path(path).parent
    records: list[tuple[dict, CurationSample]] = []
    seen: set[str] = set()
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), 1
    ):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise VidtokError(f"{path}:{lineno}: {exc}") from exc
        for name in ("id", "width", "height"):
            if name not in rec:
                raise VidtokError(f"{path}:{lineno}: missing field {name!r}")
        feature = rec.get("feature")
        if isinstance(feature, str):
            feature = np.asarray(np.load(base / feature), dtype=np.float64).ravel()
        elif feature is not None:
            feature = np.asarray(feature, dtype=np.float64).ravel()
        try:
            boxes = tuple(
                TextBox(text=str(b["text"]),
                        box=tuple(float(v) for v in b["box"]))
                for b in rec.get("boxes", ())
            )
            sample = CurationSample(
                id=str(rec["id"]),
                resolution=Resolution(int(rec["height"]),
                                      int(rec["width"])).validate(),
                caption=rec.get("caption"),
                feature=feature,
                scores={str(k): float(v)
                        for k, v in rec.get("scores", {}).items()},
                boxes=boxes,
                notes=tuple(str(n) for n in rec.get("notes", ())),
            )
        except (KeyError, TypeError) as exc:
            raise VidtokError(f"{path}:{lineno}: malformed record: {exc}") from exc
        if sample.id in seen:
            raise VidtokError(f"{path}:{lineno}: duplicate id {sample.id!r}")
        seen.add(sample.id)
        records.append((rec, sample))
    if not records:
        raise VidtokError(f"{path}: empty manifest")
    return records


def _apply_stage(samples, stage, seed):
    if stage[0] == "aspect":
        return filter_aspect_ratio(samples, stage[1], stage[2])
    if stage[0] == "score":
        _, name, threshold = stage
        return filter_by_score(samples, lambda s: s.scores[name], name, threshold)

    _, k, per = stage
    with_feat = [s for s in samples if s.feature is not None]
    no_feat = [
        replace(s, notes=s.notes + ("cluster: no feature vector",))
        for s in samples if s.feature is None
    ]
    if not with_feat:
        return [], no_feat
    dims = {s.feature.shape[0] for s in with_feat}
    if len(dims) > 1:
        raise VidtokError(f"feature dimensions differ across samples: {sorted(dims)}")
    picks = set(cluster_select([s.feature for s in with_feat], k, per, seed))
    kept = [s for i, s in enumerate(with_feat) if i in picks]
    rejected = [s for i, s in enumerate(with_feat) if i not in picks]
    return kept, rejected + no_feat


def _cmd_curate(args) -> int:
    records = _read_manifest(args.manifest)
    stages = _parse_stages(args.stages)
    raws = {sample.id: raw for raw, sample in records}

    kept = [sample for _, sample in records]
    removed: list[CurationSample] = []
    for stage in stages:
        kept, rejected = _apply_stage(kept, stage, args.seed)
        removed.extend(rejected)

    def serialize(samples) -> str:
        out = []
        for s in samples:
            rec = dict(raws[s.id])
            if s.scores:
                rec["scores"] = s.scores
            if s.notes:
                rec["notes"] = list(s.notes)
            out.append(json.dumps(rec, sort_keys=True))
        return "".join(line + "\n" for line in out)

    _write_text(args.out, serialize(kept))
    if args.rejects:
        Path(args.rejects).write_text(serialize(removed), encoding="utf-8")
    print(f"kept {len(kept)} of {len(records)} samples "
          f"({len(stages)} stages)", file=sys.stderr)

    if args.plot:
        from .report import render_score_figure

        everything = kept + removed
        scores: dict[str, list[float]] = {}
        for s in everything:
            for name, value in s.scores.items():
                scores.setdefault(name, []).append(value)
        scores["aspect_ratio"] = [
            s.resolution.width / s.resolution.height for s in everything
        ]
        render_score_figure(scores, args.plot)
    return 0


def _cmd_selfcheck(args) -> int:
    return 0 if run_all(args.seed) else 2


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args) or 0)
    except (BudgetExceededError, ContractViolationError) as exc:
        print(f"vidtok: {exc}", file=sys.stderr)
        return 2
    except (VidtokError, OSError, ValueError) as exc:
        print(f"vidtok: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
