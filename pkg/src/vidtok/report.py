"""Figure rendering for the reporting commands.

Plots are written straight to files next to the delimited output; no
interactive backend is ever needed.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["render_prune_figure", "render_score_figure"]


def render_prune_figure(rows: Sequence[tuple[int, float, int, int]], path) -> None:
    """Per-frame kept/dropped bars with the running compression ratio.

    ``rows`` are (frame_index, timestamp, kept, dropped) records, the same
    ones the delimited report emits.
    """
    frames = [r[0] for r in rows]
    kept = [r[2] for r in rows]
    dropped = [r[3] for r in rows]
    running: list[float] = []
    tot_kept = tot_all = 0
    for k, d in zip(kept, dropped):
        tot_kept += k
        tot_all += k + d
        running.append(1.0 - tot_kept / tot_all)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.bar(frames, kept, label="kept", color="#4878cf")
    ax.bar(frames, dropped, bottom=kept, label="dropped", color="#d65f5f")
    ax.set_xlabel("frame")
    ax.set_ylabel("tokens")
    ax2 = ax.twinx()
    ax2.plot(frames, running, color="black", linewidth=1.2, label="ratio")
    ax2.set_ylabel("cumulative compression ratio")
    ax2.set_ylim(0.0, 1.0)
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_score_figure(scores: Mapping[str, Sequence[float]], path) -> None:
    """Histogram per recorded score name, one panel each."""
    names = sorted(scores)
    if not names:
        raise ValueError("no scores to plot")
    fig, axes = plt.subplots(1, len(names), figsize=(4 * len(names), 3.2),
                             squeeze=False)
    for ax, name in zip(axes[0], names):
        ax.hist(list(scores[name]), bins=20, color="#4878cf")
        ax.set_title(name)
        ax.set_xlabel("score")
        ax.set_ylabel("samples")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
