"""Figures for run reports, rendered headless to PNG.

PNG metadata (software version, timestamps) is stripped so the same data
always produces the same bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path


def plot_pretrain(rows: list[dict], path, window: int = 20) -> Path:
    """Loss curves of a pre-training run: l_mlm (raw and smoothed), total, and alpha."""
    from numlex.pretrain.trainer import smoothed

    steps = np.array([r["step"] for r in rows])
    l_mlm = np.array([r["l_mlm"] for r in rows])
    fig, (ax, ax_a) = plt.subplots(2, 1, figsize=(7, 5), sharex=True, height_ratios=[3, 1])
    ax.plot(steps, l_mlm, color="0.75", lw=0.8, label="l_mlm")
    ax.plot(steps, smoothed(l_mlm, window), color="C0", lw=1.6, label=f"l_mlm ({window}-step mean)")
    if any(r.get("alpha", 0.0) > 0 for r in rows):
        ax.plot(steps, smoothed([r["total"] for r in rows], window), color="C1", lw=1.2, label="total")
        ax.plot(steps, smoothed([r["l_distill"] for r in rows], window), color="C2", lw=1.0, label="l_distill")
    ax.set_ylabel("loss")
    ax.legend(loc="upper right", fontsize=8)
    ax_a.plot(steps, [r.get("alpha", 0.0) for r in rows], color="C3")
    ax_a.set_ylabel("alpha")
    ax_a.set_xlabel("step")
    fig.tight_layout()
    return _save(fig, path)


def plot_comparison(results: dict[str, list[dict]], metric: str, path, title: str | None = None) -> Path:
    """Per-seed points and the mean bar of one metric for each embedder kind."""
    kinds = list(results)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for i, kind in enumerate(kinds):
        vals = [m[metric] for m in results[kind] if m.get(metric) is not None]
        if not vals:
            continue
        ax.bar(i, float(np.mean(vals)), color=f"C{i}", alpha=0.6, width=0.6)
        ax.scatter(np.full(len(vals), i), vals, color="k", s=12, zorder=3)
    ax.set_xticks(range(len(kinds)), kinds)
    ax.set_ylabel(metric)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
