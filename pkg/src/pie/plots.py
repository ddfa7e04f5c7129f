"""Matplotlib renderings written next to the delimited outputs.

Everything is rendered off-screen with pinned PNG metadata so repeated runs
produce byte-identical files.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"dpi": 120, "metadata": {"Software": "pie"}}


def _fmt_lambda(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:g}"


def save_trace(trace, path) -> None:
    """Objective value per outer iteration."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(trace)), trace, lw=1.5)
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("penalized objective")
    ax.set_title("training objective trace")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_breakdown(terms, total, crust_share, path, title="prediction breakdown") -> None:
    """Horizontal bar chart of one prediction's contributions, largest
    magnitude on top; the cross-feature term is drawn in its own color."""
    names = [t[0] for t in terms]
    values = [t[1] for t in terms]
    colors = ["#b3533a" if n == "(crust)" else "#4878a8" for n in names]
    fig, ax = plt.subplots(figsize=(7, max(2.5, 0.45 * len(terms) + 1.2)))
    ypos = np.arange(len(terms))[::-1]
    ax.barh(ypos, values, color=colors)
    ax.set_yticks(ypos)
    ax.set_yticklabels(names)
    ax.axvline(0.0, color="black", lw=0.8)
    ax.set_xlabel("contribution")
    ax.set_title(f"{title}  (total {total:.4g}, crust share {crust_share:.3f})")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_heatmap(matrix, lam1_grid, lam2_grid, label, path) -> None:
    """Grid metric as a heatmap: penalty weights on the axes, annotated cells."""
    mat = np.asarray(matrix, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(1.1 * len(lam2_grid) + 2.5,
                                    0.9 * len(lam1_grid) + 2.0))
    im = ax.imshow(mat, aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(lam2_grid)))
    ax.set_xticklabels([_fmt_lambda(v) for v in lam2_grid])
    ax.set_yticks(range(len(lam1_grid)))
    ax.set_yticklabels([_fmt_lambda(v) for v in lam1_grid])
    ax.set_xlabel("lambda2 (tree penalty)")
    ax.set_ylabel("lambda1 (group penalty)")
    ax.set_title(label)
    for i in range(mat.shape[0]):
        for j in range(mat.shape[1]):
            v = mat[i, j]
            ax.text(j, i, "-" if not np.isfinite(v) else f"{v:.3f}",
                    ha="center", va="center", fontsize=8, color="white")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
