"""Matplotlib figures written next to the TSV tables."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden = (np.sqrt(5) - 1.0) / 2.0
fig_width = 4.5

STYLE = {
    "figure.figsize": [fig_width, fig_width * golden],
    "figure.dpi": 150,
    "font.family": "serif",
    "font.size": 8,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "lines.linewidth": 1.0,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def plot_gaps(series: dict, path, title=None):
    """Log-log gap curves, one per configuration; nonpositive gaps are dropped."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, (k, gap) in sorted(series.items()):
            k, gap = np.asarray(k, dtype=float), np.asarray(gap, dtype=float)
            keep = (k > 0) & (gap > 0)
            ax.loglog(k[keep], gap[keep], label=label)
        ax.set_xlabel("iteration k")
        ax.set_ylabel("V(pi_k) - reference")
        if title:
            ax.set_title(title)
        if series:
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_ratios(eps, ratio, bound, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(eps, ratio, "o-", label="linearization error / local norm^2")
        ax.loglog(eps, bound, "--", label="1 / (8 sqrt(eps))")
        ax.set_xlabel("min action probability eps")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
