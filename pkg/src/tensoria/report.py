"""Figure rendering for the benchmark report path.

Renders the per-solver convergence curves and the reference spectrum to PNG
files next to the CSV output.  Uses the Agg backend so it works headless.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_FLOOR = 1e-17


def render_convergence(path, curves, lower_bound=None, ylabel="weighted 2-norm error"):
    """Semi-log convergence plot: one (ranks, errors) curve per solver plus
    the optional best-rank lower bound."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for label, xs, ys in curves:
        ys = np.maximum(np.asarray(ys, dtype=float), _FLOOR)
        ax.semilogy(xs, ys, marker="o", markersize=3.5, linewidth=1.2, label=label)
    if lower_bound is not None:
        xs, ys = lower_bound
        ys = np.maximum(np.asarray(ys, dtype=float), _FLOOR)
        ax.semilogy(xs, ys, "k--", linewidth=1.0, label="best rank-r (SVD)")
    ax.set_xlabel("rank / iteration")
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_spectrum(path, singular_values, title="reference spectrum"):
    sv = np.asarray(singular_values, dtype=float)
    sv = np.maximum(sv, _FLOOR)
    fig, ax = plt.subplots(figsize=(5.2, 3.8))
    ax.semilogy(np.arange(1, sv.size + 1), sv, marker="s", markersize=3.5, linewidth=1.0)
    ax.set_xlabel("index")
    ax.set_ylabel("singular value")
    ax.set_title(title, fontsize=10)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
