"""SVG figures for convergence curves and bending sweeps.

Output is byte-reproducible: no timestamps and a fixed hash salt for the
element ids.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {"svg.hashsalt": "mmfga", "svg.fonttype": "none"}


def _save(fig, path):
    with plt.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_convergence(metrics, path, title="GA convergence"):
    """Best CC1 and, when recorded, CC2 of the best mask against generation."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        gens = metrics.generations
        ax.plot(gens, metrics.best_cc1, label="CC1 (best)")
        ax.plot(gens, metrics.mean_cc1, label="CC1 (mean)", alpha=0.5)
        cc2 = metrics.cc2
        if len(cc2) and not np.all(np.isnan(cc2)):
            ax.plot(gens, cc2, label="CC2 (best mask)")
        ax.set_xlabel("generation")
        ax.set_ylabel("correlation coefficient")
        ax.set_ylim(-0.1, 1.02)
        ax.set_title(title)
        ax.grid(alpha=0.3)
        ax.legend(loc="lower right")
        fig.tight_layout()
    _save(fig, path)


def plot_sweep(displacements, cc1, cc2, path, title="Bending sweep"):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(displacements, cc1, "o-", label="CC1")
        ax.plot(displacements, cc2, "s-", label="CC2")
        ax.set_xlabel("bend displacement")
        ax.set_ylabel("correlation coefficient")
        ax.set_title(title)
        ax.grid(alpha=0.3)
        ax.legend()
        fig.tight_layout()
    _save(fig, path)
