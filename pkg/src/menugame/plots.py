"""Figure rendering for the CLI report paths.

Figures are a convenience companion to the CSV artifacts, which remain the
canonical machine-readable output.  matplotlib is imported lazily with the
Agg backend so headless runs and non-plotting commands never touch it.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_br_dynamics(
    iterations,
    profiles: np.ndarray,
    thresholds,
    out_path: str | Path,
    burn_in: int | None = None,
) -> Path:
    """Commission trajectories per seller with the threshold levels dashed in."""
    plt = _pyplot()
    profiles = np.asarray(profiles)
    n = profiles.shape[1]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for a in range(n):
        ax.plot(iterations, profiles[:, a], lw=1.0, label=f"seller {a + 1}")
    for k, level in enumerate(thresholds):
        ax.axhline(level, ls="--", lw=0.8, color="gray")
        ax.annotate(
            f"thr {k + 1}", (iterations[-1], level), fontsize=7,
            ha="right", va="bottom", color="gray",
        )
    if burn_in is not None:
        ax.axvline(burn_in, ls=":", lw=0.8, color="black")
    ax.set_xlabel("iteration")
    ax.set_ylabel("commission")
    ax.set_title("best-response dynamics of seller commissions")
    ax.legend(fontsize=8, ncol=min(n, 5), loc="lower right")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_compare_approx(rows: list[dict], seller: int, out_path: str | Path) -> Path:
    """Exact vs approximate seller utility across the commission sweep,
    one curve pair per exploration probability."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    gammas = sorted({row["gamma"] for row in rows})
    for g in gammas:
        block = [row for row in rows if row["gamma"] == g]
        xs = [row["delta"] for row in block]
        exact = [row["exact_utility"] for row in block]
        approx = [row["approx_utility"] for row in block]
        (line,) = ax.plot(xs, exact, "o", ms=4, label=f"exact, gamma={g:g}")
        ax.plot(xs, approx, ":", color=line.get_color(), label=f"approx, gamma={g:g}")
    ax.set_xlabel(f"commission of seller {seller}")
    ax.set_ylabel("seller utility")
    ax.set_title("exact vs approximate policy utilities")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
