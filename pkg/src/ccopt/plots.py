"""Matplotlib rendering of the report outputs.

Figures are written next to the CSV files they visualize; the Agg backend
keeps everything headless-safe.
"""

from __future__ import annotations

import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "experiment_figure",
    "bias_variance_figure",
    "field_figure",
    "trajectory_figure",
]

_LINESTYLES = ["-", "--", ":", "-."]


def experiment_figure(series_list: Sequence, out_dir: str, stem: str = "experiment") -> list[str]:
    """One panel per coordinate: mean error with a +/- std band, per variant."""
    names = series_list[0].names
    ncols = 2 if len(names) > 1 else 1
    nrows = (len(names) + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(11, 4 * nrows), squeeze=False)
    for j, name in enumerate(names):
        ax = axes[j // ncols][j % ncols]
        for v_idx, series in enumerate(series_list):
            style = _LINESTYLES[v_idx % len(_LINESTYLES)]
            ks = series.ks
            mean, std = series.mean[:, j], series.std[:, j]
            ax.plot(ks, mean, style, lw=1.2, label=series.label or f"variant {v_idx}")
            ax.fill_between(ks, mean - std, mean + std, alpha=0.15)
        ax.axhline(0.0, color="k", lw=0.5)
        ax.set_xscale("log")
        ax.set_xlabel("iteration k")
        ax.set_ylabel(f"{name} error")
        ax.legend()
    for j in range(len(names), nrows * ncols):
        axes[j // ncols][j % ncols].set_visible(False)
    fig.tight_layout()
    path = os.path.join(out_dir, f"{stem}.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return [path]


def bias_variance_figure(reports: Sequence, out_dir: str, stem: str = "bias_variance") -> list[str]:
    """Log-log variance and |bias| against the smoothing parameter."""
    smoothings = np.array([r.smoothing for r in reports])
    order = np.argsort(smoothings)
    smoothings = smoothings[order]
    variance = np.stack([reports[i].variance for i in order])
    bias = np.stack([np.abs(reports[i].bias) for i in order])
    dim = variance.shape[1]

    fig, (ax_v, ax_b) = plt.subplots(1, 2, figsize=(11, 4.2))
    for j in range(dim):
        ax_v.loglog(smoothings, variance[:, j], "o-", label=f"component {j}")
        ax_b.loglog(smoothings, np.maximum(bias[:, j], 1e-16), "s-", label=f"component {j}")
    ax_v.set_xlabel("smoothing")
    ax_v.set_ylabel("variance")
    ax_v.set_title("variance (~ 1/s)")
    ax_b.set_xlabel("smoothing")
    ax_b.set_ylabel("|bias|")
    ax_b.set_title("bias (~ s^2)")
    for ax in (ax_v, ax_b):
        ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, f"{stem}.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return [path]


def field_figure(
    u_grid: np.ndarray,
    lam_grid: np.ndarray,
    du: np.ndarray,
    dlam: np.ndarray,
    paths: Sequence,
    out_dir: str,
    stem: str = "field",
) -> list[str]:
    """Quiver plot of the mean-field drift with optional integrated paths."""
    fig, ax = plt.subplots(figsize=(7.5, 6))
    mag = np.hypot(du, dlam)
    scale = np.where(mag > 0, mag, 1.0)
    ax.quiver(u_grid, lam_grid, du / scale, dlam / scale, mag, cmap="viridis", width=0.003)
    for path in paths:
        ax.plot(path.us[:, 0], path.lams[:, -1], "r-", lw=1.4)
        ax.plot(path.us[0, 0], path.lams[0, -1], "ro", ms=4)
    ax.set_xlabel("u")
    ax.set_ylabel("multiplier")
    ax.set_title("mean-field drift")
    fig.tight_layout()
    out = os.path.join(out_dir, f"{stem}.png")
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return [out]


def trajectory_figure(trajectory, out_dir: str, stem: str = "trajectory") -> list[str]:
    """Coordinates of a single run against the iteration index."""
    vec = trajectory.vectors()
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for j in range(vec.shape[1]):
        ax.plot(trajectory.ks, vec[:, j], lw=1.0, label=f"coord {j}")
    ax.set_xlabel("iteration k")
    ax.legend()
    fig.tight_layout()
    out = os.path.join(out_dir, f"{stem}.png")
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return [out]
