"""Matplotlib figures written next to the CLI's tables.

Imported lazily by the CLI so the core package does not need matplotlib.
"""

from __future__ import annotations

from pathlib import Path
from typing import BinaryIO, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bandit import Trajectory  # noqa: E402
from .theory import EnvelopePoint, SweepResult  # noqa: E402

# fixed metadata keeps PNG bytes reproducible across runs
_SAVE_KW = dict(dpi=120, format="png", metadata={"Software": None})


def _style(ax, xlabel: str, ylabel: str):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)


def plot_sweep(results: Sequence[SweepResult], path: str | Path | BinaryIO) -> str | Path | BinaryIO:
    """Accuracy vs chain length, each curve scaled to its own peak."""
    fig, ax = plt.subplots(figsize=(6, 4))
    x_right = 1
    for res in results:
        T, C, M = res.setting.as_tuple()
        curve = res.curve
        y = np.exp(curve.log_shape - curve.log_shape.max())
        (line,) = ax.plot(curve.n_steps, y, lw=1.5, label=f"T={T:g}, C={C:g}, M={M:g}")
        ax.axvline(res.n_star, color=line.get_color(), ls=":", lw=1)
        visible = curve.n_steps[y >= 1e-2]
        if visible.size:
            x_right = max(x_right, int(visible.max()))
    ax.set_xlim(0, x_right * 1.1 + 1)
    _style(ax, "CoT length N", "accuracy / peak accuracy")
    if len(results) <= 12:
        ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def plot_envelope(points: Sequence[EnvelopePoint], path: str | Path | BinaryIO) -> str | Path | BinaryIO:
    """Best integer step size per difficulty against the continuous optimum."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    T = np.array([p.setting.difficulty for p in points])
    order = np.argsort(T, kind="stable")
    ax.plot(T[order], [points[i].best_step_size for i in order], "o-", label="best integer t")
    ax.plot(T[order], [points[i].t_star for i in order], "--", label="t* (closed form)")
    _style(ax, "task difficulty T", "operators per step")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def plot_trajectory(traj: Trajectory, path: str | Path | BinaryIO) -> str | Path | BinaryIO:
    """Arm probabilities and the Lyapunov value over training steps."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    for i, n in enumerate(traj.arms.lengths):
        ax1.plot(traj.steps, traj.probabilities[:, i], lw=1.2, label=f"N={n}")
    _style(ax1, "", "policy probability")
    if traj.arms.k <= 12:
        ax1.legend(fontsize=7, ncol=2, frameon=False)
    ax2.plot(traj.steps, traj.lyapunov, color="k", lw=1.2)
    _style(ax2, "step", "-ln mass on best arm")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path
