"""Figure rendering for the report path.

Each CLI subcommand that writes a CSV also renders the matching figure next
to it (PNG, Agg backend, no display required).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .harness import RmsReport, TimingStats
from .mpc import ClosedLoopResult
from .stability import StabilitySweepResult
from .trajectory import Trajectory

_DPI = 130


def _save(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_sweep(result: StabilitySweepResult, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, ts in enumerate(result.ts_list):
        ax.plot(result.u_grid, result.values[i], label=f"T_s = {ts:g} s")
    ax.axhline(1.0, color="k", lw=0.8, ls="--")
    ax.set_xlabel("longitudinal speed U (m/s)")
    ax.set_ylabel("lateral-block growth factor")
    ax.set_title("Per-step error growth factor over the speed envelope")
    ax.legend()
    _save(fig, path)


def plot_trajectory(traj: Trajectory, path: Path) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(traj.states[:, 0], traj.states[:, 1])
    ax1.set_xlabel("X (m)")
    ax1.set_ylabel("Y (m)")
    ax1.set_title(f"path ({traj.integrator}, T_s={traj.ts:g} s)")
    ax1.axis("equal")
    ax2.plot(traj.t, traj.states[:, 4], label="V (m/s)")
    ax2.plot(traj.t, traj.states[:, 5], label="omega (rad/s)")
    if traj.diverged and traj.diverged_at is not None:
        ax2.axvline(traj.diverged_at, color="r", lw=0.8, ls=":", label="divergence")
    ax2.set_xlabel("t (s)")
    ax2.set_title("lateral states")
    ax2.legend()
    _save(fig, path)


def plot_accuracy(reports: list, path: Path) -> None:
    reports = [r for r in reports if isinstance(r, RmsReport)]
    fig, ax = plt.subplots(figsize=(7, 4))
    u0s = sorted({r.u0 for r in reports})
    for u0 in u0s:
        cells = sorted((r for r in reports if r.u0 == u0), key=lambda r: r.delta)
        deltas = [r.delta for r in cells]
        ax.plot(deltas, [r.kinematic_rms for r in cells], "o--", label=f"kinematic U0={u0:g}")
        ax.plot(deltas, [r.dynamic_rms for r in cells], "s-", label=f"dynamic U0={u0:g}")
    ax.set_xlabel("steer delta (rad)")
    ax.set_ylabel("position RMS vs reference (m)")
    ax.set_yscale("log")
    ax.set_title("Accuracy against the fine-step reference")
    ax.legend(fontsize=7, ncol=2)
    _save(fig, path)


def plot_noise(
    clean: Trajectory, noisy_by_sigma: dict[float, Trajectory], path: Path
) -> None:
    fig, ax = plt.subplots(figsize=(6, 5))
    for sigma, traj in sorted(noisy_by_sigma.items()):
        ax.plot(traj.states[:, 0], traj.states[:, 1], label=f"sigma = {sigma:g} rad")
    ax.plot(clean.states[:, 0], clean.states[:, 1], "k:", lw=2, label="noise-free")
    ax.set_xlabel("X (m)")
    ax.set_ylabel("Y (m)")
    ax.axis("equal")
    ax.set_title("Steer-noise robustness")
    ax.legend()
    _save(fig, path)


def plot_bench(stats: dict[str, TimingStats], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    names = list(stats)
    means = [stats[n].mean * 1e6 for n in names]
    p95s = [stats[n].p95 * 1e6 for n in names]
    x = np.arange(len(names))
    ax.bar(x - 0.2, means, width=0.4, label="mean")
    ax.bar(x + 0.2, p95s, width=0.4, label="p95")
    ax.set_xticks(x, names)
    ax.set_ylabel("per-step latency (us)")
    ax.set_title("Transition-step latency")
    ax.legend()
    _save(fig, path)


def plot_closed_loop(
    result: ClosedLoopResult, radius: float, path_xy: Path, path_traces: Path
) -> None:
    traj = result.trajectory
    fig, ax = plt.subplots(figsize=(6, 6))
    first = result.obstacle.position
    moved = result.obstacle.moved_position
    ax.add_patch(
        plt.Circle(first, radius, color="orange", alpha=0.25, label="obstacle (initial)")
    )
    if result.obstacle.moved and moved is not None:
        ax.add_patch(
            plt.Circle(moved, radius, color="darkorange", alpha=0.4, label="obstacle (moved)")
        )
    ax.plot(traj.states[:, 0], traj.states[:, 1], "b-", lw=1.5, label="C.G. path")
    ax.plot([first[0]], [first[1]], "x", color="k")
    ax.set_xlabel("X (m)")
    ax.set_ylabel("Y (m)")
    ax.axis("equal")
    ax.set_title("Closed-loop stop-start trajectory")
    ax.legend(loc="upper left", fontsize=8)
    _save(fig, path_xy)

    fig, axes = plt.subplots(3, 1, figsize=(7, 7), sharex=True)
    axes[0].plot(traj.t, traj.states[:, 3])
    axes[0].set_ylabel("U (m/s)")
    axes[1].plot(traj.t, traj.inputs[:, 0])
    axes[1].set_ylabel("a (m/s^2)")
    axes[2].plot(traj.t, traj.inputs[:, 1])
    axes[2].set_ylabel("delta (rad)")
    axes[2].set_xlabel("t (s)")
    if result.stop_time is not None:
        for ax_ in axes:
            ax_.axvline(result.stop_time, color="r", lw=0.8, ls=":")
    axes[0].set_title("Closed-loop speed and control traces")
    _save(fig, path_traces)
