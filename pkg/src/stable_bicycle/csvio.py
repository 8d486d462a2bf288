"""CSV artifact writers and the run manifest.

All floats are rendered with 9 significant digits (%.9g), UTF-8, LF line
endings, so reruns with identical inputs produce byte-identical files.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .harness import RmsReport
from .integrators import OracleSingularityError
from .mpc import ClosedLoopResult
from .stability import StabilitySweepResult
from .trajectory import Trajectory


def fmt(value: float) -> str:
    return "%.9g" % value


def _write_rows(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if not isinstance(v, str) else v for v in row))
            fh.write("\n")


def write_trajectory_csv(path: Path, traj: Trajectory) -> None:
    rows = (
        (
            traj.t[i],
            *traj.states[i],
            traj.inputs[i, 0],
            traj.inputs[i, 1],
        )
        for i in range(len(traj.t))
    )
    _write_rows(path, "t,X,Y,phi,U,V,omega,a,delta", rows)


def write_rms_csv(
    path: Path, reports: list[RmsReport | OracleSingularityError]
) -> None:
    """Accuracy-table rows; aborted cells are skipped (partial results)."""
    rows = (
        (r.u0, r.delta, r.kinematic_rms, r.dynamic_rms, r.improvement_pct)
        for r in reports
        if isinstance(r, RmsReport)
    )
    _write_rows(path, "U0,delta,kinematic_rms,dynamic_rms,improvement_pct", rows)


def write_sweep_csv(path: Path, result: StabilitySweepResult) -> None:
    _write_rows(path, "U_mid,T_s,norm", result.rows())


def write_closed_loop_csv(path: Path, result: ClosedLoopResult) -> None:
    traj = result.trajectory
    n = len(traj.t)

    def rows():
        for i in range(n):
            # sample 0 precedes the first applied input/solve
            solve = result.solves[min(max(i - 1, 0), len(result.solves) - 1)]
            yield (
                traj.t[i],
                *traj.states[i],
                traj.inputs[i, 0],
                traj.inputs[i, 1],
                solve.cost,
                solve.violation,
                solve.iterations,
                solve.status,
                result.obstacle_log[i, 0],
                result.obstacle_log[i, 1],
            )

    _write_rows(
        path,
        "t,X,Y,phi,U,V,omega,a,delta,cost,violation,iters,status,obstacle_x,obstacle_y",
        rows(),
    )


def write_deviation_csv(path: Path, sigma_series: dict[float, list[float]]) -> None:
    """Noise experiment: per-step position deviation, one column per sigma."""
    sigmas = sorted(sigma_series)
    length = max(len(v) for v in sigma_series.values())
    header = "step," + ",".join(f"dev_sigma_{fmt(s)}" for s in sigmas)

    def rows():
        for i in range(length):
            yield (
                float(i),
                *(
                    sigma_series[s][i] if i < len(sigma_series[s]) else float("nan")
                    for s in sigmas
                ),
            )

    _write_rows(path, header, rows())


@dataclass
class RunManifest:
    """First artifact of every run; outputs are reproducible from it + config."""

    subcommand: str
    config: str
    out_dir: str
    seed: int
    version: str
    timestamp: str

    def write(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
