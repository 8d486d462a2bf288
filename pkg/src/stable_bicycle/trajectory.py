"""Input schedules and fixed-rate trajectory records shared by all runners."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: Any state component beyond this magnitude counts as a divergence event.
#: Far beyond physical values, still well inside float range.
DIVERGENCE_THRESHOLD = 1.0e6


@dataclass(frozen=True, slots=True)
class Segment:
    """Zero-order-hold input segment active from t_start onward."""

    t_start: float
    a: float
    delta: float


class Schedule:
    """Piecewise-constant (a, delta) input schedule.

    Segment start times must be strictly increasing and begin at 0 so the
    input is defined over the whole run.
    """

    def __init__(self, segments: list[Segment]):
        if not segments:
            raise ValueError("schedule needs at least one segment")
        if segments[0].t_start != 0.0:
            raise ValueError("first segment must start at t=0")
        times = [seg.t_start for seg in segments]
        if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
            raise ValueError("segment start times must be strictly increasing")
        self.segments = list(segments)

    @classmethod
    def constant(cls, a: float = 0.0, delta: float = 0.0) -> "Schedule":
        return cls([Segment(0.0, a, delta)])

    def at(self, t: float) -> tuple[float, float]:
        """Input held over the interval containing time t (ZOH)."""
        active = self.segments[0]
        for seg in self.segments[1:]:
            # tiny slack so t = k*ts lands in the segment it nominally starts
            if seg.t_start <= t + 1e-12:
                active = seg
            else:
                break
        return active.a, active.delta


@dataclass
class Trajectory:
    """Uniformly sampled run record.

    ``states`` always has six columns (X, Y, phi, U, V, omega); kinematic
    runs carry V = omega = 0.  ``inputs`` holds the (a, delta) pair applied
    over [t_k, t_{k+1}).  On divergence the record is truncated right after
    the first offending sample and ``diverged``/``diverged_at`` are set.
    """

    t: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    integrator: str
    ts: float
    diverged: bool = False
    diverged_at: float | None = None
    clamped_steps: int = 0  # steps where the U >= 0 clamp engaged
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.t)
        if self.states.shape != (n, 6) or self.inputs.shape != (n, 2):
            raise ValueError("trajectory arrays must share the sample count")

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def positions(self) -> np.ndarray:
        return self.states[:, :2]


def sample_count(duration: float, ts: float) -> int:
    """Number of samples for a run: floor(duration/ts) + 1, FP-robust."""
    return int(math.floor(duration / ts + 1e-9)) + 1


def is_divergent_sample(state: np.ndarray) -> bool:
    """A sample diverged if any component is non-finite or beyond threshold."""
    return bool(
        (~np.isfinite(state)).any() or (np.abs(state) > DIVERGENCE_THRESHOLD).any()
    )
