"""Scenario definitions, batch simulation and the open-loop experiments."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .integrators import (
    FixedPointConfig,
    FixedPointDivergenceError,
    OracleSingularityError,
    check_step_size,
    reference_rk4,
    step_backward_euler,
    step_forward_euler,
    step_kinematic,
    step_proposed_flagged,
)
from .trajectory import (
    Schedule,
    Trajectory,
    is_divergent_sample,
    sample_count,
)
from .vehicle import (
    ControlInput,
    KinematicState,
    LowSpeedSingularityError,
    State6,
    VehicleParams,
    validate_params,
)

INTEGRATORS = ("forward_euler", "backward_euler", "proposed", "kinematic")


@dataclass
class Scenario:
    """One open-loop run: initial state, ZOH input schedule, stepper choice."""

    params: VehicleParams
    x0: State6
    schedule: Schedule
    ts: float
    duration: float
    integrator: str = "proposed"
    fixed_point: FixedPointConfig = field(default_factory=FixedPointConfig)
    name: str = "scenario"

    def __post_init__(self):
        validate_params(self.params)
        check_step_size(self.ts)
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.integrator not in INTEGRATORS:
            raise ValueError(
                f"unknown integrator {self.integrator!r}; pick one of {INTEGRATORS}"
            )


@dataclass(frozen=True, slots=True)
class NoiseSpec:
    """Seeded Gaussian steer noise, one draw per control interval."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True, slots=True)
class RmsReport:
    """Position RMS of one (U0, delta) cell against the reference oracle."""

    u0: float
    delta: float
    kinematic_rms: float
    dynamic_rms: float

    @property
    def improvement_pct(self) -> float:
        return (self.kinematic_rms - self.dynamic_rms) / self.kinematic_rms * 100.0


@dataclass(frozen=True, slots=True)
class TimingStats:
    """Wall-clock per-step latency statistics in seconds."""

    mean: float
    median: float
    p95: float


def run_scenario(sc: Scenario, steer_offsets: np.ndarray | None = None) -> Trajectory:
    """Integrate a scenario with its selected stepper.

    Runtime blowup is data, not an error: a non-finite or out-of-threshold
    sample (or a baseline stepper hitting the low-speed singularity or a
    fixed-point failure) sets the divergence flag, records the time, and
    truncates the record.  ``steer_offsets`` optionally adds a per-interval
    additive steer term (used by the noise experiment).
    """
    n = sample_count(sc.duration, sc.ts)
    times = np.empty(n)
    states = np.empty((n, 6))
    inputs = np.empty((n, 2))

    kinematic = sc.integrator == "kinematic"
    state: State6 | KinematicState
    if kinematic:
        state = KinematicState(sc.x0.X, sc.x0.Y, sc.x0.phi, sc.x0.U)
    else:
        state = sc.x0

    def record(k: int, st) -> None:
        times[k] = k * sc.ts
        if kinematic:
            states[k] = (st.X, st.Y, st.phi, st.U, 0.0, 0.0)
        else:
            states[k] = (st.X, st.Y, st.phi, st.U, st.V, st.omega)

    record(0, state)
    a0, d0 = sc.schedule.at(0.0)
    inputs[0] = (a0, d0)

    diverged = False
    diverged_at: float | None = None
    clamped = 0
    filled = 1
    for k in range(n - 1):
        a_k, d_k = sc.schedule.at(k * sc.ts)
        if steer_offsets is not None:
            d_k += float(steer_offsets[k])
        u = ControlInput(a_k, d_k)
        inputs[k] = (a_k, d_k)
        try:
            if sc.integrator == "proposed":
                state, hit = step_proposed_flagged(sc.params, state, u, sc.ts)
                clamped += hit
            elif sc.integrator == "forward_euler":
                state = step_forward_euler(sc.params, state, u, sc.ts)
            elif sc.integrator == "backward_euler":
                state = step_backward_euler(sc.params, state, u, sc.ts, sc.fixed_point)
            else:
                state = step_kinematic(sc.params, state, u, sc.ts)
        except (LowSpeedSingularityError, FixedPointDivergenceError):
            diverged = True
            diverged_at = k * sc.ts
            break
        record(k + 1, state)
        inputs[k + 1] = (a_k, d_k)
        filled = k + 2
        if is_divergent_sample(states[k + 1]):
            diverged = True
            diverged_at = (k + 1) * sc.ts
            break

    return Trajectory(
        t=times[:filled],
        states=states[:filled],
        inputs=inputs[:filled],
        integrator=sc.integrator,
        ts=sc.ts,
        diverged=diverged,
        diverged_at=diverged_at,
        clamped_steps=clamped,
        meta={"name": sc.name},
    )


def rms_position_error(a: Trajectory, b: Trajectory) -> float:
    """RMS of the Euclidean (X, Y) distance at matched timestamps, meters."""
    if not math.isclose(a.ts, b.ts, rel_tol=1e-12, abs_tol=0.0):
        raise ValueError(f"sample rates differ: {a.ts} vs {b.ts}")
    n = min(len(a.t), len(b.t))
    if n == 0:
        raise ValueError("no overlapping samples")
    diff = a.states[:n, :2] - b.states[:n, :2]
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))


def run_noise_robustness(
    base: Scenario, noise: NoiseSpec
) -> tuple[Trajectory, np.ndarray]:
    """Re-run ``base`` with seeded Gaussian steer perturbations.

    One standard-normal draw per control interval, scaled by sigma, so runs
    with the same seed and different sigma see proportional disturbances.
    Returns the noisy trajectory and the per-step position deviation from
    the noise-free run.
    """
    n_steps = sample_count(base.duration, base.ts) - 1
    rng = np.random.default_rng(noise.seed)
    offsets = noise.sigma * rng.standard_normal(n_steps)
    clean = run_scenario(base)
    noisy = run_scenario(base, steer_offsets=offsets)
    n = min(len(clean.t), len(noisy.t))
    deviation = np.linalg.norm(
        noisy.states[:n, :2] - clean.states[:n, :2], axis=1
    )
    return noisy, deviation


def accuracy_table(
    params: VehicleParams,
    u0_list: list[float],
    delta_list: list[float],
    duration: float,
    ts: float,
    t_fine: float = 1e-4,
) -> list[RmsReport | OracleSingularityError]:
    """Constant-steer grid: proposed and kinematic models vs the RK4 oracle.

    Returns one entry per (U0, delta) cell in row-major order.  A cell whose
    oracle aborts (speed fell through the floor mid-run) carries the
    exception instead of a report; the other cells are unaffected.
    """
    if any(u0 <= 0 for u0 in u0_list):
        raise ValueError("all U0 must be positive (the oracle needs U > 0)")
    out: list[RmsReport | OracleSingularityError] = []
    for u0 in u0_list:
        for delta in delta_list:
            out.append(_accuracy_cell(params, u0, delta, duration, ts, t_fine))
    return out


def _accuracy_cell(
    params: VehicleParams,
    u0: float,
    delta: float,
    duration: float,
    ts: float,
    t_fine: float,
) -> RmsReport | OracleSingularityError:
    x0 = State6(0.0, 0.0, 0.0, u0, 0.0, 0.0)
    schedule = Schedule.constant(a=0.0, delta=delta)
    try:
        ref = reference_rk4(params, x0, schedule, t_fine, ts, duration)
    except OracleSingularityError as exc:
        return exc
    dyn = run_scenario(
        Scenario(params, x0, schedule, ts, duration, integrator="proposed")
    )
    kin = run_scenario(
        Scenario(params, x0, schedule, ts, duration, integrator="kinematic")
    )
    return RmsReport(
        u0=u0,
        delta=delta,
        kinematic_rms=rms_position_error(kin, ref),
        dynamic_rms=rms_position_error(dyn, ref),
    )


def timing_benchmark(
    params: VehicleParams, n_steps: int, ts: float = 0.01
) -> dict[str, TimingStats]:
    """Per-step wall-clock latency of the proposed and kinematic maps.

    Benchmark setup: start at 5 m/s and hold a 0.2674 rad step steer, timing
    ``n_steps`` state transitions of each model.  Single-threaded, no I/O
    inside the timed region.
    """
    if n_steps < 1000:
        raise ValueError("n_steps must be >= 1000 for stable statistics")
    u = ControlInput(0.0, 0.2674)
    lat = np.empty(n_steps)

    state6 = State6(0.0, 0.0, 0.0, 5.0, 0.0, 0.0)
    for i in range(n_steps):
        t0 = time.perf_counter_ns()
        state6, _ = step_proposed_flagged(params, state6, u, ts)
        lat[i] = time.perf_counter_ns() - t0
    proposed = _stats(lat)

    state4 = KinematicState(0.0, 0.0, 0.0, 5.0)
    for i in range(n_steps):
        t0 = time.perf_counter_ns()
        state4 = step_kinematic(params, state4, u, ts)
        lat[i] = time.perf_counter_ns() - t0
    kinematic = _stats(lat)

    return {"proposed": proposed, "kinematic": kinematic}


def _stats(lat_ns: np.ndarray) -> TimingStats:
    sec = lat_ns * 1e-9
    return TimingStats(
        mean=float(sec.mean()),
        median=float(np.median(sec)),
        p95=float(np.percentile(sec, 95)),
    )
