"""Discrete transition maps for the single-track model.

Four maps share one call convention (params, state, input, step):

* ``step_forward_euler``   explicit Euler on the full dynamic model,
* ``step_backward_euler``  implicit Euler solved by fixed-point iteration,
* ``step_proposed``        the explicit semi-implicit scheme, total at U = 0,
* ``step_kinematic``       explicit Euler on the no-slip kinematic model,

plus ``reference_rk4``, a fine-step classical Runge-Kutta integrator of the
same continuous dynamics that serves as the in-repo accuracy ground truth.

The semi-implicit scheme advances X, Y, phi, U explicitly and solves the
lateral pair (V, omega) backward-in-one-variable, which yields closed forms

    V'     = (m U V + T_s (l_f k_f - l_r k_r) omega - T_s k_f delta U
              - T_s m U^2 omega) / (m U - T_s (k_f + k_r))
    omega' = (I_z U omega + T_s (l_f k_f - l_r k_r) V - T_s l_f k_f delta U)
             / (I_z U - T_s (l_f^2 k_f + l_r^2 k_r))

whose denominators stay positive for U >= 0, so the map is defined at
standstill where the continuous slip-angle model is singular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trajectory import Schedule, Trajectory, sample_count
from .vehicle import (
    ControlInput,
    KinematicState,
    LowSpeedSingularityError,
    State6,
    VehicleParams,
    dynamic_rhs,
    kinematic_rhs,
)


class FixedPointDivergenceError(RuntimeError):
    """Backward-Euler fixed-point iteration failed to converge."""


class OracleSingularityError(RuntimeError):
    """The RK4 reference hit the low-speed floor mid-integration."""


@dataclass(frozen=True, slots=True)
class FixedPointConfig:
    """Iteration control for the implicit Euler solve."""

    max_iters: int = 100
    tol: float = 1e-10  # on the successive-iterate infinity norm

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


def check_step_size(ts: float) -> float:
    """Validate a discrete step: positive, capped at 1 s (sanity bound)."""
    if not (0.0 < ts <= 1.0):
        raise ValueError(f"step size must be in (0, 1] s, got {ts!r}")
    return ts


def step_forward_euler(
    p: VehicleParams, s: State6, u: ControlInput, ts: float
) -> State6:
    """x' = x + ts * f(x, u) on the dynamic model.

    Deliberately carries no divergence guard: producing huge or non-finite
    values on stiff inputs is the observable behavior of this baseline.
    """
    d = dynamic_rhs(p, s, u)
    return State6(
        s.X + ts * d[0],
        s.Y + ts * d[1],
        s.phi + ts * d[2],
        s.U + ts * d[3],
        s.V + ts * d[4],
        s.omega + ts * d[5],
    )


def step_backward_euler(
    p: VehicleParams,
    s: State6,
    u: ControlInput,
    ts: float,
    cfg: FixedPointConfig = FixedPointConfig(),
) -> State6:
    """Implicit Euler: solve x' - ts * f(x', u) = x by fixed-point iteration.

    Seeded with the forward-Euler step.  Raises
    :class:`FixedPointDivergenceError` when the iteration does not contract
    within ``cfg.max_iters``, or when an iterate escapes the U > 0 domain
    (the chained cause then names the low-speed singularity).  A caller
    state with U <= 0 raises the singularity error directly.
    """
    x = step_forward_euler(p, s, u, ts)
    for _ in range(cfg.max_iters):
        try:
            d = dynamic_rhs(p, x, u)
        except LowSpeedSingularityError as exc:
            raise FixedPointDivergenceError(
                f"fixed-point iterate escaped the U > 0 domain at ts={ts}"
            ) from exc
        nxt = State6(
            s.X + ts * d[0],
            s.Y + ts * d[1],
            s.phi + ts * d[2],
            s.U + ts * d[3],
            s.V + ts * d[4],
            s.omega + ts * d[5],
        )
        diff = max(
            abs(nxt.X - x.X),
            abs(nxt.Y - x.Y),
            abs(nxt.phi - x.phi),
            abs(nxt.U - x.U),
            abs(nxt.V - x.V),
            abs(nxt.omega - x.omega),
        )
        x = nxt
        if not math.isfinite(diff):
            break
        if diff < cfg.tol:
            return x
    raise FixedPointDivergenceError(
        f"no fixed point within {cfg.max_iters} iterations at ts={ts}"
    )


def proposed_update_arrays(
    p: VehicleParams,
    X,
    Y,
    phi,
    U,
    V,
    omega,
    a,
    delta,
    ts,
):
    """Vectorized semi-implicit update; accepts scalars or numpy arrays.

    Returns (X', Y', phi', U', V', omega', clamped) with ``clamped`` True
    where the U' >= 0 clamp engaged (braking through standstill).
    """
    cos_phi = np.cos(phi)
    sin_phi = np.sin(phi)
    x_n = X + ts * (U * cos_phi - V * sin_phi)
    y_n = Y + ts * (V * cos_phi + U * sin_phi)
    phi_n = phi + ts * omega
    u_raw = U + ts * a
    clamped = u_raw < 0.0
    u_n = np.maximum(u_raw, 0.0)
    # lateral pair: denominators positive for valid params, U >= 0, ts > 0
    lk = p.l_f * p.k_f - p.l_r * p.k_r
    den_v = p.m * U - ts * (p.k_f + p.k_r)
    den_w = p.I_z * U - ts * (p.l_f**2 * p.k_f + p.l_r**2 * p.k_r)
    v_n = (p.m * U * V + ts * lk * omega - ts * p.k_f * delta * U - ts * p.m * U**2 * omega) / den_v
    w_n = (p.I_z * U * omega + ts * lk * V - ts * p.l_f * p.k_f * delta * U) / den_w
    return x_n, y_n, phi_n, u_n, v_n, w_n, clamped


def step_proposed_flagged(
    p: VehicleParams, s: State6, u: ControlInput, ts: float
) -> tuple[State6, bool]:
    """Semi-implicit step plus the U-clamp saturation flag.

    Scalar twin of :func:`proposed_update_arrays`, written with plain floats
    because this is the per-step hot path of the simulation harness.
    """
    cos_phi = math.cos(s.phi)
    sin_phi = math.sin(s.phi)
    x_n = s.X + ts * (s.U * cos_phi - s.V * sin_phi)
    y_n = s.Y + ts * (s.V * cos_phi + s.U * sin_phi)
    phi_n = s.phi + ts * s.omega
    u_raw = s.U + ts * u.a
    clamped = u_raw < 0.0
    u_n = 0.0 if clamped else u_raw
    lk = p.l_f * p.k_f - p.l_r * p.k_r
    den_v = p.m * s.U - ts * (p.k_f + p.k_r)
    den_w = p.I_z * s.U - ts * (p.l_f**2 * p.k_f + p.l_r**2 * p.k_r)
    v_n = (
        p.m * s.U * s.V + ts * lk * s.omega - ts * p.k_f * u.delta * s.U
        - ts * p.m * s.U**2 * s.omega
    ) / den_v
    w_n = (
        p.I_z * s.U * s.omega + ts * lk * s.V - ts * p.l_f * p.k_f * u.delta * s.U
    ) / den_w
    return State6(x_n, y_n, phi_n, u_n, v_n, w_n), clamped


def step_proposed(p: VehicleParams, s: State6, u: ControlInput, ts: float) -> State6:
    """Explicit semi-implicit step; total on U >= 0, including U = 0."""
    return step_proposed_flagged(p, s, u, ts)[0]


def step_kinematic(
    p: VehicleParams, s: KinematicState, u: ControlInput, ts: float
) -> KinematicState:
    """Forward-Euler step of the kinematic model."""
    d = kinematic_rhs(p, s, u)
    return KinematicState(
        s.X + ts * d[0],
        s.Y + ts * d[1],
        s.phi + ts * d[2],
        s.U + ts * d[3],
    )


def reference_rk4(
    p: VehicleParams,
    s0: State6,
    schedule: Schedule,
    t_fine: float,
    t_out: float,
    duration: float,
    u_floor: float = 1e-3,
) -> Trajectory:
    """Classical RK4 on the dynamic model at internal step ``t_fine``.

    Inputs are held constant between output samples (``t_out`` must be an
    integer multiple of ``t_fine``).  This trajectory is the in-repo ground
    truth for accuracy comparisons; it inherits the continuous-model
    singularity and aborts with :class:`OracleSingularityError` if U drops
    below ``u_floor``.
    """
    if t_fine <= 0 or t_out <= 0 or duration <= 0:
        raise ValueError("t_fine, t_out and duration must be positive")
    sub = int(round(t_out / t_fine))
    if sub < 1 or abs(sub * t_fine - t_out) > 1e-9 * t_out:
        raise ValueError("t_out must be an integer multiple of t_fine")
    if s0.U <= u_floor:
        raise OracleSingularityError(
            f"initial speed {s0.U} is at or below the oracle floor {u_floor}"
        )

    n_out = sample_count(duration, t_out) - 1
    # locals for the hot loop
    m, iz, kf, kr, lf, lr = p.m, p.I_z, p.k_f, p.k_r, p.l_f, p.l_r
    x, y, phi, u_, v, w = s0.X, s0.Y, s0.phi, s0.U, s0.V, s0.omega
    h = t_fine

    def rhs(x_, y_, phi_, u__, v_, w_, a_, d_):
        ff = kf * ((v_ + lf * w_) / u__ - d_)
        fr = kr * (v_ - lr * w_) / u__
        cp, sp = math.cos(phi_), math.sin(phi_)
        cd, sd = math.cos(d_), math.sin(d_)
        return (
            u__ * cp - v_ * sp,
            u__ * sp + v_ * cp,
            w_,
            a_ + v_ * w_ - ff * sd / m,
            -u__ * w_ + (ff * cd + fr) / m,
            (lf * ff * cd - lr * fr) / iz,
        )

    times = np.empty(n_out + 1)
    states = np.empty((n_out + 1, 6))
    inputs = np.empty((n_out + 1, 2))
    times[0] = 0.0
    states[0] = (x, y, phi, u_, v, w)
    inputs[0] = schedule.at(0.0)

    for k in range(n_out):
        a_k, d_k = schedule.at(k * t_out)
        inputs[k] = (a_k, d_k)
        for _ in range(sub):
            if u_ < u_floor:
                raise OracleSingularityError(
                    f"oracle aborted: U={u_:.6g} fell below the floor "
                    f"{u_floor} near t={(k + 1) * t_out:.6g} s"
                )
            k1 = rhs(x, y, phi, u_, v, w, a_k, d_k)
            k2 = rhs(
                x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], phi + 0.5 * h * k1[2],
                u_ + 0.5 * h * k1[3], v + 0.5 * h * k1[4], w + 0.5 * h * k1[5],
                a_k, d_k,
            )
            k3 = rhs(
                x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], phi + 0.5 * h * k2[2],
                u_ + 0.5 * h * k2[3], v + 0.5 * h * k2[4], w + 0.5 * h * k2[5],
                a_k, d_k,
            )
            k4 = rhs(
                x + h * k3[0], y + h * k3[1], phi + h * k3[2],
                u_ + h * k3[3], v + h * k3[4], w + h * k3[5],
                a_k, d_k,
            )
            x += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            y += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            phi += h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            u_ += h / 6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
            v += h / 6 * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4])
            w += h / 6 * (k1[5] + 2 * k2[5] + 2 * k3[5] + k4[5])
        times[k + 1] = (k + 1) * t_out
        states[k + 1] = (x, y, phi, u_, v, w)
    inputs[n_out] = schedule.at(n_out * t_out)

    return Trajectory(
        t=times,
        states=states,
        inputs=inputs,
        integrator="rk4_reference",
        ts=t_out,
        meta={"t_fine": t_fine},
    )
