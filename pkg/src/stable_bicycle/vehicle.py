"""Single-track vehicle domain: parameters, states, continuous vector fields.

Sign convention: cornering stiffnesses k_f, k_r are *negative* (restoring
lateral force for positive slip).  Everything downstream relies on that sign,
because it makes the denominators of the semi-implicit lateral update

    m*U - T_s*(k_f + k_r)        and        I_z*U - T_s*(l_f^2 k_f + l_r^2 k_r)

strictly positive for every U >= 0 and T_s > 0.  ``validate_params`` turns the
convention into a checked invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


class ParameterError(ValueError):
    """A vehicle parameter violates its invariant."""


class LowSpeedSingularityError(ValueError):
    """Continuous-time tire slip is undefined at U <= 0.

    The slip angle estimate divides by the longitudinal speed, so the
    continuous model blows up as U -> 0.  Only the semi-implicit discrete
    scheme absorbs that singularity; callers that need U = 0 must use it.
    """


@dataclass(frozen=True, slots=True)
class VehicleParams:
    """Physical constants of the single-track model (SI units)."""

    m: float      # mass, kg
    I_z: float    # yaw inertia, kg m^2
    k_f: float    # front axle cornering stiffness, N/rad (negative)
    k_r: float    # rear axle cornering stiffness, N/rad (negative)
    l_f: float    # C.G. to front axle, m
    l_r: float    # C.G. to rear axle, m

    @property
    def wheelbase(self) -> float:
        return self.l_f + self.l_r


# Simulation prototype (mid-size hatchback) and test vehicle (electric SUV).
HATCHBACK_PARAMS = VehicleParams(
    m=1412.0, I_z=1536.7, k_f=-128916.0, k_r=-85944.0, l_f=1.06, l_r=1.85
)
SUV_PARAMS = VehicleParams(
    m=1892.0, I_z=3058.0, k_f=-186000.0, k_r=-183000.0, l_f=1.4, l_r=1.5
)


def validate_params(p: VehicleParams) -> VehicleParams:
    """Return ``p`` unchanged iff every invariant holds, else raise.

    The error message names the first violated invariant, e.g.
    ``"k_f must be negative"``.
    """
    checks = [
        (p.m > 0, "m must be positive"),
        (p.I_z > 0, "I_z must be positive"),
        (p.l_f > 0, "l_f must be positive"),
        (p.l_r > 0, "l_r must be positive"),
        (p.k_f < 0, "k_f must be negative"),
        (p.k_r < 0, "k_r must be negative"),
    ]
    for ok, message in checks:
        if not ok:
            raise ParameterError(message)
    for name in ("m", "I_z", "k_f", "k_r", "l_f", "l_r"):
        if not math.isfinite(getattr(p, name)):
            raise ParameterError(f"{name} must be finite")
    return p


@dataclass(frozen=True, slots=True)
class State6:
    """Full state: position, yaw and body-frame velocities.

    The yaw angle is kept unwrapped (no modulo 2*pi) so trajectory
    comparisons never see artificial discontinuities.
    """

    X: float      # horizontal position, m
    Y: float      # vertical position, m
    phi: float    # yaw angle, rad (unwrapped)
    U: float      # longitudinal velocity, m/s
    V: float      # lateral velocity, m/s
    omega: float  # yaw rate, rad/s

    def lateral(self) -> "State3":
        return State3(self.U, self.V, self.omega)


@dataclass(frozen=True, slots=True)
class State3:
    """Reduced state (U, V, omega); positions are pure integrals of these."""

    U: float
    V: float
    omega: float


@dataclass(frozen=True, slots=True)
class KinematicState:
    """State of the no-slip kinematic model."""

    X: float
    Y: float
    phi: float
    U: float


@dataclass(frozen=True, slots=True)
class ControlInput:
    """Longitudinal acceleration command and front wheel steering angle."""

    a: float      # m/s^2
    delta: float  # rad, |delta| < pi/2


def tire_forces(p: VehicleParams, s: State3 | State6, delta: float) -> tuple[float, float]:
    """Linear lateral tire forces (F_f, F_r) in N.

    F_f = k_f * ((V + l_f*omega)/U - delta)
    F_r = k_r * ( (V - l_r*omega)/U )

    Requires U > 0; the slip estimate divides by the longitudinal speed,
    which is exactly the low-speed singularity this package is about.
    """
    if s.U <= 0.0:
        raise LowSpeedSingularityError(
            f"tire slip angle is singular at U={s.U!r} <= 0 (low-speed "
            "singularity); use the semi-implicit discrete scheme instead"
        )
    alpha_f = (s.V + p.l_f * s.omega) / s.U - delta
    alpha_r = (s.V - p.l_r * s.omega) / s.U
    return p.k_f * alpha_f, p.k_r * alpha_r


def dynamic_rhs(p: VehicleParams, s: State6, u: ControlInput) -> tuple[float, float, float, float, float, float]:
    """Continuous-time vector field of the dynamic model.

    Returns (dX, dY, dphi, dU, dV, domega).  Propagates the low-speed
    singularity error for U <= 0.
    """
    f_f, f_r = tire_forces(p, s, u.delta)
    cos_phi = math.cos(s.phi)
    sin_phi = math.sin(s.phi)
    cos_d = math.cos(u.delta)
    sin_d = math.sin(u.delta)
    return (
        s.U * cos_phi - s.V * sin_phi,
        s.U * sin_phi + s.V * cos_phi,
        s.omega,
        u.a + s.V * s.omega - f_f * sin_d / p.m,
        -s.U * s.omega + (f_f * cos_d + f_r) / p.m,
        (p.l_f * f_f * cos_d - p.l_r * f_r) / p.I_z,
    )


def kinematic_rhs(p: VehicleParams, s: KinematicState, u: ControlInput) -> tuple[float, float, float, float]:
    """Vector field of the no-slip kinematic model: (dX, dY, dphi, dU).

    Both axles roll without lateral slip; the rear-axle share l_r/(l_f+l_r)
    of U*tan(delta) appears as body-lateral velocity.
    """
    if not abs(u.delta) < math.pi / 2:
        raise ValueError(f"|delta| must be < pi/2, got {u.delta!r}")
    lat = p.l_r / p.wheelbase * s.U * math.tan(u.delta)
    return (
        s.U * math.cos(s.phi) - lat * math.sin(s.phi),
        s.U * math.sin(s.phi) + lat * math.cos(s.phi),
        s.U * math.tan(u.delta) / p.wheelbase,
        u.a,
    )


@dataclass(frozen=True, slots=True)
class HysteresisState:
    """Low-pass-filtered slip state of the industry baseline workaround.

    kappa_f/kappa_r relax toward the raw slip ratio V/|U| with relaxation
    length L_y; speeds below U_low_alpha are clamped in the denominator.
    This baseline is qualitative only: L_y and U_low_alpha are typical
    magnitudes, not identified values.
    """

    kappa_f: float = 0.0
    kappa_r: float = 0.0
    L_y: float = 0.5          # relaxation length, m
    U_low_alpha: float = 1.0  # speed lower bound, m/s


def wheel_center_velocities(
    p: VehicleParams, s: State6, delta: float
) -> tuple[float, float, float, float]:
    """Tangential/normal wheel-center velocities (U_f, V_f, U_r, V_r).

    Standard single-track kinematics: the front pair is the body velocity at
    the front axle rotated into the steered wheel frame, the rear pair is
    unrotated.
    """
    v_axle_f = s.V + p.l_f * s.omega
    cos_d = math.cos(delta)
    sin_d = math.sin(delta)
    u_f = s.U * cos_d + v_axle_f * sin_d
    v_f = -s.U * sin_d + v_axle_f * cos_d
    return u_f, v_f, s.U, s.V - p.l_r * s.omega


def hysteresis_step(
    h: HysteresisState,
    wheel_vels: tuple[float, float, float, float],
    ts: float,
) -> tuple[HysteresisState, tuple[float, float]]:
    """One forward-Euler step of the hysteresis filter.

    Integrates d(kappa)/dt = (V - kappa*|U|) / L_y per axle with |U| clamped
    from below at U_low_alpha, and returns the filtered slip angles
    alpha_L = arctan(kappa).
    """
    if ts <= 0.0:
        raise ValueError(f"ts must be positive, got {ts!r}")
    u_f, v_f, u_r, v_r = wheel_vels
    u_f_mag = max(abs(u_f), h.U_low_alpha)
    u_r_mag = max(abs(u_r), h.U_low_alpha)
    kappa_f = h.kappa_f + ts * (v_f - h.kappa_f * u_f_mag) / h.L_y
    kappa_r = h.kappa_r + ts * (v_r - h.kappa_r * u_r_mag) / h.L_y
    updated = replace(h, kappa_f=kappa_f, kappa_r=kappa_r)
    return updated, (math.atan(kappa_f), math.atan(kappa_r))
