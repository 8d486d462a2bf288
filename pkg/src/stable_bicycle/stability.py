"""Numerical stability analysis of the semi-implicit lateral update.

Perturbations of the reduced state (U, V, omega) propagate through the
mean-value Jacobian

    A = [[1,    0     ],
         [b,    A_hat ]]

where the 2x2 block ``A_hat`` acts on the lateral pair and depends only on
the tau-averaged longitudinal speed, the parameters and the step size.  The
stability hypothesis checked here is that the per-step error growth factor
of ``A_hat`` stays at or below 1 over the operating envelope.

Metric note.  The growth factor used for the sweep is the spectral radius
(largest eigenvalue magnitude).  The induced 2-norm (largest singular value)
is also provided: it exceeds 1 in the high-speed/large-step corner of the
envelope even though the recursion contracts there, so it is unusable as the
sweep gate; see ``spectral_norm_2x2`` vs ``growth_factor_2x2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .integrators import check_step_size
from .trajectory import Schedule
from .vehicle import State3, State6, VehicleParams

#: Slack on the <= 1 comparison, absorbing roundoff at the ts -> 0 limit
#: where the block tends to the identity.
CONDITION_TOL = 1e-12


@dataclass(frozen=True, slots=True)
class TauPoint:
    """Mean-value evaluation point between two reduced states.

    Component j of the Jacobian row is evaluated at the convex combination
    x + tau[j] * (y - x); ``state`` holds the combination actually used for
    the lateral block (all three components at a common tau).
    """

    tau: tuple[float, float, float]
    state: State3

    def __post_init__(self):
        if any(not 0.0 <= t <= 1.0 for t in self.tau):
            raise ValueError("tau components must lie in [0, 1]")


def tau_point(x: State3, y: State3, tau: float) -> TauPoint:
    """Convex combination x + tau*(y - x) with a common tau for all rows."""
    return TauPoint(
        (tau, tau, tau),
        State3(
            x.U + tau * (y.U - x.U),
            x.V + tau * (y.V - x.V),
            x.omega + tau * (y.omega - x.omega),
        ),
    )


@dataclass(frozen=True)
class JacobianBlocks:
    """Mean-value Jacobian of the reduced update: full 3x3 and its blocks."""

    a_hat: np.ndarray  # 2x2 lateral block
    b: np.ndarray      # 2-vector, sensitivities to U
    full: np.ndarray   # 3x3 [[1, 0, 0], [b | a_hat]]


def a_hat(p: VehicleParams, u_mid: float, ts: float) -> np.ndarray:
    """Lateral Jacobian block at tau-averaged speed ``u_mid``.

    Entries are the (V, omega) partial derivatives of the semi-implicit
    update; both denominators are positive for valid params, U >= 0, ts > 0,
    so the block is total.
    """
    if u_mid < 0:
        raise ValueError(f"u_mid must be >= 0, got {u_mid!r}")
    lk = p.l_f * p.k_f - p.l_r * p.k_r
    den_v = p.m * u_mid - ts * (p.k_f + p.k_r)
    den_w = p.I_z * u_mid - ts * (p.l_f**2 * p.k_f + p.l_r**2 * p.k_r)
    return np.array(
        [
            [p.m * u_mid / den_v, (ts * lk - ts * p.m * u_mid**2) / den_v],
            [ts * lk / den_w, p.I_z * u_mid / den_w],
        ]
    )


def b_vector(p: VehicleParams, mid: State3, delta: float, ts: float) -> np.ndarray:
    """U-sensitivities (b1, b2) of the lateral update at the mid state.

    Quotient-rule derivatives of the closed-form V and omega updates with
    respect to the longitudinal speed, all state components evaluated at the
    same mean-value point.
    """
    u, v, w = mid.U, mid.V, mid.omega
    lk = p.l_f * p.k_f - p.l_r * p.k_r
    den_v = p.m * u - ts * (p.k_f + p.k_r)
    den_w = p.I_z * u - ts * (p.l_f**2 * p.k_f + p.l_r**2 * p.k_r)
    num_v = p.m * u * v + ts * lk * w - ts * p.k_f * delta * u - ts * p.m * u**2 * w
    num_w = p.I_z * u * w + ts * lk * v - ts * p.l_f * p.k_f * delta * u
    b1 = (
        (p.m * v - (ts * p.k_f * delta + 2 * ts * p.m * u * w)) * den_v
        - p.m * num_v
    ) / den_v**2
    b2 = ((p.I_z * w - ts * p.l_f * p.k_f * delta) * den_w - p.I_z * num_w) / den_w**2
    return np.array([b1, b2])


def jacobian_blocks(
    p: VehicleParams, mid: State3, delta: float, ts: float
) -> JacobianBlocks:
    """Assemble the full 3x3 mean-value Jacobian and its blocks."""
    block = a_hat(p, mid.U, ts)
    b = b_vector(p, mid, delta, ts)
    full = np.zeros((3, 3))
    full[0, 0] = 1.0
    full[1:, 0] = b
    full[1:, 1:] = block
    return JacobianBlocks(a_hat=block, b=b, full=full)


def spectral_norm_2x2(mat: np.ndarray) -> float:
    """Largest singular value of a 2x2 matrix, in closed form.

    From the eigenvalues of M^T M: with f = ||M||_F^2 and d = det(M),
    sigma_max^2 = (f + sqrt(f^2 - 4 d^2)) / 2.
    """
    a, b = float(mat[0, 0]), float(mat[0, 1])
    c, d = float(mat[1, 0]), float(mat[1, 1])
    frob2 = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = frob2 * frob2 - 4.0 * det * det
    if disc < 0.0:  # roundoff only; disc is a difference of squares >= 0
        disc = 0.0
    return math.sqrt(0.5 * (frob2 + math.sqrt(disc)))


def growth_factor_2x2(mat: np.ndarray) -> float:
    """Largest eigenvalue magnitude (spectral radius) of a 2x2 matrix.

    For the lateral block this is the per-step linear error growth factor:
    eigenvalues come in a real or conjugate pair, so the radius is
    sqrt(|det|) in the complex case and max|root| in the real case.
    """
    a, b = float(mat[0, 0]), float(mat[0, 1])
    c, d = float(mat[1, 0]), float(mat[1, 1])
    tr = a + d
    det = a * d - b * c
    disc = tr * tr - 4.0 * det
    if disc < 0.0:
        return math.sqrt(abs(det))
    root = math.sqrt(disc)
    return max(abs((tr + root) / 2.0), abs((tr - root) / 2.0))


@dataclass
class StabilitySweepResult:
    """Growth factors of the lateral block over a (speed, step) grid."""

    u_grid: np.ndarray
    ts_list: tuple[float, ...]
    values: np.ndarray  # shape (len(ts_list), len(u_grid))
    tol: float = CONDITION_TOL
    violations: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def max_value(self) -> float:
        return float(self.values.max())

    @property
    def holds(self) -> bool:
        return not self.violations

    def rows(self):
        """(u_mid, ts, value) rows in deterministic order for serialization."""
        for i, ts in enumerate(self.ts_list):
            for j, u in enumerate(self.u_grid):
                yield float(u), float(ts), float(self.values[i, j])


def _growth_factor_grid(p: VehicleParams, u: np.ndarray, ts: float) -> np.ndarray:
    """Vectorized growth factor of the lateral block over a speed grid."""
    lk = p.l_f * p.k_f - p.l_r * p.k_r
    den_v = p.m * u - ts * (p.k_f + p.k_r)
    den_w = p.I_z * u - ts * (p.l_f**2 * p.k_f + p.l_r**2 * p.k_r)
    a = p.m * u / den_v
    b = (ts * lk - ts * p.m * u**2) / den_v
    c = ts * lk / den_w
    d = p.I_z * u / den_w
    tr = a + d
    det = a * d - b * c
    disc = tr * tr - 4.0 * det
    complex_pair = disc < 0.0
    root = np.sqrt(np.where(complex_pair, 0.0, disc))
    real_radius = np.maximum(np.abs((tr + root) / 2), np.abs((tr - root) / 2))
    return np.where(complex_pair, np.sqrt(np.abs(det)), real_radius)


def sweep_values(
    p: VehicleParams,
    u_grid: np.ndarray,
    ts_list: list[float],
    tol: float = CONDITION_TOL,
) -> StabilitySweepResult:
    """Evaluate growth factors on an explicit speed grid (see sweep_condition1)."""
    if not ts_list:
        raise ValueError("ts_list must not be empty")
    ts_list = [check_step_size(ts) for ts in ts_list]
    values = np.empty((len(ts_list), len(u_grid)))
    violations: list[tuple[float, float, float]] = []
    for i, ts in enumerate(ts_list):
        row = _growth_factor_grid(p, u_grid, ts)
        values[i] = row
        for j in np.flatnonzero(row > 1.0 + tol):
            violations.append((float(u_grid[j]), float(ts), float(row[j])))
    return StabilitySweepResult(
        u_grid=u_grid,
        ts_list=tuple(ts_list),
        values=values,
        tol=tol,
        violations=violations,
    )


def sweep_condition1(
    p: VehicleParams,
    u_min: float,
    u_max: float,
    n_grid: int,
    ts_list: list[float],
    tol: float = CONDITION_TOL,
) -> StabilitySweepResult:
    """Evaluate the stability hypothesis over a speed grid and step list.

    The lateral block depends on the tau-averaged speed only, and that
    average ranges over the convex hull of the grid bounds, so a 1-D sweep
    over the mid speed covers every pair of speeds in [u_min, u_max].
    Cells with growth factor > 1 + tol are reported as violations.
    """
    if not 0 <= u_min < u_max:
        raise ValueError("need 0 <= u_min < u_max")
    if n_grid < 2:
        raise ValueError("n_grid must be >= 2")
    return sweep_values(p, np.linspace(u_min, u_max, n_grid), ts_list, tol)


def error_propagation_demo(
    p: VehicleParams,
    s0: State6,
    perturbation: tuple[float, float, float],
    schedule: Schedule,
    ts: float,
    steps: int,
    integrator: str = "proposed",
) -> np.ndarray:
    """Norm of the (U, V, omega) gap between a nominal and a perturbed run.

    Both trajectories see the identical input schedule; the returned series
    has ``steps + 1`` entries starting at ||epsilon_0||.  ``integrator`` may
    be "proposed" or "forward_euler" (the contrast case).
    """
    from .integrators import step_forward_euler, step_proposed

    check_step_size(ts)
    steppers = {"proposed": step_proposed, "forward_euler": step_forward_euler}
    try:
        step = steppers[integrator]
    except KeyError:
        raise ValueError(f"unknown integrator {integrator!r}") from None

    du, dv, dw = perturbation
    a_state = s0
    b_state = State6(s0.X, s0.Y, s0.phi, s0.U + du, s0.V + dv, s0.omega + dw)
    series = np.empty(steps + 1)

    def gap(x: State6, y: State6) -> float:
        return math.sqrt((x.U - y.U) ** 2 + (x.V - y.V) ** 2 + (x.omega - y.omega) ** 2)

    series[0] = gap(a_state, b_state)
    from .vehicle import ControlInput

    for k in range(steps):
        a_k, d_k = schedule.at(k * ts)
        u = ControlInput(a_k, d_k)
        a_state = step(p, a_state, u, ts)
        b_state = step(p, b_state, u, ts)
        series[k + 1] = gap(a_state, b_state)
    return series
