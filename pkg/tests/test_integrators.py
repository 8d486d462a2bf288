import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stable_bicycle.integrators import (
    FixedPointConfig,
    FixedPointDivergenceError,
    OracleSingularityError,
    proposed_update_arrays,
    reference_rk4,
    step_backward_euler,
    step_forward_euler,
    step_kinematic,
    step_proposed,
    step_proposed_flagged,
)
from stable_bicycle.trajectory import Schedule, Segment
from stable_bicycle.vehicle import (
    HATCHBACK_PARAMS,
    ControlInput,
    KinematicState,
    LowSpeedSingularityError,
    State6,
    dynamic_rhs,
)

P = HATCHBACK_PARAMS
U0 = ControlInput(0.0, 0.0)


class TestForwardEuler:
    def test_straight_rolling(self):
        out = step_forward_euler(P, State6(0, 0, 0, 10.0, 0, 0), U0, 0.01)
        assert out == State6(0.1, 0.0, 0.0, 10.0, 0.0, 0.0)

    def test_one_step_matches_rhs_oracle(self):
        # oracle: independently evaluated vector field times the step
        s = State6(0, 0, 0, 10.0, 0.5, 0)
        d = dynamic_rhs(P, s, U0)
        out = step_forward_euler(P, s, U0, 0.01)
        assert out.V == pytest.approx(0.5 + 0.01 * d[4], rel=1e-15)
        assert out.V == pytest.approx(0.42392, abs=1e-5)
        assert out.omega == pytest.approx(0.01 * d[5], rel=1e-15)
        assert out.omega == pytest.approx(0.00727, abs=1e-5)

    def test_singularity_propagates(self):
        with pytest.raises(LowSpeedSingularityError):
            step_forward_euler(P, State6(0, 0, 0, 0.0, 0, 0), U0, 0.01)

    def test_step_steer_divergence_at_large_step(self):
        # two-level step steer at 8 m/s blows up within 2 s at ts = 0.1,
        # while the semi-implicit run stays small: compare the envelopes.
        # The oscillation can throw U below zero, which ends the forward
        # run with the singularity error; by then the peak is already huge.
        sched = Schedule([Segment(0.0, 0.0, 0.1347), Segment(1.0, 0.0, 0.2674)])
        ts = 0.1
        fe = State6(0, 0, 0, 8.0, 0, 0)
        pr = State6(0, 0, 0, 8.0, 0, 0)
        envelope = 0.0
        fe_peak = 0.0
        for k in range(20):
            a, d = sched.at(k * ts)
            u = ControlInput(a, d)
            pr = step_proposed(P, pr, u, ts)
            envelope = max(envelope, abs(pr.V), abs(pr.omega))
            try:
                fe = step_forward_euler(P, fe, u, ts)
            except LowSpeedSingularityError:
                break
            fe_peak = max(fe_peak, abs(fe.V), abs(fe.omega))
        assert fe_peak > 10 * envelope


class TestBackwardEuler:
    def test_straight_rolling_one_iteration(self):
        # f does not depend on the unknowns here, so the seed is the answer
        s = State6(0, 0, 0, 10.0, 0, 0)
        cfg = FixedPointConfig(max_iters=1, tol=1e-12)
        out = step_backward_euler(P, s, U0, 0.01, cfg)
        assert out == step_forward_euler(P, s, U0, 0.01)

    def test_residual_oracle(self):
        # the implicit equation itself is the oracle
        s = State6(0, 0, 0, 10.0, 0.5, 0)
        cfg = FixedPointConfig(max_iters=200, tol=1e-12)
        out = step_backward_euler(P, s, U0, 0.01, cfg)
        d = dynamic_rhs(P, out, U0)
        residual = math.sqrt(
            (out.X - s.X - 0.01 * d[0]) ** 2
            + (out.Y - s.Y - 0.01 * d[1]) ** 2
            + (out.phi - s.phi - 0.01 * d[2]) ** 2
            + (out.U - s.U - 0.01 * d[3]) ** 2
            + (out.V - s.V - 0.01 * d[4]) ** 2
            + (out.omega - s.omega - 0.01 * d[5]) ** 2
        )
        assert residual < 1e-10

    def test_absurd_step_fails_to_converge(self):
        # contraction fails at a huge step; iterates oscillate or escape the
        # speed domain, either way surfacing as non-convergence
        with pytest.raises(FixedPointDivergenceError):
            step_backward_euler(
                P, State6(0, 0, 0, 10.0, 0.5, 0.1), U0, 1.0,
                FixedPointConfig(max_iters=50, tol=1e-10),
            )

    def test_caller_state_at_standstill_is_singular(self):
        with pytest.raises(LowSpeedSingularityError):
            step_backward_euler(P, State6(0, 0, 0, 0.0, 0, 0), U0, 0.01)

    def test_random_midspeed_residuals(self, rng):
        cfg = FixedPointConfig(max_iters=200, tol=1e-12)
        for _ in range(100):
            s = State6(0, 0, rng.uniform(-3, 3), rng.uniform(5, 15),
                       rng.uniform(-1, 1), rng.uniform(-0.5, 0.5))
            u = ControlInput(rng.uniform(-2, 2), rng.uniform(-0.2, 0.2))
            out = step_backward_euler(P, s, u, 0.01, cfg)
            d = dynamic_rhs(P, out, u)
            res = max(
                abs(out.X - s.X - 0.01 * d[0]),
                abs(out.Y - s.Y - 0.01 * d[1]),
                abs(out.phi - s.phi - 0.01 * d[2]),
                abs(out.U - s.U - 0.01 * d[3]),
                abs(out.V - s.V - 0.01 * d[4]),
                abs(out.omega - s.omega - 0.01 * d[5]),
            )
            assert res < 1e-10


class TestProposed:
    def test_straight_rolling(self):
        out = step_proposed(P, State6(0, 0, 0, 10.0, 0, 0), U0, 0.1)
        assert out == State6(1.0, 0.0, 0.0, 10.0, 0.0, 0.0)

    def test_standstill_yaw_rate_hand_value(self):
        # oracle: closed forms collapse at U=0; ts cancels out of V'
        lk = P.l_f * P.k_f - P.l_r * P.k_r
        expected_v = lk * 0.1 / (-(P.k_f + P.k_r))
        for ts in (0.001, 0.01, 0.1, 1.0):
            out = step_proposed(P, State6(0, 0, 0, 0.0, 0.0, 0.1), U0, ts)
            assert out.U == 0.0
            assert out.V == pytest.approx(expected_v, rel=1e-12)
            assert out.V == pytest.approx(0.010400, abs=1e-6)
            assert out.omega == 0.0

    def test_consistency_with_forward_euler_second_order(self):
        # proposed minus forward Euler shrinks ~4x when ts halves
        s = State6(0, 0, 0, 10.0, 0.5, 0)

        def gap(ts):
            a = step_proposed(P, s, U0, ts)
            b = step_forward_euler(P, s, U0, ts)
            return math.hypot(a.V - b.V, a.omega - b.omega)

        g1, g2 = gap(1e-3), gap(5e-4)
        assert g1 / g2 == pytest.approx(4.0, rel=0.05)

    def test_equivalence_zero_lateral_dynamics(self):
        # with V = omega = delta = 0 and coasting, all three maps produce
        # bit-identical updates (the implicit step's speed correction is zero)
        s = State6(1.0, 2.0, 0.3, 12.0, 0.0, 0.0)
        u = ControlInput(0.0, 0.0)
        fe = step_forward_euler(P, s, u, 0.05)
        pr = step_proposed(P, s, u, 0.05)
        be = step_backward_euler(P, s, u, 0.05, FixedPointConfig(max_iters=5, tol=1e-9))
        assert fe == pr == be

    def test_accelerating_straight_speeds_agree(self):
        # under acceleration the longitudinal update is shared; positions of
        # the implicit map lawfully use the end-of-step speed instead
        s = State6(0.0, 0.0, 0.0, 12.0, 0.0, 0.0)
        u = ControlInput(1.5, 0.0)
        fe = step_forward_euler(P, s, u, 0.05)
        pr = step_proposed(P, s, u, 0.05)
        be = step_backward_euler(P, s, u, 0.05, FixedPointConfig(max_iters=5, tol=1e-12))
        assert fe.U == pr.U == be.U
        assert fe.X == pr.X
        assert be.X == pytest.approx(s.X + 0.05 * be.U, rel=1e-15)

    def test_braking_clamps_speed_at_zero(self):
        out, clamped = step_proposed_flagged(
            P, State6(0, 0, 0, 0.1, 0, 0), ControlInput(-5.0, 0.0), 0.1
        )
        assert out.U == 0.0
        assert clamped

    def test_totality_bulk_random(self, rng):
        # vectorized sweep over a large random batch, U = 0 included
        n = 200_000
        u_speed = rng.uniform(0, 30, n)
        u_speed[rng.uniform(size=n) < 0.05] = 0.0
        x, y, phi, v, w = (rng.uniform(-100, 100, n), rng.uniform(-100, 100, n),
                           rng.uniform(-7, 7, n), rng.uniform(-5, 5, n),
                           rng.uniform(-3, 3, n))
        a, d = rng.uniform(-5, 5, n), rng.uniform(-0.7, 0.7, n)
        ts = rng.uniform(1e-4, 1.0, n)
        out = proposed_update_arrays(P, x, y, phi, u_speed, v, w, a, d, ts)
        for comp in out[:6]:
            assert np.isfinite(comp).all()
        assert (out[3] >= 0).all()

    @settings(max_examples=300, deadline=None)
    @given(
        u_speed=st.one_of(st.just(0.0), st.floats(0, 30)),
        v=st.floats(-5, 5),
        w=st.floats(-3, 3),
        a=st.floats(-5, 5),
        delta=st.floats(-0.7, 0.7),
        ts=st.floats(1e-6, 1.0),
    )
    def test_totality_property(self, u_speed, v, w, a, delta, ts):
        out = step_proposed(
            P, State6(0, 0, 0, u_speed, v, w), ControlInput(a, delta), ts
        )
        for value in (out.X, out.Y, out.phi, out.U, out.V, out.omega):
            assert math.isfinite(value)
        assert out.U >= 0

    def test_scalar_path_matches_vectorized_core(self, rng):
        # the harness steps with the scalar twin, the controller with the
        # batched core; they must produce identical floats
        for _ in range(5000):
            state = State6(
                rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-7, 7),
                0.0 if rng.uniform() < 0.05 else rng.uniform(0, 30),
                rng.uniform(-5, 5), rng.uniform(-3, 3),
            )
            u = ControlInput(rng.uniform(-5, 5), rng.uniform(-0.7, 0.7))
            ts = rng.uniform(1e-4, 1.0)
            s, flag = step_proposed_flagged(P, state, u, ts)
            arr = proposed_update_arrays(
                P, state.X, state.Y, state.phi, state.U, state.V, state.omega,
                u.a, u.delta, ts,
            )
            assert (s.X, s.Y, s.phi, s.U, s.V, s.omega) == tuple(
                float(c) for c in arr[:6]
            )
            assert flag == bool(arr[6])


class TestKinematicStep:
    def test_straight(self):
        out = step_kinematic(P, KinematicState(0, 0, 0, 5.0), U0, 0.1)
        assert out == KinematicState(0.5, 0.0, 0.0, 5.0)

    def test_hand_turn_step(self):
        # oracle: kinematic_rhs example values times the step
        out = step_kinematic(P, KinematicState(0, 0, 0, 5.0), ControlInput(0, 0.1), 0.1)
        assert out.phi == pytest.approx(0.0172396, abs=1e-6)
        assert out.Y == pytest.approx(0.0318933, abs=1e-6)

    def test_at_rest_only_speed_changes(self):
        out = step_kinematic(P, KinematicState(1, 2, 0.5, 0.0), ControlInput(2.0, 0.3), 0.1)
        assert out == KinematicState(1.0, 2.0, 0.5, 0.2)


class TestReferenceRk4:
    def test_straight_line(self):
        traj = reference_rk4(
            P, State6(0, 0, 0, 10.0, 0, 0), Schedule.constant(), 1e-3, 1e-2, 1.0
        )
        assert traj.states[-1, 0] == pytest.approx(10.0, abs=1e-9)
        assert np.allclose(traj.states[:, 1:3], 0.0, atol=1e-12)
        assert np.allclose(traj.states[:, 4:6], 0.0, atol=1e-12)

    def test_self_convergence(self):
        # halving the internal step moves the endpoint by far less than 1e-6 m
        def endpoint(t_fine):
            traj = reference_rk4(
                P, State6(0, 0, 0, 5.0, 0, 0),
                Schedule.constant(delta=0.05), t_fine, 1e-2, 2.0,
            )
            return traj.states[-1, :2]

        a, b = endpoint(1e-4), endpoint(5e-5)
        assert np.linalg.norm(a - b) < 1e-6

    def test_order_four_convergence_rate(self):
        # classical RK4: halving h cuts the endpoint error ~16x
        def endpoint(t_fine):
            traj = reference_rk4(
                P, State6(0, 0, 0, 5.0, 0, 0),
                Schedule.constant(delta=0.1), t_fine, 4e-3, 1.0,
            )
            return traj.states[-1]

        fine = endpoint(5e-5)
        e1 = np.linalg.norm(endpoint(4e-4) - fine)
        e2 = np.linalg.norm(endpoint(2e-4) - fine)
        assert e1 / e2 > 8  # rate ~16, generous slack for roundoff

    def test_proximity_to_proposed_scheme(self):
        # both integrate the same lateral dynamics; gap is model + O(ts)
        sched = Schedule.constant(delta=0.05)
        ref = reference_rk4(P, State6(0, 0, 0, 5.0, 0, 0), sched, 1e-4, 1e-3, 5.0)
        s = State6(0, 0, 0, 5.0, 0, 0)
        err2 = 0.0
        for k in range(len(ref.t) - 1):
            s = step_proposed(P, s, ControlInput(0, 0.05), 1e-3)
            err2 += (s.X - ref.states[k + 1, 0]) ** 2 + (s.Y - ref.states[k + 1, 1]) ** 2
        rms = math.sqrt(err2 / (len(ref.t) - 1))
        assert rms < 0.05

    def test_singularity_floor_abort(self):
        with pytest.raises(OracleSingularityError, match="floor"):
            reference_rk4(
                P, State6(0, 0, 0, 1.0, 0, 0),
                Schedule.constant(a=-2.0), 1e-3, 1e-2, 2.0,
            )

    def test_global_error_monotone_in_step(self):
        # proposed-scheme global error vs the oracle shrinks with ts on a
        # scenario where the two continuous models coincide (delta = 0,
        # lateral transient from V0), isolating the discretization error
        sched = Schedule.constant()
        x0 = State6(0, 0, 0, 10.0, 0.5, 0)
        errors = []
        for ts in (0.1, 0.01, 0.001):
            ref = reference_rk4(P, x0, sched, 1e-4, ts, 2.0)
            s = x0
            err2 = 0.0
            for k in range(len(ref.t) - 1):
                s = step_proposed(P, s, ControlInput(0, 0), ts)
                err2 += (s.X - ref.states[k + 1, 0]) ** 2 + (s.Y - ref.states[k + 1, 1]) ** 2
            errors.append(math.sqrt(err2 / (len(ref.t) - 1)))
        assert errors[0] > errors[1] > errors[2]

    def test_local_consistency_all_schemes(self):
        # one step against the oracle: halving ts shrinks the local error
        # superlinearly for every Euler-family map
        x0 = State6(0, 0, 0, 10.0, 0.5, 0.1)
        u = ControlInput(0.5, 0.05)
        sched = Schedule.constant(a=0.5, delta=0.05)

        def oracle_endpoint(ts):
            traj = reference_rk4(P, x0, sched, ts / 1000, ts, ts)
            return traj.states[-1]

        cfg = FixedPointConfig(max_iters=200, tol=1e-13)
        steppers = {
            "forward": lambda ts: step_forward_euler(P, x0, u, ts),
            "backward": lambda ts: step_backward_euler(P, x0, u, ts, cfg),
            "proposed": lambda ts: step_proposed(P, x0, u, ts),
        }
        for name, step in steppers.items():
            errs = []
            for ts in (0.02, 0.01):
                out = step(ts)
                ref = oracle_endpoint(ts)
                errs.append(
                    np.linalg.norm(
                        np.array([out.X, out.Y, out.phi, out.U, out.V, out.omega]) - ref
                    )
                )
            assert errs[1] < 0.6 * errs[0], name

    def test_denominator_positivity_bulk(self, rng):
        # the totality argument rests on these two signs
        n = 1_000_000
        u_speed = rng.uniform(0, 60, n)
        u_speed[rng.uniform(size=n) < 0.05] = 0.0
        ts = rng.uniform(1e-9, 1.0, n)
        den_v = P.m * u_speed - ts * (P.k_f + P.k_r)
        den_w = P.I_z * u_speed - ts * (P.l_f**2 * P.k_f + P.l_r**2 * P.k_r)
        assert (den_v > 0).all() and (den_w > 0).all()

    def test_forward_euler_matches_proposed_at_fine_step(self):
        # on a gentle scenario both converge to the same flow: agreement
        # within 1e-3 m position RMS at ts = 1e-4
        ts = 1e-4
        u = ControlInput(0.0, 0.002)
        fe = State6(0, 0, 0, 10.0, 0, 0)
        pr = State6(0, 0, 0, 10.0, 0, 0)
        err2 = 0.0
        n = 10_000  # 1 s
        for _ in range(n):
            fe = step_forward_euler(P, fe, u, ts)
            pr = step_proposed(P, pr, u, ts)
            err2 += (fe.X - pr.X) ** 2 + (fe.Y - pr.Y) ** 2
        assert math.sqrt(err2 / n) < 1e-3
