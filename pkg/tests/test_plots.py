"""Every figure renderer runs against small real results and writes a file."""

import numpy as np

from stable_bicycle.harness import (
    NoiseSpec,
    Scenario,
    accuracy_table,
    run_noise_robustness,
    run_scenario,
    timing_benchmark,
)
from stable_bicycle.mpc import ObstacleState, OcpSpec, ReferenceGenerator, run_closed_loop
from stable_bicycle.plots import (
    plot_accuracy,
    plot_bench,
    plot_closed_loop,
    plot_noise,
    plot_sweep,
    plot_trajectory,
)
from stable_bicycle.stability import sweep_condition1
from stable_bicycle.trajectory import Schedule
from stable_bicycle.vehicle import HATCHBACK_PARAMS as P, State6


def test_all_figures_render(tmp_path):
    sweep = sweep_condition1(P, 0.0, 25.0, 51, [0.01, 0.1])
    plot_sweep(sweep, tmp_path / "sweep.png")

    sc = Scenario(P, State6(0, 0, 0, 8.0, 0, 0), Schedule.constant(delta=0.1),
                  0.05, 2.0, integrator="proposed")
    traj = run_scenario(sc)
    plot_trajectory(traj, tmp_path / "traj.png")

    reports = accuracy_table(P, [5.0], [0.05, 0.2], 1.0, 0.001, t_fine=1e-3)
    plot_accuracy(reports, tmp_path / "acc.png")

    noisy, _ = run_noise_robustness(sc, NoiseSpec(sigma=0.05, seed=0))
    plot_noise(traj, {0.05: noisy}, tmp_path / "noise.png")

    plot_bench(timing_benchmark(P, 1000), tmp_path / "bench.png")

    spec = OcpSpec()
    res = run_closed_loop(
        P, spec, ReferenceGenerator((30.0, 30.0), 6.0),
        ObstacleState(position=(1000.0, 1000.0), moved_position=(1001.0, 1001.0)),
        State6(0, 0, np.pi / 4, 6.0, 0, 0), 0.3,
    )
    plot_closed_loop(res, spec.d_s, tmp_path / "mpc_xy.png", tmp_path / "mpc_tr.png")

    for name in ("sweep", "traj", "acc", "noise", "bench", "mpc_xy", "mpc_tr"):
        assert (tmp_path / f"{name}.png").stat().st_size > 0
