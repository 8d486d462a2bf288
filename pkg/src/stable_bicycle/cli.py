"""Command-line entry point: one subcommand per experiment.

    stable-bicycle <subcommand> --config runs/paper.ini [--out DIR] [...]

Subcommands: sweep, simulate, compare, bench, noise, mpc.  Every run first
writes ``manifest.json`` into the output directory, then the subcommand's
CSV artifact(s) and the matching figure(s).

Exit codes: 0 success, 1 configuration error, 2 stability-gate violation
(``sweep`` found cells above 1), 3 partial results (``compare`` had cells
whose reference oracle aborted).
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .csvio import (
    RunManifest,
    fmt,
    write_closed_loop_csv,
    write_deviation_csv,
    write_rms_csv,
    write_sweep_csv,
    write_trajectory_csv,
)
from .harness import (
    NoiseSpec,
    _accuracy_cell,
    run_noise_robustness,
    run_scenario,
    timing_benchmark,
)
from .integrators import OracleSingularityError
from .mpc import run_closed_loop
from .stability import StabilitySweepResult, sweep_values
from .vehicle import State6

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STABILITY = 2
EXIT_PARTIAL = 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stable-bicycle",
        description="single-track vehicle model experiments",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, description in (
        ("sweep", "stability sweep of the lateral Jacobian block"),
        ("simulate", "open-loop scenario simulation"),
        ("compare", "accuracy grid against the fine-step reference"),
        ("bench", "transition-step timing benchmark"),
        ("noise", "steer-noise robustness experiment"),
        ("mpc", "closed-loop stop-start task"),
    ):
        cmd = sub.add_parser(name, help=description)
        cmd.add_argument("--config", required=True, help="run configuration file")
        cmd.add_argument(
            "--out",
            default=None,
            help="output directory (default: $STABLE_BICYCLE_OUT or ./out)",
        )
        cmd.add_argument("--seed", type=int, default=0, help="base RNG seed")
        cmd.add_argument("--jobs", type=int, default=1, help="worker processes")
        cmd.add_argument(
            "--integrator",
            choices=["forward_euler", "backward_euler", "proposed", "kinematic"],
            default=None,
            help="override the scenario integrator",
        )
        cmd.add_argument(
            "--no-plot", action="store_true", help="skip figure rendering"
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    out_dir = Path(
        args.out or os.environ.get("STABLE_BICYCLE_OUT") or "out"
    )
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir.mkdir(parents=True, exist_ok=True)
    RunManifest(
        subcommand=args.subcommand,
        config=str(args.config),
        out_dir=str(out_dir),
        seed=args.seed,
        version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
    ).write(out_dir / "manifest.json")

    handler = {
        "sweep": cmd_sweep,
        "simulate": cmd_simulate,
        "compare": cmd_compare,
        "bench": cmd_bench,
        "noise": cmd_noise,
        "mpc": cmd_mpc,
    }[args.subcommand]
    try:
        return handler(cfg, args, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _sweep_chunk(task) -> StabilitySweepResult:
    params, u_chunk, ts_list = task
    return sweep_values(params, u_chunk, ts_list)


def cmd_sweep(cfg: RunConfig, args, out_dir: Path) -> int:
    sw = cfg.sweep
    u_grid = np.linspace(sw.u_min, sw.u_max, sw.n_grid)
    if args.jobs > 1:
        # workers evaluate contiguous slices of the one global grid, so the
        # result is byte-identical to the serial run
        chunks = np.array_split(u_grid, args.jobs)
        tasks = [(cfg.params, chunk, sw.ts_list) for chunk in chunks if len(chunk)]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            parts = list(pool.map(_sweep_chunk, tasks))
        result = _merge_sweeps(parts)
    else:
        result = sweep_values(cfg.params, u_grid, sw.ts_list)

    write_sweep_csv(out_dir / "sweep.csv", result)
    if not args.no_plot:
        from .plots import plot_sweep

        plot_sweep(result, out_dir / "sweep.png")
    print(f"max_norm={fmt(result.max_value)} violations={len(result.violations)}")
    return EXIT_OK if result.holds else EXIT_STABILITY


def _merge_sweeps(parts: list[StabilitySweepResult]) -> StabilitySweepResult:
    u_grid = np.concatenate([p.u_grid for p in parts])
    values = np.concatenate([p.values for p in parts], axis=1)
    violations = [v for p in parts for v in p.violations]
    return StabilitySweepResult(
        u_grid=u_grid,
        ts_list=parts[0].ts_list,
        values=values,
        tol=parts[0].tol,
        violations=violations,
    )


def _require_scenario(cfg: RunConfig):
    if cfg.scenario is None:
        raise ConfigError("this subcommand needs a [scenario] section")
    return cfg.scenario


def cmd_simulate(cfg: RunConfig, args, out_dir: Path) -> int:
    scenario = _require_scenario(cfg)
    if args.integrator:
        scenario = replace(scenario, integrator=args.integrator)
    traj = run_scenario(scenario)
    write_trajectory_csv(out_dir / "trajectory.csv", traj)
    if not args.no_plot:
        from .plots import plot_trajectory

        plot_trajectory(traj, out_dir / "trajectory.png")
    print(
        f"samples={len(traj.t)} diverged={str(traj.diverged).lower()}"
        + (f" diverged_at={fmt(traj.diverged_at)}" if traj.diverged_at is not None else "")
        + f" clamped_steps={traj.clamped_steps}"
    )
    return EXIT_OK


def _compare_cell(task):
    params, u0, delta, duration, ts, t_fine = task
    cell = _accuracy_cell(params, u0, delta, duration, ts, t_fine)
    if isinstance(cell, OracleSingularityError):
        return (u0, delta, str(cell))
    return cell


def cmd_compare(cfg: RunConfig, args, out_dir: Path) -> int:
    cp = cfg.compare
    tasks = [
        (cfg.params, u0, d, cp.duration, cp.ts, cp.t_fine)
        for u0 in cp.u0_list
        for d in cp.delta_list
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            cells = list(pool.map(_compare_cell, tasks))
    else:
        cells = [_compare_cell(t) for t in tasks]

    reports = [c for c in cells if not isinstance(c, tuple)]
    aborted = [c for c in cells if isinstance(c, tuple)]
    write_rms_csv(out_dir / "compare.csv", reports)
    if not args.no_plot:
        from .plots import plot_accuracy

        plot_accuracy(reports, out_dir / "compare.png")
    for u0, delta, msg in aborted:
        print(f"cell U0={u0:g} delta={delta:g} aborted: {msg}", file=sys.stderr)
    improved = sum(1 for r in reports if r.improvement_pct > 0)
    print(
        f"cells={len(cells)} aborted={len(aborted)} improved={improved}"
    )
    return EXIT_PARTIAL if aborted else EXIT_OK


def cmd_bench(cfg: RunConfig, args, out_dir: Path) -> int:
    stats = timing_benchmark(cfg.params, cfg.bench_steps)
    with open(out_dir / "bench.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("integrator,mean_s,median_s,p95_s\n")
        for name, st in stats.items():
            fh.write(f"{name},{fmt(st.mean)},{fmt(st.median)},{fmt(st.p95)}\n")
    if not args.no_plot:
        from .plots import plot_bench

        plot_bench(stats, out_dir / "bench.png")
    ratio = stats["proposed"].mean / stats["kinematic"].mean
    print(
        f"proposed_mean={fmt(stats['proposed'].mean)}s "
        f"kinematic_mean={fmt(stats['kinematic'].mean)}s ratio={fmt(ratio)}"
    )
    return EXIT_OK


def cmd_noise(cfg: RunConfig, args, out_dir: Path) -> int:
    base = _require_scenario(cfg)
    clean = run_scenario(base)
    sigmas = sorted(cfg.noise.sigma_list)
    deviations: dict[float, list[float]] = {}
    noisy_by_sigma = {}
    finals = {}
    monotone = 0
    for i in range(cfg.noise.n_seeds):
        seed = args.seed + i
        seed_finals = []
        for sigma in sigmas:
            noisy, dev = run_noise_robustness(base, NoiseSpec(sigma=sigma, seed=seed))
            seed_finals.append(float(dev[-1]))
            if i == 0:  # CSV and figure show the base-seed family
                deviations[sigma] = list(dev)
                noisy_by_sigma[sigma] = noisy
                finals[sigma] = dev[-1]
        monotone += all(a <= b for a, b in zip(seed_finals, seed_finals[1:]))
    write_deviation_csv(out_dir / "noise.csv", deviations)
    write_trajectory_csv(out_dir / "noise_free.csv", clean)
    if not args.no_plot:
        from .plots import plot_noise

        plot_noise(clean, noisy_by_sigma, out_dir / "noise.png")
    summary = " ".join(
        f"final_dev[{fmt(s)}]={fmt(v)}" for s, v in sorted(finals.items())
    )
    print(f"{summary} monotone_seeds={monotone}/{cfg.noise.n_seeds}")
    return EXIT_OK


def cmd_mpc(cfg: RunConfig, args, out_dir: Path) -> int:
    scenario = cfg.mpc_scenario
    x0 = State6(0.0, 0.0, np.pi / 4, scenario.ref_speed, 0.0, 0.0)
    t0 = time.perf_counter()
    result = run_closed_loop(
        cfg.params,
        cfg.ocp,
        cfg.reference_generator(),
        cfg.obstacle(),
        x0,
        scenario.duration,
    )
    wall = time.perf_counter() - t0
    write_closed_loop_csv(out_dir / "closed_loop.csv", result)
    if not args.no_plot:
        from .plots import plot_closed_loop

        plot_closed_loop(
            result, cfg.ocp.d_s, out_dir / "mpc_trajectory.png", out_dir / "mpc_controls.png"
        )
    min_margin = float(result.margins[1:].min()) if len(result.margins) > 1 else float("nan")
    stop = fmt(result.stop_time) if result.stop_time is not None else "none"
    moved = fmt(result.obstacle.move_time) if result.obstacle.move_time is not None else "none"
    print(
        f"stop_time={stop} obstacle_move_time={moved} "
        f"min_obstacle_distance={fmt(min_margin)} wall_s={fmt(wall)}"
    )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
