"""Strict key-value run configuration.

INI-style file with sections ``[vehicle]``, ``[scenario]``, ``[sweep]``,
``[ocp]`` and ``[noise]``.  Unknown sections or keys are errors, so a typo
never silently falls back to a default.  Schema (defaults in parentheses):

[vehicle]   m, I_z, k_f, k_r, l_f, l_r                  -- all required
[scenario]  name (scenario), T_s (0.01), duration (5.0),
            integrator (proposed),
            X0 (0) Y0 (0) phi0 (0) U0 (0) V0 (0) omega0 (0),
            segments (one "0 0 0" row) -- multiline "t_start a delta" rows,
            fp_tol (1e-10), fp_max_iters (100),
            U0_list / delta_list / T_fine (1e-4)  -- used by `compare`,
            bench_steps (10000)                   -- used by `bench`
[sweep]     U_min (0), U_max (25), n_grid (2501),
            T_s_list (0.001 0.01 0.1)
[ocp]       N_p (20), N_c (1), Q (100 100 0 0 0 0), R (10 500),
            Q_s (1 1 0 0 0 0), D_s (8),
            x_min (-inf -inf -inf 0 -4 -3), x_max (inf inf inf 20 4 3),
            u_min (-5 -0.7853981633974483), u_max (2 0.7853981633974483),
            target (30 30), ref_speed (6), obstacle (15 15),
            obstacle_moved (18 12), stop_trigger_speed (0.05),
            duration (15), max_iters (200), tightening (0.15)
[noise]     sigma_list (0.01 0.05 0.10), n_seeds (10)

Lists are whitespace-separated; ``inf``/``-inf`` are accepted.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .harness import INTEGRATORS, Scenario
from .mpc import ObstacleState, OcpSpec, ReferenceGenerator
from .integrators import FixedPointConfig
from .trajectory import Schedule, Segment
from .vehicle import ParameterError, State6, VehicleParams, validate_params


class ConfigError(ValueError):
    """Malformed, unknown or missing configuration content."""


_VEHICLE_KEYS = {"m", "i_z", "k_f", "k_r", "l_f", "l_r"}
_SCENARIO_KEYS = {
    "name", "t_s", "duration", "integrator",
    "x0", "y0", "phi0", "u0", "v0", "omega0",
    "segments", "fp_tol", "fp_max_iters",
    "u0_list", "delta_list", "t_fine", "bench_steps",
}
_SWEEP_KEYS = {"u_min", "u_max", "n_grid", "t_s_list"}
_OCP_KEYS = {
    "n_p", "n_c", "q", "r", "q_s", "d_s", "x_min", "x_max", "u_min", "u_max",
    "target", "ref_speed", "obstacle", "obstacle_moved", "stop_trigger_speed",
    "duration", "max_iters", "tightening",
}
_NOISE_KEYS = {"sigma_list", "n_seeds"}
_SECTIONS = {
    "vehicle": _VEHICLE_KEYS,
    "scenario": _SCENARIO_KEYS,
    "sweep": _SWEEP_KEYS,
    "ocp": _OCP_KEYS,
    "noise": _NOISE_KEYS,
}


@dataclass
class SweepConfig:
    u_min: float = 0.0
    u_max: float = 25.0
    n_grid: int = 2501
    ts_list: list[float] = field(default_factory=lambda: [0.001, 0.01, 0.1])


@dataclass
class NoiseConfig:
    sigma_list: list[float] = field(default_factory=lambda: [0.01, 0.05, 0.10])
    n_seeds: int = 10


@dataclass
class CompareConfig:
    u0_list: list[float] = field(default_factory=lambda: [5.0, 10.0, 15.0, 20.0, 25.0])
    delta_list: list[float] = field(
        default_factory=lambda: [0.05, 0.10, 0.15, 0.20, 0.25]
    )
    duration: float = 5.0
    ts: float = 0.001
    t_fine: float = 1e-4


@dataclass
class McpScenarioConfig:
    """[ocp] contents beyond the OcpSpec itself."""

    target: tuple[float, float] = (30.0, 30.0)
    ref_speed: float = 6.0
    obstacle: tuple[float, float] = (15.0, 15.0)
    obstacle_moved: tuple[float, float] = (18.0, 12.0)
    stop_trigger_speed: float = 0.05
    duration: float = 15.0


@dataclass
class RunConfig:
    """Everything a subcommand may need, parsed and validated."""

    params: VehicleParams
    scenario: Scenario | None
    sweep: SweepConfig
    noise: NoiseConfig
    compare: CompareConfig
    ocp: OcpSpec
    mpc_scenario: McpScenarioConfig
    bench_steps: int = 10_000

    def reference_generator(self) -> ReferenceGenerator:
        return ReferenceGenerator(self.mpc_scenario.target, self.mpc_scenario.ref_speed)

    def obstacle(self) -> ObstacleState:
        return ObstacleState(
            position=self.mpc_scenario.obstacle,
            moved_position=self.mpc_scenario.obstacle_moved,
            trigger_speed=self.mpc_scenario.stop_trigger_speed,
        )


def _floats(raw: str, name: str, count: int | None = None) -> list[float]:
    try:
        vals = [float(tok) for tok in raw.split()]
    except ValueError as exc:
        raise ConfigError(f"{name}: expected numbers, got {raw!r}") from exc
    if count is not None and len(vals) != count:
        raise ConfigError(f"{name}: expected {count} values, got {len(vals)}")
    return vals


def _float(raw: str, name: str) -> float:
    return _floats(raw, name, 1)[0]


def _int(raw: str, name: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: expected an integer, got {raw!r}") from exc


def _segments(raw: str) -> Schedule:
    segs = []
    for line in raw.strip().splitlines():
        line = line.strip()
        if not line:
            continue
        vals = _floats(line, "scenario.segments line", 3)
        segs.append(Segment(vals[0], vals[1], vals[2]))
    if not segs:
        raise ConfigError("scenario.segments: no rows")
    try:
        return Schedule(segs)
    except ValueError as exc:
        raise ConfigError(f"scenario.segments: {exc}") from exc


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a config file; raise :class:`ConfigError` on any issue."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not read:
        raise ConfigError(f"config file not found: {path}")

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")

    if not parser.has_section("vehicle"):
        raise ConfigError("missing required section [vehicle]")
    veh = parser["vehicle"]
    for key in sorted(_VEHICLE_KEYS):
        if key not in veh:
            raise ConfigError(f"missing key {key!r} in [vehicle]")
    params = VehicleParams(
        m=_float(veh["m"], "vehicle.m"),
        I_z=_float(veh["i_z"], "vehicle.I_z"),
        k_f=_float(veh["k_f"], "vehicle.k_f"),
        k_r=_float(veh["k_r"], "vehicle.k_r"),
        l_f=_float(veh["l_f"], "vehicle.l_f"),
        l_r=_float(veh["l_r"], "vehicle.l_r"),
    )
    try:
        validate_params(params)
    except ParameterError as exc:
        raise ConfigError(f"[vehicle]: {exc}") from exc

    scenario = None
    compare = CompareConfig()
    bench_steps = 10_000
    if parser.has_section("scenario"):
        sec = parser["scenario"]
        ts = _float(sec.get("t_s", "0.01"), "scenario.T_s")
        duration = _float(sec.get("duration", "5.0"), "scenario.duration")
        integrator = sec.get("integrator", "proposed").strip()
        if integrator not in INTEGRATORS:
            raise ConfigError(
                f"scenario.integrator: unknown integrator {integrator!r}"
            )
        x0 = State6(
            X=_float(sec.get("x0", "0"), "scenario.X0"),
            Y=_float(sec.get("y0", "0"), "scenario.Y0"),
            phi=_float(sec.get("phi0", "0"), "scenario.phi0"),
            U=_float(sec.get("u0", "0"), "scenario.U0"),
            V=_float(sec.get("v0", "0"), "scenario.V0"),
            omega=_float(sec.get("omega0", "0"), "scenario.omega0"),
        )
        schedule = _segments(sec.get("segments", "0 0 0"))
        fp = FixedPointConfig(
            max_iters=_int(sec.get("fp_max_iters", "100"), "scenario.fp_max_iters"),
            tol=_float(sec.get("fp_tol", "1e-10"), "scenario.fp_tol"),
        )
        try:
            scenario = Scenario(
                params=params,
                x0=x0,
                schedule=schedule,
                ts=ts,
                duration=duration,
                integrator=integrator,
                fixed_point=fp,
                name=sec.get("name", "scenario").strip(),
            )
        except ValueError as exc:
            raise ConfigError(f"[scenario]: {exc}") from exc
        if "u0_list" in sec:
            compare.u0_list = _floats(sec["u0_list"], "scenario.U0_list")
        if "delta_list" in sec:
            compare.delta_list = _floats(sec["delta_list"], "scenario.delta_list")
        compare.duration = duration
        compare.ts = ts
        if "t_fine" in sec:
            compare.t_fine = _float(sec["t_fine"], "scenario.T_fine")
        bench_steps = _int(sec.get("bench_steps", "10000"), "scenario.bench_steps")
        if any(u0 <= 0 for u0 in compare.u0_list):
            raise ConfigError("scenario.U0_list: all speeds must be positive")

    sweep = SweepConfig()
    if parser.has_section("sweep"):
        sec = parser["sweep"]
        sweep.u_min = _float(sec.get("u_min", "0"), "sweep.U_min")
        sweep.u_max = _float(sec.get("u_max", "25"), "sweep.U_max")
        sweep.n_grid = _int(sec.get("n_grid", "2501"), "sweep.n_grid")
        if "t_s_list" in sec:
            sweep.ts_list = _floats(sec["t_s_list"], "sweep.T_s_list")
        if not sweep.ts_list:
            raise ConfigError("sweep.T_s_list: must list at least one step size")
        if not 0 <= sweep.u_min < sweep.u_max:
            raise ConfigError("sweep: need 0 <= U_min < U_max")
        if sweep.n_grid < 2:
            raise ConfigError("sweep.n_grid: must be >= 2")

    noise = NoiseConfig()
    if parser.has_section("noise"):
        sec = parser["noise"]
        if "sigma_list" in sec:
            noise.sigma_list = _floats(sec["sigma_list"], "noise.sigma_list")
        noise.n_seeds = _int(sec.get("n_seeds", "10"), "noise.n_seeds")
        if any(s < 0 for s in noise.sigma_list):
            raise ConfigError("noise.sigma_list: sigmas must be >= 0")
        if noise.n_seeds < 1:
            raise ConfigError("noise.n_seeds: must be >= 1")

    ocp = OcpSpec()
    mpc_sc = McpScenarioConfig()
    if parser.has_section("ocp"):
        sec = parser["ocp"]
        kwargs = {}
        if "n_p" in sec:
            kwargs["n_pred"] = _int(sec["n_p"], "ocp.N_p")
        if "n_c" in sec:
            kwargs["n_ctrl"] = _int(sec["n_c"], "ocp.N_c")
        for ini_key, attr, count in (
            ("q", "q", 6),
            ("r", "r", 2),
            ("q_s", "q_s", 6),
            ("x_min", "x_min", 6),
            ("x_max", "x_max", 6),
            ("u_min", "u_min", 2),
            ("u_max", "u_max", 2),
        ):
            if ini_key in sec:
                kwargs[attr] = np.array(_floats(sec[ini_key], f"ocp.{ini_key}", count))
        if "d_s" in sec:
            kwargs["d_s"] = _float(sec["d_s"], "ocp.D_s")
        if "max_iters" in sec:
            kwargs["max_iters"] = _int(sec["max_iters"], "ocp.max_iters")
        if "tightening" in sec:
            kwargs["tightening"] = _float(sec["tightening"], "ocp.tightening")
        try:
            ocp = OcpSpec(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"[ocp]: {exc}") from exc
        if "target" in sec:
            mpc_sc.target = tuple(_floats(sec["target"], "ocp.target", 2))
        if "ref_speed" in sec:
            mpc_sc.ref_speed = _float(sec["ref_speed"], "ocp.ref_speed")
        if "obstacle" in sec:
            mpc_sc.obstacle = tuple(_floats(sec["obstacle"], "ocp.obstacle", 2))
        if "obstacle_moved" in sec:
            mpc_sc.obstacle_moved = tuple(
                _floats(sec["obstacle_moved"], "ocp.obstacle_moved", 2)
            )
        if "stop_trigger_speed" in sec:
            mpc_sc.stop_trigger_speed = _float(
                sec["stop_trigger_speed"], "ocp.stop_trigger_speed"
            )
        if "duration" in sec:
            mpc_sc.duration = _float(sec["duration"], "ocp.duration")
        if mpc_sc.ref_speed < 0 or mpc_sc.duration <= 0:
            raise ConfigError("[ocp]: ref_speed must be >= 0 and duration > 0")
        if not all(
            math.isfinite(v)
            for v in (*mpc_sc.target, *mpc_sc.obstacle, *mpc_sc.obstacle_moved)
        ):
            raise ConfigError("[ocp]: positions must be finite")

    return RunConfig(
        params=params,
        scenario=scenario,
        sweep=sweep,
        noise=noise,
        compare=compare,
        ocp=ocp,
        mpc_scenario=mpc_sc,
        bench_steps=bench_steps,
    )
