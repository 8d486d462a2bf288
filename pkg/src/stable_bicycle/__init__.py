"""Discrete-time single-track vehicle models with assured numerical stability.

The package provides:

* continuous dynamic and kinematic single-track models with linear tires
  (:mod:`stable_bicycle.vehicle`),
* four discrete transition maps, including an explicit semi-implicit scheme
  that is total at zero longitudinal speed (:mod:`stable_bicycle.integrators`),
* a numerical stability analyzer for the lateral Jacobian sub-block
  (:mod:`stable_bicycle.stability`),
* a scenario/simulation harness with accuracy, timing and noise experiments
  (:mod:`stable_bicycle.harness`),
* a receding-horizon controller for the stop-start obstacle task
  (:mod:`stable_bicycle.mpc`),
* a config-driven CLI writing CSV artifacts and figures
  (:mod:`stable_bicycle.cli`).
"""

__version__ = "0.1.0"

from .vehicle import (
    ControlInput,
    HysteresisState,
    KinematicState,
    LowSpeedSingularityError,
    ParameterError,
    State3,
    State6,
    VehicleParams,
    HATCHBACK_PARAMS,
    SUV_PARAMS,
    dynamic_rhs,
    kinematic_rhs,
    tire_forces,
    validate_params,
)
from .integrators import (
    FixedPointConfig,
    FixedPointDivergenceError,
    step_backward_euler,
    step_forward_euler,
    step_kinematic,
    step_proposed,
    reference_rk4,
)
from .trajectory import Schedule, Segment, Trajectory

__all__ = [
    "ControlInput",
    "FixedPointConfig",
    "FixedPointDivergenceError",
    "HATCHBACK_PARAMS",
    "HysteresisState",
    "KinematicState",
    "LowSpeedSingularityError",
    "ParameterError",
    "Schedule",
    "Segment",
    "State3",
    "State6",
    "SUV_PARAMS",
    "Trajectory",
    "VehicleParams",
    "dynamic_rhs",
    "kinematic_rhs",
    "reference_rk4",
    "step_backward_euler",
    "step_forward_euler",
    "step_kinematic",
    "step_proposed",
    "tire_forces",
    "validate_params",
]
