"""Adaptive receding-horizon synchronization for HIV model parameter estimation."""
from .estimator import PEWindow, estimator_rhs, pe_metric
from .integrate import NonFiniteError, StepperKind
from .model import HivParams, ModelSpec, hiv_rhs, hiv_split, linear_model
from .nrhc import DivergenceError, NrhcConfig, SimState, SweepWorkspace, nrhc_step
from .oracle import ShootingResult, shoot_tpbvp, steady_state
from .sim import Scenario, SimulationDiverged, TrajectoryLog, builtin_scenarios, run_scenario

__version__ = "0.1.0"

__all__ = [
    "DivergenceError", "HivParams", "ModelSpec", "NonFiniteError", "NrhcConfig", "PEWindow",
    "Scenario", "ShootingResult", "SimState", "SimulationDiverged", "StepperKind",
    "SweepWorkspace", "TrajectoryLog", "builtin_scenarios", "estimator_rhs", "hiv_rhs",
    "hiv_split", "linear_model", "nrhc_step", "pe_metric", "run_scenario", "shoot_tpbvp",
    "steady_state",
]
