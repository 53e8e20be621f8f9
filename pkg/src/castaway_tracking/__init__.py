"""Multi-UAV tracking of drifting castaways with a Kalman-filter-in-the-loop receding-horizon planner."""

__version__ = "0.1.0"

from .clustering import ClusterAssignment, ClusterParams, cluster_and_assign
from .coordination import FleetMessage, MessageBus, exchange_and_fuse, planning_round
from .estimation import FilterParams, TargetEstimate, fuse, initial_estimate, predict, update, update_missed
from .harness import (
    ConfigError,
    EpisodeLog,
    SimConfig,
    default_waves,
    export_episode,
    export_summary,
    run_episode,
    run_monte_carlo,
)
from .planner import Plan, PlannerConfig, fov_binaries, rollout, solve
from .seaworld import CastawayTruth, TruthTable, WaveSource, generate_truth, water_velocity
from .sensing import CameraSpec, DetectionProfile, Measurement, detection_probability, fov_extents, in_fov, sense
from .vehicle import AgentState, VehicleParams, step, validate

__all__ = [
    "AgentState", "CameraSpec", "CastawayTruth", "ClusterAssignment", "ClusterParams", "ConfigError",
    "DetectionProfile", "EpisodeLog", "FilterParams", "FleetMessage", "Measurement", "MessageBus", "Plan",
    "PlannerConfig", "SimConfig", "TargetEstimate", "TruthTable", "VehicleParams", "WaveSource",
    "cluster_and_assign", "default_waves", "detection_probability", "exchange_and_fuse", "export_episode", "export_summary",
    "fov_binaries", "fov_extents", "fuse", "generate_truth", "in_fov", "initial_estimate", "planning_round",
    "predict", "rollout", "run_episode", "run_monte_carlo", "sense", "solve", "step", "update", "update_missed",
    "validate", "water_velocity",
]
