"""Deterministic 2D differential-drive multi-robot simulator.

Modules: core (domain types and world model), kinematics (drive model and
pose integration), sensors (range and line sensing), controllers (navigation
and swarm behaviors), bus (topic middleware), engine (scenario stepper),
bridge (live WebSocket service), cli (entry points).
"""

from .core import (
    LedState,
    PARAM_PROFILES,
    Pose2D,
    RobotParams,
    SMARTMBOT_PARAMS,
    Twist2D,
    WheelSpeeds,
    WorldModel,
    normalize_angle,
)
from .engine import Engine, ScenarioError, TrajectoryLog, export_log, load_scenario

__all__ = [
    "Engine",
    "LedState",
    "PARAM_PROFILES",
    "Pose2D",
    "RobotParams",
    "SMARTMBOT_PARAMS",
    "ScenarioError",
    "TrajectoryLog",
    "Twist2D",
    "WheelSpeeds",
    "WorldModel",
    "export_log",
    "load_scenario",
    "normalize_angle",
]

__version__ = "0.1.0"
