"""Desk-scale multi-robot cooperative-driving simulator with MARL baselines."""

from .env import Env, EnvError, make
from .scenario import IDMParams, ScenarioConfig, ScenarioError, list_scenarios, load_config
from .world import (
    CollisionEvent,
    MotionCommand,
    RobotState,
    WorldError,
    WorldState,
    check_success,
    detect_collisions,
    load_scenario,
    raycast_lidar,
    step_world,
)

__version__ = "0.1.0"

__all__ = [
    "CollisionEvent",
    "Env",
    "EnvError",
    "IDMParams",
    "MotionCommand",
    "RobotState",
    "ScenarioConfig",
    "ScenarioError",
    "WorldError",
    "WorldState",
    "check_success",
    "detect_collisions",
    "list_scenarios",
    "load_config",
    "load_scenario",
    "make",
    "raycast_lidar",
    "step_world",
    "__version__",
]
