"""Flatland: a lightweight first-person 2-D arena for reinforcement learning.

The agent is a disc that senses the world through a fan of color rays and
navigates a walled room collecting fruits (+10) while avoiding poisons (-10).
The package bundles the simulator, three baseline learners (DQN, A3C, DFP),
a multi-seed experiment harness, and a socket server for remote clients.
"""

from .config import EnvConfig, default_benchmark_config, load_config, parse_config
from .env import Environment, EnvState, StepResult, measurements, reset, step
from .geom import MotionParams, Pose, Vec2, World
from .sensors import RaySensorConfig, raycast, render_depth, render_rgb, render_topdown

__version__ = "0.1.0"

__all__ = [
    "EnvConfig",
    "default_benchmark_config",
    "load_config",
    "parse_config",
    "Environment",
    "EnvState",
    "StepResult",
    "measurements",
    "reset",
    "step",
    "MotionParams",
    "Pose",
    "Vec2",
    "World",
    "RaySensorConfig",
    "raycast",
    "render_depth",
    "render_rgb",
    "render_topdown",
    "__version__",
]
