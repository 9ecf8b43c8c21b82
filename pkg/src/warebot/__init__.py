"""Q-learning agents for warehouse grid worlds.

Three training regimes share the environments in :mod:`warebot.env`:
a deep Q-network for maze navigation (:mod:`warebot.dqn`), tabular
Q-learning for choosing the storage cell with most free space
(:mod:`warebot.tabular`) and independent Q-tables for two agents moving
among humans (:mod:`warebot.marl`).
"""
from .env import (
    Action,
    GridMap,
    MapKind,
    MaxSpaceEnv,
    MultiAgentEnv,
    NavEnv,
    Position,
    Reason,
    StepOutcome,
    default_map,
    load_map,
    parse_world,
    serialize_world,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "GridMap",
    "MapKind",
    "MaxSpaceEnv",
    "MultiAgentEnv",
    "NavEnv",
    "Position",
    "Reason",
    "StepOutcome",
    "default_map",
    "load_map",
    "parse_world",
    "serialize_world",
]
