from .base import (
    NOOP,
    Environment,
    EnvironmentState,
    EpisodeOverError,
    FlavorError,
    GameSpec,
    InvalidActionError,
    Observation,
    StateMismatchError,
    StepResult,
)
from .games import GAMES, ChainWalk, CliffCorridor, Crossing, KeyDoor, available_flavors, make_env

__all__ = [
    "NOOP", "Environment", "EnvironmentState", "EpisodeOverError", "FlavorError",
    "GameSpec", "InvalidActionError", "Observation", "StateMismatchError", "StepResult",
    "GAMES", "ChainWalk", "CliffCorridor", "Crossing", "KeyDoor", "available_flavors",
    "make_env",
]
