"""Deterministic toy games, stochasticity wrappers, reference agents and an evaluation harness."""

from .agents import BruteAgent, DQNMiniAgent, SarsaLambdaAgent, make_agent
from .config import ExperimentConfig, parse_config
from .envs import GameSpec, make_env
from .protocol import TrialRecord, aggregate, milestone_score, run_trial, summary_metrics
from .stats import welch_t_test
from .wrappers import StickyActions, apply_stack

__version__ = "0.1.0"

__all__ = [
    "BruteAgent", "DQNMiniAgent", "SarsaLambdaAgent", "make_agent", "ExperimentConfig",
    "parse_config", "GameSpec", "make_env", "TrialRecord", "aggregate", "milestone_score",
    "run_trial", "summary_metrics", "welch_t_test", "StickyActions", "apply_stack",
]
