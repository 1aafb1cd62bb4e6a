"""Reference learners, all exposing ``fit(env, frame_budget)``."""

from .base import Agent, DivergenceError, EpisodeLog
from .brute import BruteAgent, HistoryTree
from .dqn import DQNMiniAgent, QNetwork
from .sarsa import LinearLearner, SarsaLambdaAgent

AGENT_TYPES = {
    "brute": BruteAgent,
    "sarsa_lambda": SarsaLambdaAgent,
    "dqn_mini": DQNMiniAgent,
}


def make_agent(spec: dict, random_state=None) -> Agent:
    """Instantiate ``{"type": ..., "params": {...}}`` with a seed."""
    try:
        cls = AGENT_TYPES[spec["type"]]
    except KeyError:
        raise ValueError(f"unknown agent type {spec.get('type')!r}; known: {sorted(AGENT_TYPES)}") from None
    agent = cls()
    params = dict(spec.get("params", {}))
    if "random_state" in params:
        raise ValueError("random_state is derived from the trial seed and cannot be set")
    agent.set_params(**params, random_state=random_state)
    return agent


__all__ = [
    "Agent", "DivergenceError", "EpisodeLog", "BruteAgent", "HistoryTree", "DQNMiniAgent",
    "QNetwork", "LinearLearner", "SarsaLambdaAgent", "AGENT_TYPES", "make_agent",
]
