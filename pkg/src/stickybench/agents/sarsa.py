"""Sarsa(lambda) with sparse binary features and accumulating traces.

The step-size is divided by the largest number of active features seen so
far, and trace entries that decay below a threshold are dropped.
"""

from __future__ import annotations

import math
from typing import Dict, Sequence, Tuple

import numpy as np
from sklearn.utils import check_scalar

from ..envs.base import GameSpec
from .base import Agent, DivergenceError, EpisodeLog


class TabularFeatures:
    """One-hot over (discrete state, action); the state is the whole payload."""

    def __init__(self, high: Sequence[int], n_actions: int):
        self.n_actions = n_actions
        self.strides = []
        stride = n_actions
        for h in reversed(tuple(high)):
            self.strides.append(stride)
            stride *= h + 1
        self.strides.reverse()
        self.dim = stride

    def __call__(self, payload, action) -> Tuple[int, ...]:
        index = action
        for value, stride in zip(payload, self.strides):
            index += value * stride
        return (index,)


class CrossingTiles:
    """Two tiles per (row, phase, action): a row-by-action tile and a phase-by-action tile."""

    def __init__(self, lanes: int, period: int, n_actions: int):
        self.n_actions = n_actions
        self.offset = (lanes + 1) * n_actions
        self.dim = self.offset + period * n_actions

    def __call__(self, payload, action) -> Tuple[int, ...]:
        row, phase = payload[0], payload[1]
        return (row * self.n_actions + action, self.offset + phase * self.n_actions + action)


def make_extractor(env):
    """Feature extractor for a (possibly wrapped) environment."""
    base = env.unwrapped
    if base.spec.name == "crossing" and env.observation_size == 2:
        return CrossingTiles(base.lanes, base.period, env.action_count)
    return TabularFeatures(env.observation_high, env.action_count)


def features(game, observation, action: int) -> Tuple[int, ...]:
    """Active feature indices for ``observation`` under ``action`` in ``game``."""
    from ..envs.games import make_env

    if isinstance(game, (str, GameSpec)):
        game = make_env(game)
    return make_extractor(game)(observation.payload, action)


class LinearLearner:
    """Weights, eligibility trace and step-size bookkeeping of linear Sarsa(lambda)."""

    def __init__(self, feature_dim: int, alpha: float = 0.5, gamma: float = 0.99,
                 lam: float = 0.9, epsilon: float = 0.01, trace_threshold: float = 0.01):
        self.feature_dim = feature_dim
        self.theta = [0.0] * feature_dim
        self.trace: Dict[int, float] = {}
        self.alpha = alpha
        self.gamma = gamma
        self.lam = lam
        self.epsilon = epsilon
        self.trace_threshold = trace_threshold
        self.max_active_seen = 0
        self.n_updates = 0

    @property
    def effective_alpha(self) -> float:
        return self.alpha / self.max_active_seen if self.max_active_seen else self.alpha

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=np.float64)

    def value(self, phi) -> float:
        theta = self.theta
        return sum(theta[i] for i in phi)

    def reset_trace(self) -> None:
        self.trace = {}

    def update(self, phi, reward, phi_next, terminal: bool) -> float:
        """One Sarsa(lambda) step; returns the TD error."""
        self.max_active_seen = max(self.max_active_seen, len(phi))
        theta = self.theta
        q = sum(theta[i] for i in phi)
        q_next = 0.0 if terminal else sum(theta[i] for i in phi_next)
        delta = reward + self.gamma * q_next - q

        decay = self.gamma * self.lam
        trace = self.trace
        for i in trace:
            trace[i] *= decay
        for i in phi:
            trace[i] = trace.get(i, 0.0) + 1.0

        step = self.effective_alpha * delta
        for i, e in trace.items():
            theta[i] += step * e
        if not math.isfinite(step):
            raise DivergenceError(f"non-finite TD step after {self.n_updates} updates")
        threshold = self.trace_threshold
        self.trace = {i: e for i, e in trace.items() if abs(e) >= threshold}
        self.n_updates += 1
        return delta

    def greedy_values(self, extractor, payload, n_actions):
        theta = self.theta
        return [sum(theta[i] for i in extractor(payload, a)) for a in range(n_actions)]


def sarsa_update(learner: LinearLearner, phi, reward, phi_next, terminal) -> float:
    return learner.update(phi, reward, phi_next, terminal)


def egreedy_action(learner: LinearLearner, observation, extractor, n_actions: int, rng) -> int:
    if rng.random() < learner.epsilon:
        return int(rng.integers(n_actions))
    values = learner.greedy_values(extractor, observation.payload, n_actions)
    best = max(values)
    ties = [a for a, v in enumerate(values) if v == best]
    if len(ties) == 1:
        return ties[0]
    return ties[int(rng.integers(len(ties)))]


class SarsaLambdaAgent(Agent):
    """On-policy Sarsa(lambda) control with linear function approximation.

    Defaults: ``alpha=0.5``,
    ``gamma=0.99``, ``lambda_=0.9``, ``epsilon=0.01``, trace threshold 0.01.
    """

    def __init__(self, alpha=0.5, gamma=0.99, lambda_=0.9, epsilon=0.01,
                 trace_threshold=0.01, reset_traces=True, random_state=None):
        self.alpha = alpha
        self.gamma = gamma
        self.lambda_ = lambda_
        self.epsilon = epsilon
        self.trace_threshold = trace_threshold
        self.reset_traces = reset_traces
        self.random_state = random_state

    def _init_fit(self, env):
        check_scalar(self.alpha, "alpha", (int, float), min_val=0.0, include_boundaries="neither")
        for name in ("gamma", "lambda_", "epsilon"):
            check_scalar(getattr(self, name), name, (int, float), min_val=0.0, max_val=1.0)
        check_scalar(self.trace_threshold, "trace_threshold", (int, float), min_val=0.0)
        self.rng_ = np.random.default_rng(self.random_state)
        self.extractor_ = make_extractor(env)
        self.n_actions_ = env.action_count
        self.learner_ = LinearLearner(self.extractor_.dim, self.alpha, self.gamma,
                                      self.lambda_, self.epsilon, self.trace_threshold)

    @property
    def coef_(self) -> np.ndarray:
        return self.learner_.weights

    def _act(self, observation) -> int:
        return egreedy_action(self.learner_, observation, self.extractor_, self.n_actions_, self.rng_)

    def _play_episode(self, env):
        learner, extract = self.learner_, self.extractor_
        if self.reset_traces:
            learner.reset_trace()
        obs = env.reset()
        frames = env.reset_frames
        decisions = 0
        action = self._act(obs)
        phi = extract(obs.payload, action)
        while True:
            result = env.step(action)
            frames += result.frames_consumed
            decisions += 1
            if result.terminal:
                learner.update(phi, result.reward, None, True)
                return EpisodeLog(env.episode_score, decisions, frames)
            action = self._act(result.observation)
            phi_next = extract(result.observation.payload, action)
            learner.update(phi, result.reward, phi_next, False)
            phi = phi_next

    def predict(self, payloads):
        """Greedy action for each observation payload (lowest index among ties)."""
        self._check_fitted()
        return np.asarray([
            int(np.argmax(self.learner_.greedy_values(self.extractor_, p, self.n_actions_)))
            for p in payloads
        ], dtype=int)

    def milestone_stats(self):
        w = self.learner_.weights
        return {
            "weight_norm": float(np.linalg.norm(w)),
            "nonzero_weights": int(np.count_nonzero(w)),
            "effective_alpha": self.learner_.effective_alpha,
        }

    def dump_weights(self, path):
        self.learner_.weights.tofile(path)
