from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted


class DivergenceError(FloatingPointError):
    """Learned weights stopped being finite."""


@dataclass(frozen=True)
class EpisodeLog:
    score: float
    decisions: int
    frames: int


EpisodeCallback = Callable[["Agent", int, EpisodeLog], None]


class Agent(BaseEstimator):
    """Common surface of the learners.

    ``fit(env, frame_budget)`` trains continually: it keeps playing full
    episodes until the frames experienced reach ``frame_budget`` and finishes
    the episode in progress. Every finished episode is appended to
    ``episodes_`` as an :class:`EpisodeLog` holding the raw score.
    """

    def fit(self, env, frame_budget: int, callback: Optional[EpisodeCallback] = None):
        frame_budget = _check_budget(frame_budget)
        self._init_fit(env)
        self.episodes_: List[EpisodeLog] = []
        self.n_frames_ = 0
        while self.n_frames_ < frame_budget:
            log = self._play_episode(env)
            self.episodes_.append(log)
            self.n_frames_ += log.frames
            if callback is not None:
                callback(self, self.n_frames_, log)
        return self

    def _init_fit(self, env) -> None:
        raise NotImplementedError

    def _play_episode(self, env) -> EpisodeLog:
        raise NotImplementedError

    def milestone_stats(self) -> dict:
        """Small summary of the learned state, reported at milestones."""
        return {}

    def dump_weights(self, path) -> None:
        raise NotImplementedError(f"{type(self).__name__} has no weight vector to dump")

    def _check_fitted(self):
        check_is_fitted(self, "episodes_")


def _check_budget(frame_budget) -> int:
    if int(frame_budget) != frame_budget or frame_budget < 0:
        raise ValueError(f"frame_budget must be a non-negative integer, got {frame_budget!r}")
    return int(frame_budget)


def random_argmax(values, rng: np.random.Generator) -> int:
    """Index of a maximal entry, ties broken uniformly at random."""
    best = max(values)
    ties = [i for i, v in enumerate(values) if v == best]
    if len(ties) == 1:
        return ties[0]
    return ties[int(rng.integers(len(ties)))]
