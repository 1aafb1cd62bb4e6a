"""Trials, milestones and per-trial summaries.

Agents learn continually; there is no separate evaluation phase. A milestone
at ``m`` frames is reported at the first episode boundary where the
cumulative frame count reaches ``m``, as the mean score of the trailing
``k`` episodes (fewer if fewer exist).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .agents import make_agent
from .envs import make_env
from .wrappers import LifeLossTermination, apply_stack


@dataclass(frozen=True)
class Episode:
    index: int
    score: float
    decisions: int
    frames: int
    cum_frames: int


@dataclass
class TrialRecord:
    agent: str
    game: str
    trial: int
    seed: int
    episodes: List[Episode] = field(default_factory=list)
    failure: Optional[str] = None
    milestone_stats: Dict[int, dict] = field(default_factory=dict)

    @property
    def total_frames(self) -> int:
        return self.episodes[-1].cum_frames if self.episodes else 0

    @property
    def scores(self) -> List[float]:
        return [e.score for e in self.episodes]

    def append(self, score, decisions, frames) -> Episode:
        cum = self.total_frames + frames
        ep = Episode(len(self.episodes), score, decisions, frames, cum)
        self.episodes.append(ep)
        return ep

    def check(self) -> None:
        """Raise if the frame ledger is inconsistent."""
        total = 0
        for i, ep in enumerate(self.episodes):
            if ep.index != i:
                raise ValueError(f"episode {i} carries index {ep.index}")
            if ep.frames <= 0:
                raise ValueError(f"episode {i} consumed no frames")
            total += ep.frames
            if ep.cum_frames != total:
                raise ValueError(f"episode {i}: cumulative frames {ep.cum_frames} != {total}")

    def to_rows(self) -> List[dict]:
        return [{"trial": self.trial, "episode": e.index, "score": e.score,
                 "frames": e.frames, "cum_frames": e.cum_frames} for e in self.episodes]

    @classmethod
    def from_rows(cls, rows, agent: str, game: str, trial: int, seed: int = 0) -> "TrialRecord":
        rec = cls(agent, game, trial, seed)
        for row in rows:
            rec.episodes.append(Episode(row["episode"], row["score"], row.get("decisions", 0),
                                        row["frames"], row["cum_frames"]))
        return rec


def boundary_index(trial: TrialRecord, milestone: int) -> Optional[int]:
    """Index of the first episode whose cumulative frames reach ``milestone``."""
    for ep in trial.episodes:
        if ep.cum_frames >= milestone:
            return ep.index
    return None


def trailing_mean(scores: Sequence[float], end: int, k: int) -> float:
    """Mean of ``scores[max(0, end - k + 1) : end + 1]``."""
    window = scores[max(0, end - k + 1):end + 1]
    return math.fsum(window) / len(window)


def milestone_score(trial: TrialRecord, milestone: int, k: int = 100) -> float:
    if k < 1:
        raise ValueError("k must be at least 1")
    end = boundary_index(trial, milestone)
    if end is None:
        raise ValueError(f"trial {trial.trial} stopped at {trial.total_frames} frames, "
                         f"before milestone {milestone}")
    return trailing_mean(trial.scores, end, k)


def window_clamped(trial: TrialRecord, milestone: int, k: int) -> bool:
    end = boundary_index(trial, milestone)
    return end is not None and end + 1 < k


@dataclass(frozen=True)
class MilestoneReport:
    milestone_frames: int
    k: int
    per_trial: tuple
    mean: float
    std: float
    n: int
    single_trial: bool
    clamped: bool


def aggregate(trials: Sequence[TrialRecord], milestone: int, k: int = 100) -> MilestoneReport:
    """Cross-trial mean and sample standard deviation of milestone scores.

    Trials are ordered by index first, so the result never depends on the
    order in which they finished.
    """
    if not trials:
        raise ValueError("aggregate needs at least one trial")
    ordered = sorted(trials, key=lambda t: t.trial)
    values = tuple(milestone_score(t, milestone, k) for t in ordered)
    n = len(values)
    mean = math.fsum(values) / n
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
    clamped = any(window_clamped(t, milestone, k) for t in ordered)
    return MilestoneReport(milestone, k, values, mean, std, n, n == 1, clamped)


def summary_metrics(trial: TrialRecord, k: int = 100) -> dict:
    """Area under the curve, best trailing window and final trailing window.

    ``best_window`` maximizes over windows holding ``k`` episodes, or over the
    whole run when it has fewer than ``k``; picking the best of many noisy
    windows biases it upward.
    """
    if not trial.episodes:
        raise ValueError("summary of an empty trial")
    scores = np.asarray(trial.scores, dtype=np.float64)
    frames = np.asarray([e.frames for e in trial.episodes], dtype=np.float64)
    auc = float(math.fsum(scores * frames) / math.fsum(frames))
    n = len(scores)
    if n < k:
        best = float(math.fsum(scores) / n)
    else:
        sums = np.convolve(scores, np.ones(k), mode="valid")
        best = float(sums.max() / k)
    final = trailing_mean(trial.scores, n - 1, k)
    return {"auc": auc, "best_window": best, "final_window": final,
            "best_window_biased": True}


def default_milestones(frame_budget: int) -> List[int]:
    return sorted({max(1, frame_budget * p // 100) for p in (5, 25, 50, 100)})


def build_env(game: str, stack: Sequence[dict], seed: int, max_episode_frames: int = 18_000,
              terminate_on_life_loss: bool = False):
    env = make_env(game, max_episode_frames)
    if terminate_on_life_loss:
        env = LifeLossTermination(env)
    return apply_stack(env, stack, seed)


def run_trial(agent_spec: dict, game: str, frame_budget: int, milestones: Sequence[int],
              seed: int, stack: Sequence[dict] = (), *, trial: int = 0, agent_label: str = None,
              max_episode_frames: int = 18_000, terminate_on_life_loss: bool = False,
              weights_dir=None) -> TrialRecord:
    """Train one agent on one game for ``frame_budget`` frames.

    Errors raised by the agent or environment are caught; the episodes
    completed so far are kept and ``failure`` describes what went wrong.
    """
    milestones = list(milestones)
    if milestones != sorted(milestones) or any(m < 1 or m > frame_budget for m in milestones):
        raise ValueError("milestones must be ascending and within [1, frame_budget]")
    label = agent_label or agent_spec["type"]
    record = TrialRecord(label, game, trial, seed)
    env_seed, agent_seed = np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)
    pending = list(milestones)

    def on_episode(agent, n_frames, log):
        record.append(log.score, log.decisions, log.frames)
        while pending and n_frames >= pending[0]:
            m = pending.pop(0)
            record.milestone_stats[m] = agent.milestone_stats()
            if weights_dir is not None:
                try:
                    agent.dump_weights(weights_dir / f"{label}__{_safe(game)}__{trial}__{m}.bin")
                except NotImplementedError:
                    pass

    try:
        env = build_env(game, stack, int(env_seed), max_episode_frames, terminate_on_life_loss)
        agent = make_agent(agent_spec, random_state=int(agent_seed))
        agent.fit(env, frame_budget, callback=on_episode)
    except Exception as exc:  # the record keeps what finished before the failure
        record.failure = f"{type(exc).__name__}: {exc}"
    return record


def _safe(game: str) -> str:
    return game.replace(":", "-")
