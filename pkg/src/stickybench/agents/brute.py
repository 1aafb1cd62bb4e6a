"""The Brute: memorization over a partial history tree.

Nodes are histories from the episode root, keyed by an incremental 128-bit
digest. Each node keeps maximum-likelihood tallies of successors and
rewards per action and a lower bound ``q_hat`` on the optimal action value
(``-inf`` for pairs never tried). After each episode the bound is refreshed
backward along the path just played.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from sklearn.utils import check_scalar

from .base import Agent, EpisodeLog

NEG_INF = float("-inf")
ROOT_KEY = bytes(16)


class TreeMismatchError(ValueError):
    """Transcript does not chain from the root of this tree."""


class HashCollisionError(RuntimeError):
    pass


def observation_digest(observation, reward, terminal: bool) -> bytes:
    """64-bit digest of what the agent perceives after one step (reward included)."""
    text = repr((observation.payload, observation.lives, reward, bool(terminal)))
    return hashlib.blake2b(text.encode(), digest_size=8).digest()


def combine(key: bytes, action: int, obs_digest: bytes) -> bytes:
    """Key of history ``h . a . o`` from the key of ``h``."""
    return hashlib.blake2b(key + action.to_bytes(2, "little") + obs_digest, digest_size=16).digest()


class HistoryNode:
    __slots__ = ("visits", "terminal", "counts", "successors", "q", "value", "depth")

    def __init__(self, n_actions: int, depth: int):
        self.visits = 0
        self.terminal = False
        self.depth = depth
        self.counts = [0] * n_actions
        # per action: obs digest -> [count, reward sum, child key]
        self.successors: List[Optional[Dict[bytes, list]]] = [None] * n_actions
        self.q = [NEG_INF] * n_actions
        self.value = NEG_INF


@dataclass
class EpisodeTranscript:
    steps: List[Tuple[int, bytes, float]] = field(default_factory=list)
    terminal: bool = False
    keys: List[bytes] = field(default_factory=lambda: [ROOT_KEY])

    @property
    def episode_return(self) -> float:
        return sum(r for _, _, r in self.steps)


class HistoryTree:
    """Partial history tree with per-node MLE models and lower-bound values."""

    def __init__(self, n_actions: int, gamma: float = 1.0, eps_numerator: float = 0.005,
                 eps_offset: float = 2.0, debug_histories: bool = False):
        self.n_actions = n_actions
        self.gamma = gamma
        self.eps_numerator = eps_numerator
        self.eps_offset = eps_offset
        self.nodes: Dict[bytes, HistoryNode] = {ROOT_KEY: HistoryNode(n_actions, 0)}
        self.histories: Optional[Dict[bytes, tuple]] = {ROOT_KEY: ()} if debug_histories else None

    @property
    def root(self) -> HistoryNode:
        return self.nodes[ROOT_KEY]

    def node(self, key: bytes, depth: int = 0) -> HistoryNode:
        node = self.nodes.get(key)
        if node is None:
            node = self.nodes[key] = HistoryNode(self.n_actions, depth)
        return node

    def child(self, key: bytes, action: int, obs_digest: bytes) -> bytes:
        child = combine(key, action, obs_digest)
        if self.histories is not None:
            history = self.histories[key] + ((action, obs_digest),)
            known = self.histories.setdefault(child, history)
            if known != history:
                raise HashCollisionError(f"histories {known} and {history} share a key")
        return child

    def epsilon(self, visits: int) -> float:
        denominator = math.log(visits + self.eps_offset)
        if denominator <= 0:
            return 1.0
        return min(self.eps_numerator / denominator, 1.0)

    def value(self, key: bytes, action: int) -> float:
        if not 0 <= action < self.n_actions:
            raise IndexError(f"action {action} outside [0, {self.n_actions})")
        node = self.nodes.get(key)
        return NEG_INF if node is None else node.q[action]

    def select_action(self, key: bytes, rng: np.random.Generator, depth: int = 0) -> int:
        node = self.node(key, depth)
        if rng.random() < self.epsilon(node.visits):
            return int(rng.integers(self.n_actions))
        q = node.q
        best = node.value
        ties = [a for a in range(self.n_actions) if q[a] == best]
        if len(ties) == 1:
            return ties[0]
        return ties[int(rng.integers(len(ties)))]

    def update(self, transcript: EpisodeTranscript) -> None:
        """Add one episode's tallies, then refresh ``q_hat`` backward along its path."""
        keys = [ROOT_KEY]
        for action, digest, _ in transcript.steps:
            keys.append(self.child(keys[-1], action, digest))
        if len(transcript.keys) > 1 and transcript.keys != keys:
            raise TreeMismatchError("transcript keys do not chain from the root")

        path = []
        for t, (action, digest, reward) in enumerate(transcript.steps):
            node = self.node(keys[t], t)
            node.visits += 1
            node.counts[action] += 1
            table = node.successors[action]
            if table is None:
                table = node.successors[action] = {}
            entry = table.get(digest)
            if entry is None:
                table[digest] = [1, reward, keys[t + 1]]
            else:
                entry[0] += 1
                entry[1] += reward
            path.append(node)
        last = self.node(keys[-1], len(transcript.steps))
        last.visits += 1
        if transcript.terminal:
            last.terminal = True

        gamma = self.gamma
        nodes = self.nodes
        for t in range(len(path) - 1, -1, -1):
            node = path[t]
            action = transcript.steps[t][0]
            total = 0.0
            for count, reward_sum, child_key in node.successors[action].values():
                child = nodes[child_key]
                future = 0.0 if child.terminal else child.value
                if future == NEG_INF:
                    total = NEG_INF
                    break
                total += reward_sum + count * gamma * future
            node.q[action] = total / node.counts[action] if total != NEG_INF else NEG_INF
            node.value = max(node.q)

    def stats(self) -> dict:
        return {
            "nodes": len(self.nodes),
            "max_depth": max(node.depth for node in self.nodes.values()),
            "total_visits": sum(node.visits for node in self.nodes.values()),
        }


def brute_value(tree: HistoryTree, key: bytes, action: int) -> float:
    return tree.value(key, action)


def brute_select_action(tree: HistoryTree, key: bytes, rng) -> int:
    return tree.select_action(key, rng)


def brute_update(tree: HistoryTree, episode: EpisodeTranscript) -> None:
    tree.update(episode)


def play_episode(tree: HistoryTree, env, rng) -> Tuple[EpisodeTranscript, int, int]:
    """One episode from the root; returns the transcript, frames and decisions."""
    env.reset()
    frames = env.reset_frames
    transcript = EpisodeTranscript()
    key = ROOT_KEY
    depth = 0
    while True:
        action = tree.select_action(key, rng, depth)
        result = env.step(action)
        frames += result.frames_consumed
        digest = observation_digest(result.observation, result.reward, result.terminal)
        key = tree.child(key, action, digest)
        depth += 1
        transcript.steps.append((action, digest, result.reward))
        transcript.keys.append(key)
        if result.terminal:
            transcript.terminal = True
            return transcript, frames, depth


def brute_episode_loop(tree: HistoryTree, env, frame_budget: int, rng=None) -> List[EpisodeTranscript]:
    """Play and learn until ``frame_budget`` frames, finishing the last episode."""
    rng = np.random.default_rng(rng)
    transcripts = []
    frames = 0
    while frames < frame_budget:
        transcript, used, _ = play_episode(tree, env, rng)
        tree.update(transcript)
        transcripts.append(transcript)
        frames += used
    return transcripts


class BruteAgent(Agent):
    """Estimator wrapper around :class:`HistoryTree`.

    Parameters
    ----------
    gamma : float
        Discount in the lower-bound backup.
    eps_numerator, eps_offset : float
        Exploration schedule ``min(eps_numerator / ln(n(h) + eps_offset), 1)``.
    debug_histories : bool
        Keep full histories to detect key collisions.
    random_state : int, Generator or None
    """

    def __init__(self, gamma=1.0, eps_numerator=0.005, eps_offset=2.0,
                 debug_histories=False, random_state=None):
        self.gamma = gamma
        self.eps_numerator = eps_numerator
        self.eps_offset = eps_offset
        self.debug_histories = debug_histories
        self.random_state = random_state

    def _init_fit(self, env):
        check_scalar(self.gamma, "gamma", (int, float), min_val=0.0, max_val=1.0)
        check_scalar(self.eps_numerator, "eps_numerator", (int, float), min_val=0.0)
        check_scalar(self.eps_offset, "eps_offset", (int, float), min_val=1.0)
        self.rng_ = np.random.default_rng(self.random_state)
        self.tree_ = HistoryTree(env.action_count, self.gamma, self.eps_numerator,
                                 self.eps_offset, self.debug_histories)

    def _play_episode(self, env):
        transcript, frames, decisions = play_episode(self.tree_, env, self.rng_)
        self.tree_.update(transcript)
        return EpisodeLog(env.episode_score, decisions, frames)

    def predict(self, keys):
        """Greedy action (lowest index among ties) at each history key."""
        self._check_fitted()
        out = []
        for key in keys:
            node = self.tree_.nodes.get(key)
            q = node.q if node is not None else [NEG_INF] * self.tree_.n_actions
            out.append(int(np.argmax(q)))
        return np.asarray(out, dtype=int)

    def greedy_return(self, env) -> float:
        """Replay the greedy path from the root without learning; raw episode score."""
        self._check_fitted()
        env.reset()
        key = ROOT_KEY
        while True:
            action = int(self.predict([key])[0])
            result = env.step(action)
            key = combine(key, action, observation_digest(result.observation, result.reward,
                                                          result.terminal))
            if result.terminal:
                return env.episode_score

    def milestone_stats(self):
        return self.tree_.stats()
