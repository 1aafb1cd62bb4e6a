"""A small DQN on symbolic observations.

One tanh hidden layer, experience replay, a target network synchronized on
its own cadence, sign-clipped rewards for learning and linearly annealed
epsilon-greedy exploration. Gradients are written out by hand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.utils import check_scalar

from .base import Agent, DivergenceError, EpisodeLog, random_argmax


class QNetwork:
    """``q(x) = W2 tanh(W1 x + b1) + b2``."""

    def __init__(self, n_inputs: int, n_actions: int, n_hidden: int = 32, rng=None,
                 zero: bool = False):
        self.n_inputs = n_inputs
        self.n_actions = n_actions
        self.n_hidden = n_hidden
        if zero:
            self.W1 = np.zeros((n_hidden, n_inputs))
            self.b1 = np.zeros(n_hidden)
            self.W2 = np.zeros((n_actions, n_hidden))
            self.b2 = np.zeros(n_actions)
            return
        rng = np.random.default_rng(rng)
        lim1 = 1.0 / np.sqrt(n_inputs)
        lim2 = 1.0 / np.sqrt(n_hidden)
        self.W1 = rng.uniform(-lim1, lim1, (n_hidden, n_inputs))
        self.b1 = rng.uniform(-lim1, lim1, n_hidden)
        self.W2 = rng.uniform(-lim2, lim2, (n_actions, n_hidden))
        self.b2 = rng.uniform(-lim2, lim2, n_actions)

    PARAMS = ("W1", "b1", "W2", "b2")

    def params(self):
        return [getattr(self, name) for name in self.PARAMS]

    def copy(self) -> "QNetwork":
        net = QNetwork.__new__(QNetwork)
        net.n_inputs, net.n_actions, net.n_hidden = self.n_inputs, self.n_actions, self.n_hidden
        for name in self.PARAMS:
            setattr(net, name, getattr(self, name).copy())
        return net

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, vector) -> None:
        vector = np.asarray(vector, dtype=np.float64)
        offset = 0
        for name in self.PARAMS:
            p = getattr(self, name)
            setattr(self, name, vector[offset:offset + p.size].reshape(p.shape).copy())
            offset += p.size
        if offset != vector.size:
            raise ValueError(f"expected {offset} parameters, got {vector.size}")

    def forward(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        hidden = np.tanh(X @ self.W1.T + self.b1)
        return hidden @ self.W2.T + self.b2, hidden


def q_forward(net: QNetwork, obs) -> np.ndarray:
    """Action values for one observation vector, or a row per observation."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape[-1] != net.n_inputs:
        raise ValueError(f"observation has {obs.shape[-1]} entries, network expects {net.n_inputs}")
    out, _ = net.forward(obs)
    return out[0] if obs.ndim == 1 else out


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    terminals: np.ndarray

    def __len__(self):
        return len(self.actions)


def td_targets(target: QNetwork, batch: Batch, gamma: float) -> np.ndarray:
    bootstrap, _ = target.forward(batch.next_obs)
    return batch.rewards + gamma * np.where(batch.terminals, 0.0, bootstrap.max(axis=1))


def td_loss(online: QNetwork, target: QNetwork, batch: Batch, gamma: float) -> float:
    """Mean over the batch of ``0.5 * (y - q(s, a))**2``."""
    y = td_targets(target, batch, gamma)
    q, _ = online.forward(batch.obs)
    err = y - q[np.arange(len(batch)), batch.actions]
    return float(0.5 * np.mean(err ** 2))


def td_gradient(online: QNetwork, target: QNetwork, batch: Batch, gamma: float):
    """Gradient of :func:`td_loss` w.r.t. the online parameters (target held fixed)."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    y = td_targets(target, batch, gamma)
    q, hidden = online.forward(batch.obs)
    rows = np.arange(len(batch))
    # d loss / d q(s,a), averaged over the batch
    dq = np.zeros_like(q)
    dq[rows, batch.actions] = -(y - q[rows, batch.actions]) / len(batch)
    gW2 = dq.T @ hidden
    gb2 = dq.sum(axis=0)
    dpre = (dq @ online.W2) * (1.0 - hidden ** 2)
    X = np.atleast_2d(batch.obs)
    gW1 = dpre.T @ X
    gb1 = dpre.sum(axis=0)
    return [gW1, gb1, gW2, gb2]


class RMSProp:
    """Centered RMSProp with momentum on the squared gradient, as in the DQN setup."""

    def __init__(self, momentum: float = 0.95, min_sq: float = 0.01):
        self.momentum = momentum
        self.min_sq = min_sq
        self.g = None
        self.g2 = None

    def step(self, grads, alpha):
        if self.g is None:
            self.g = [np.zeros_like(g) for g in grads]
            self.g2 = [np.zeros_like(g) for g in grads]
        m = self.momentum
        out = []
        for i, grad in enumerate(grads):
            self.g[i] = m * self.g[i] + (1 - m) * grad
            self.g2[i] = m * self.g2[i] + (1 - m) * grad ** 2
            out.append(alpha * grad / np.sqrt(self.g2[i] - self.g[i] ** 2 + self.min_sq))
        return out


def dqn_update(online: QNetwork, target: QNetwork, batch: Batch, alpha: float, gamma: float,
               optimizer: Optional[RMSProp] = None) -> None:
    """One averaged semi-gradient step on the squared TD error."""
    grads = td_gradient(online, target, batch, gamma)
    steps = [alpha * g for g in grads] if optimizer is None else optimizer.step(grads, alpha)
    for p, s in zip(online.params(), steps):
        p -= s
    if not all(np.all(np.isfinite(p)) for p in online.params()):
        raise DivergenceError("online network weights became non-finite")


def sync_target(online: QNetwork, target: QNetwork) -> None:
    for name in QNetwork.PARAMS:
        setattr(target, name, getattr(online, name).copy())


class ReplayBuffer:
    """Ring buffer of transitions with uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int, rng=None):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.terminals = np.zeros(capacity, dtype=bool)
        self.size = 0
        self.cursor = 0
        self.rng = np.random.default_rng(rng)

    def __len__(self):
        return self.size

    def add(self, obs, action, reward, next_obs, terminal) -> None:
        i = self.cursor
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.terminals[i] = terminal
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, n: int) -> np.ndarray:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return self.rng.integers(self.size, size=n)

    def sample(self, n: int) -> Batch:
        idx = self.sample_indices(n)
        return Batch(self.obs[idx], self.actions[idx], self.rewards[idx],
                     self.next_obs[idx], self.terminals[idx])


@dataclass(frozen=True)
class AnnealSchedule:
    eps_start: float = 1.0
    eps_end: float = 0.01
    anneal_frames: int = 10_000

    def __post_init__(self):
        if self.anneal_frames < 1:
            raise ValueError("anneal_frames must be positive")
        for p in (self.eps_start, self.eps_end):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"epsilon {p} outside [0, 1]")

    def __call__(self, frame: int) -> float:
        if frame >= self.anneal_frames:
            return self.eps_end
        return self.eps_start + (self.eps_end - self.eps_start) * frame / self.anneal_frames


def _entropy(random_state):
    if isinstance(random_state, np.random.Generator):
        return int(random_state.integers(2 ** 63))
    return None if random_state is None else int(random_state)


def clip_reward(r: float) -> float:
    return float(np.sign(r))


class DQNMiniAgent(Agent):
    """Desk-scale DQN.

    Observation payloads are scaled into ``[0, 1]`` by the game's bounds before
    entering the network. ``update_every`` counts decisions between minibatch
    updates; ``target_sync`` counts decisions between target copies.
    ``optimizer`` is ``"sgd"`` or ``"rmsprop"``.
    """

    def __init__(self, n_hidden=32, alpha=0.01, gamma=0.99, replay_capacity=10_000,
                 batch_size=32, warmup=1_000, update_every=4, target_sync=1_000,
                 eps_start=1.0, eps_end=0.01, anneal_frames=10_000, optimizer="sgd",
                 rms_momentum=0.95, rms_min_sq=0.01, random_state=None):
        self.n_hidden = n_hidden
        self.alpha = alpha
        self.gamma = gamma
        self.replay_capacity = replay_capacity
        self.batch_size = batch_size
        self.warmup = warmup
        self.update_every = update_every
        self.target_sync = target_sync
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.anneal_frames = anneal_frames
        self.optimizer = optimizer
        self.rms_momentum = rms_momentum
        self.rms_min_sq = rms_min_sq
        self.random_state = random_state

    def _init_fit(self, env):
        for name in ("n_hidden", "replay_capacity", "batch_size", "update_every", "target_sync",
                     "anneal_frames"):
            check_scalar(getattr(self, name), name, int, min_val=1)
        check_scalar(self.warmup, "warmup", int, min_val=0)
        check_scalar(self.alpha, "alpha", (int, float), min_val=0.0, include_boundaries="neither")
        check_scalar(self.gamma, "gamma", (int, float), min_val=0.0, max_val=1.0)
        if self.optimizer not in ("sgd", "rmsprop"):
            raise ValueError(f"optimizer must be 'sgd' or 'rmsprop', got {self.optimizer!r}")
        seeds = np.random.SeedSequence(_entropy(self.random_state)).spawn(3)
        self.rng_ = np.random.default_rng(seeds[0])
        self.schedule_ = AnnealSchedule(self.eps_start, self.eps_end, self.anneal_frames)
        self.scale_ = 1.0 / np.maximum(np.asarray(env.observation_high, dtype=np.float64), 1.0)
        self.n_actions_ = env.action_count
        n_in = env.observation_size
        self.online_ = QNetwork(n_in, self.n_actions_, self.n_hidden, rng=seeds[1])
        self.target_ = self.online_.copy()
        self.replay_ = ReplayBuffer(self.replay_capacity, n_in, rng=seeds[2])
        self.opt_ = RMSProp(self.rms_momentum, self.rms_min_sq) if self.optimizer == "rmsprop" else None
        self.n_decisions_ = 0
        self.n_updates_ = 0
        self.n_syncs_ = 0
        self.first_update_decision_ = None
        self.training_frames_ = 0

    def _encode(self, observation) -> np.ndarray:
        return np.asarray(observation.payload, dtype=np.float64) * self.scale_

    def _act(self, x) -> int:
        if self.rng_.random() < self.schedule_(self.training_frames_):
            return int(self.rng_.integers(self.n_actions_))
        return random_argmax(q_forward(self.online_, x).tolist(), self.rng_)

    def _after_decision(self) -> None:
        self.n_decisions_ += 1
        d = self.n_decisions_
        if d >= self.warmup and d % self.update_every == 0 and len(self.replay_) > 0:
            dqn_update(self.online_, self.target_, self.replay_.sample(self.batch_size),
                       self.alpha, self.gamma, self.opt_)
            self.n_updates_ += 1
            if self.first_update_decision_ is None:
                self.first_update_decision_ = d
        if d % self.target_sync == 0:
            sync_target(self.online_, self.target_)
            self.n_syncs_ += 1

    def _play_episode(self, env):
        obs = env.reset()
        frames = env.reset_frames
        self.training_frames_ += env.reset_frames
        x = self._encode(obs)
        decisions = 0
        while True:
            action = self._act(x)
            result = env.step(action)
            frames += result.frames_consumed
            self.training_frames_ += result.frames_consumed
            decisions += 1
            x_next = self._encode(result.observation)
            self.replay_.add(x, action, clip_reward(result.reward), x_next, result.terminal)
            self._after_decision()
            if result.terminal:
                return EpisodeLog(env.episode_score, decisions, frames)
            x = x_next

    def predict(self, payloads):
        """Greedy action (lowest index among ties) for each observation payload."""
        self._check_fitted()
        X = np.atleast_2d(np.asarray(payloads, dtype=np.float64)) * self.scale_
        return np.argmax(q_forward(self.online_, X), axis=1)

    def milestone_stats(self):
        return {
            "updates": self.n_updates_,
            "target_syncs": self.n_syncs_,
            "replay_size": len(self.replay_),
            "epsilon": self.schedule_(self.training_frames_),
            "weight_norm": float(np.linalg.norm(self.online_.flat())),
        }

    def dump_weights(self, path):
        self.online_.flat().tofile(path)
