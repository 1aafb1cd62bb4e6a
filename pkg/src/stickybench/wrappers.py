"""Environment transformers: sticky actions, other stochasticity models,
frame skipping and reward normalization.

Every wrapper keeps the Environment contract (reset/step/save_state/
restore_state, frame accounting). Stochastic wrappers own a seedable
``numpy.random.Generator``; their generator state is part of the snapshot so
that save/restore replays bit-exactly.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .envs.base import (
    NOOP,
    Environment,
    EnvironmentState,
    EpisodeOverError,
    Observation,
    StateMismatchError,
    StepResult,
)

__all__ = [
    "StickyConfig", "RewardTransform", "Wrapper", "StickyActions", "FrameSkip",
    "InitialNoops", "ActionNoise", "RandomFrameSkip", "RewardWrapper",
    "LifeLossTermination", "HumanStarts", "FrameStack", "sticky_resolve",
    "wrap_sticky", "wrap_initial_noops", "wrap_action_noise", "wrap_random_skip",
    "wrap_reward", "build_start_library", "apply_stack", "WRAPPER_TYPES",
]


def sticky_resolve(intent: int, prev_executed: int, u: float, varsigma: float) -> int:
    """Action the emulator actually runs this frame: the previous one if ``u < varsigma``."""
    return prev_executed if u < varsigma else intent


@dataclass(frozen=True)
class StickyConfig:
    varsigma: float = 0.25
    frame_skip: int = 1

    def __post_init__(self):
        if not 0.0 <= self.varsigma <= 1.0:
            raise ValueError(f"varsigma must lie in [0, 1], got {self.varsigma}")
        if int(self.frame_skip) != self.frame_skip or self.frame_skip < 1:
            raise ValueError(f"frame_skip must be a positive integer, got {self.frame_skip}")


@dataclass
class RewardTransform:
    kind: str = "identity"
    learned_scale: Optional[float] = None

    KINDS = ("identity", "sign_clip", "first_nonzero_scale")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown reward transform {self.kind!r}; expected one of {self.KINDS}")

    def __call__(self, reward):
        if self.kind == "sign_clip":
            return (reward > 0) - (reward < 0)
        if self.kind == "first_nonzero_scale":
            if self.learned_scale is None:
                if reward == 0:
                    return 0.0
                self.learned_scale = abs(reward)
            return reward / self.learned_scale
        return reward


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


class Wrapper:
    """Delegating base; subclasses override what they change."""

    def __init__(self, env):
        self.env = env

    def __getattr__(self, name):
        # only reached for attributes not defined on the wrapper
        return getattr(self.env, name)

    @property
    def unwrapped(self) -> Environment:
        return self.env.unwrapped

    def reset(self) -> Observation:
        return self.env.reset()

    def step(self, action: int) -> StepResult:
        return self.env.step(action)

    # snapshots nest: (inner snapshot, wrapper-local state)
    def _local_state(self):
        return None

    def _set_local_state(self, data) -> None:
        pass

    def _owner_tag(self) -> str:
        return type(self).__name__

    def save_state(self) -> EnvironmentState:
        inner = self.env.save_state()
        return EnvironmentState(f"{inner.owner}|{self._owner_tag()}", (inner, self._local_state()))

    def restore_state(self, snapshot: EnvironmentState) -> None:
        inner, local = snapshot.data
        if snapshot.owner != f"{inner.owner}|{self._owner_tag()}":
            raise StateMismatchError(f"snapshot {snapshot.owner!r} does not match this wrapper stack")
        self.env.restore_state(inner)
        self._set_local_state(local)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.env!r})"


class _RandomWrapper(Wrapper):
    def __init__(self, env, rng=None):
        super().__init__(env)
        self.rng = _rng(rng)

    def _local_state(self):
        return self.rng.bit_generator.state

    def _set_local_state(self, data):
        self.rng.bit_generator.state = data


class StickyActions(_RandomWrapper):
    """Sticky actions with frame skipping.

    Each decision runs ``frame_skip`` inner frames. On every frame the
    previously executed action repeats with probability ``varsigma``; once
    the intent has executed it is also the previous action, so the rest of
    the window runs the intent. Rewards are summed over the window.
    """

    def __init__(self, env, varsigma: float = 0.25, frame_skip: int = 1, rng=None,
                 initial_action: int = NOOP):
        super().__init__(env, rng)
        self.config = StickyConfig(float(varsigma), int(frame_skip))
        self.initial_action = initial_action
        self.prev_executed = initial_action
        self.last_trace: List[Tuple[int, int]] = []

    @property
    def varsigma(self) -> float:
        return self.config.varsigma

    @property
    def frame_skip(self) -> int:
        return self.config.frame_skip

    def reset(self):
        self.prev_executed = self.initial_action
        self.last_trace = []
        return self.env.reset()

    def step(self, action):
        varsigma = self.config.varsigma
        trace = []
        total = 0
        frames = 0
        prev = self.prev_executed
        random = self.rng.random
        for _ in range(self.config.frame_skip):
            executed = prev if random() < varsigma else action
            result = self.env.step(executed)
            trace.append((action, executed))
            prev = executed
            total += result.reward
            frames += result.frames_consumed
            if result.terminal:
                break
        self.prev_executed = prev
        self.last_trace = trace
        obs = result.observation
        return StepResult(Observation(obs.payload, obs.lives, total), total, result.terminal, frames)

    def _owner_tag(self):
        return f"Sticky({self.config.varsigma},{self.config.frame_skip})"

    def _local_state(self):
        return (self.rng.bit_generator.state, self.prev_executed)

    def _set_local_state(self, data):
        self.rng.bit_generator.state, self.prev_executed = data


class FrameSkip(Wrapper):
    """Deterministic action repeat for ``k`` frames, rewards summed."""

    def __init__(self, env, k: int = 5):
        if k < 1:
            raise ValueError("frame skip must be >= 1")
        super().__init__(env)
        self.k = int(k)

    def step(self, action):
        total = 0
        frames = 0
        for _ in range(self.k):
            result = self.env.step(action)
            total += result.reward
            frames += result.frames_consumed
            if result.terminal:
                break
        obs = result.observation
        return StepResult(Observation(obs.payload, obs.lives, total), total, result.terminal, frames)

    def _owner_tag(self):
        return f"FrameSkip({self.k})"


class RandomFrameSkip(_RandomWrapper):
    """Each decision lasts ``k`` frames with ``k`` uniform on ``{k1..k2}``."""

    def __init__(self, env, k1: int = 2, k2: int = 4, rng=None):
        if not 1 <= k1 <= k2:
            raise ValueError(f"need 1 <= k1 <= k2, got k1={k1}, k2={k2}")
        super().__init__(env, rng)
        self.k1, self.k2 = int(k1), int(k2)
        self.last_k = None

    def step(self, action):
        k = int(self.rng.integers(self.k1, self.k2 + 1))
        self.last_k = k
        total = 0
        frames = 0
        for _ in range(k):
            result = self.env.step(action)
            total += result.reward
            frames += result.frames_consumed
            if result.terminal:
                break
        obs = result.observation
        return StepResult(Observation(obs.payload, obs.lives, total), total, result.terminal, frames)

    def _owner_tag(self):
        return f"RandomFrameSkip({self.k1},{self.k2})"


class InitialNoops(_RandomWrapper):
    """Start each episode with ``m ~ U{0..k_max}`` NOOPs before handing over control."""

    def __init__(self, env, k_max: int = 30, rng=None):
        if k_max < 0:
            raise ValueError("k_max must be non-negative")
        super().__init__(env, rng)
        self.k_max = int(k_max)
        self.last_noops = 0
        self.reset_frames = 0

    def reset(self):
        m = int(self.rng.integers(0, self.k_max + 1))
        self.last_noops = m
        for _attempt in range(2):
            obs = self.env.reset()
            frames = self.env.reset_frames
            ended = False
            for _ in range(m):
                result = self.env.step(NOOP)
                frames += result.frames_consumed
                obs = result.observation
                if result.terminal:
                    ended = True
                    break
            if not ended:
                self.reset_frames = frames
                return obs
        raise RuntimeError(f"episode ended during {m} initial no-ops twice; degenerate game")

    def _owner_tag(self):
        return f"InitialNoops({self.k_max})"


class ActionNoise(_RandomWrapper):
    """With probability ``eps`` replace the intent by a uniformly random legal action."""

    def __init__(self, env, eps: float = 0.01, rng=None):
        if not 0.0 <= eps <= 1.0:
            raise ValueError(f"eps must lie in [0, 1], got {eps}")
        super().__init__(env, rng)
        self.eps = float(eps)
        self.last_replaced = False
        self.last_executed = None

    def step(self, action):
        self.last_replaced = self.rng.random() < self.eps
        if self.last_replaced:
            action = int(self.rng.integers(self.env.action_count))
        self.last_executed = action
        return self.env.step(action)

    def _owner_tag(self):
        return f"ActionNoise({self.eps})"


class RewardWrapper(Wrapper):
    """Pass rewards through a RewardTransform.

    ``episode_score`` still reports the raw, untransformed score.
    """

    def __init__(self, env, transform="identity"):
        super().__init__(env)
        self.transform = transform if isinstance(transform, RewardTransform) else RewardTransform(transform)

    def step(self, action):
        result = self.env.step(action)
        return StepResult(result.observation, self.transform(result.reward),
                          result.terminal, result.frames_consumed)

    def _owner_tag(self):
        return f"Reward({self.transform.kind})"

    def _local_state(self):
        return self.transform.learned_scale

    def _set_local_state(self, data):
        self.transform.learned_scale = data


class LifeLossTermination(Wrapper):
    """End the agent's episode when a life is lost; the game itself carries on.

    ``reset`` only resets the inner game after a real game over.
    """

    def __init__(self, env):
        super().__init__(env)
        self.terminal = False
        self.episode_score = 0
        self.reset_frames = 0
        self._needs_reset = True

    def reset(self):
        self.terminal = False
        self.episode_score = 0
        if self._needs_reset or self.env.terminal:
            self._needs_reset = False
            obs = self.env.reset()
            self.reset_frames = self.env.reset_frames
            return obs
        self.reset_frames = 0
        return self.unwrapped.observe()

    def step(self, action):
        if self.terminal:
            raise EpisodeOverError("episode is over; call reset()")
        before = self.env.lives
        result = self.env.step(action)
        self.episode_score += result.observation.score_delta
        lost = before is not None and result.observation.lives is not None and result.observation.lives < before
        self.terminal = result.terminal or lost
        return StepResult(result.observation, result.reward, self.terminal, result.frames_consumed)

    def _local_state(self):
        return (self.terminal, self.episode_score, self._needs_reset)

    def _set_local_state(self, data):
        self.terminal, self.episode_score, self._needs_reset = data


class HumanStarts(_RandomWrapper):
    """Start each episode from a snapshot drawn uniformly from a fixed library.

    Wrap the raw game directly; snapshots come from ``build_start_library``.
    The episode score restarts at 0 from the restored state.
    """

    def __init__(self, env, snapshots: Sequence[EnvironmentState], rng=None):
        super().__init__(env, rng)
        if not snapshots:
            raise ValueError("start library is empty")
        self.snapshots = list(snapshots)
        self.last_start = None

    def reset(self):
        self.env.reset()
        i = int(self.rng.integers(len(self.snapshots)))
        self.last_start = i
        base = self.unwrapped
        base.restore_state(self.snapshots[i])
        base.episode_score = 0
        return base.observe()

    def _owner_tag(self):
        return f"HumanStarts({len(self.snapshots)})"


class FrameStack(Wrapper):
    """Concatenate the last ``n`` observation payloads (oldest first)."""

    def __init__(self, env, n: int = 1):
        if n < 1:
            raise ValueError("history length must be >= 1")
        super().__init__(env)
        self.n = int(n)
        self._frames: deque = deque(maxlen=self.n)

    @property
    def observation_high(self):
        return tuple(self.env.observation_high) * self.n

    @property
    def observation_size(self):
        return len(self.observation_high)

    def _stacked(self, obs):
        self._frames.append(obs.payload)
        flat = tuple(v for payload in self._frames for v in payload)
        return Observation(flat, obs.lives, obs.score_delta)

    def reset(self):
        obs = self.env.reset()
        self._frames.clear()
        for _ in range(self.n - 1):
            self._frames.append(obs.payload)
        return self._stacked(obs)

    def step(self, action):
        result = self.env.step(action)
        return StepResult(self._stacked(result.observation), result.reward,
                          result.terminal, result.frames_consumed)

    def _owner_tag(self):
        return f"FrameStack({self.n})"

    def _local_state(self):
        return tuple(self._frames)

    def _set_local_state(self, data):
        self._frames = deque(data, maxlen=self.n)


def wrap_sticky(env, cfg: StickyConfig, rng=None) -> StickyActions:
    return StickyActions(env, cfg.varsigma, cfg.frame_skip, rng=rng)


def wrap_initial_noops(env, k_max: int, rng=None) -> InitialNoops:
    return InitialNoops(env, k_max, rng=rng)


def wrap_action_noise(env, eps: float, rng=None) -> ActionNoise:
    return ActionNoise(env, eps, rng=rng)


def wrap_random_skip(env, k1: int, k2: int, rng=None) -> RandomFrameSkip:
    return RandomFrameSkip(env, k1, k2, rng=rng)


def wrap_reward(env, t) -> RewardWrapper:
    return RewardWrapper(env, t)


def build_start_library(env: Environment, k: int, rng=None, max_prefix: int = 50) -> List[EnvironmentState]:
    """Scripted play: ``k`` snapshots taken after random-length random-action prefixes."""
    rng = _rng(rng)
    library = []
    while len(library) < k:
        env.reset()
        for _ in range(int(rng.integers(0, max_prefix + 1))):
            if env.step(int(rng.integers(env.action_count))).terminal:
                break
        if not env.terminal:
            library.append(env.save_state())
    return library


WRAPPER_TYPES = {
    "sticky": ("varsigma", "frame_skip"),
    "frame_skip": ("k",),
    "initial_noops": ("k_max",),
    "action_noise": ("eps",),
    "random_skip": ("k1", "k2"),
    "reward": ("kind",),
    "human_starts": ("k", "max_prefix"),
    "frame_stack": ("n",),
}


def apply_stack(env: Environment, stack: Iterable[dict], seed: int = 0):
    """Wrap ``env`` with an ordered list of wrapper declarations (first is innermost).

    Wrapper generators are spawned from ``seed`` so a stack is reproducible
    from the trial seed alone.
    """
    stack = list(stack)
    children = np.random.SeedSequence(seed).spawn(max(len(stack), 1))
    for decl, child in zip(stack, children):
        kind = decl.get("type")
        rng = np.random.default_rng(child)
        if kind == "sticky":
            env = StickyActions(env, decl.get("varsigma", 0.25), decl.get("frame_skip", 1), rng=rng)
        elif kind == "frame_skip":
            env = FrameSkip(env, decl.get("k", 5))
        elif kind == "initial_noops":
            env = InitialNoops(env, decl.get("k_max", 30), rng=rng)
        elif kind == "action_noise":
            env = ActionNoise(env, decl.get("eps", 0.01), rng=rng)
        elif kind == "random_skip":
            env = RandomFrameSkip(env, decl.get("k1", 2), decl.get("k2", 4), rng=rng)
        elif kind == "reward":
            env = RewardWrapper(env, decl.get("kind", "identity"))
        elif kind == "human_starts":
            library = build_start_library(env.unwrapped, decl.get("k", 10), rng=rng,
                                          max_prefix=decl.get("max_prefix", 50))
            env = HumanStarts(env, library, rng=rng)
        elif kind == "frame_stack":
            env = FrameStack(env, decl.get("n", 1))
        else:
            raise ValueError(f"unknown wrapper type {kind!r}; known: {sorted(WRAPPER_TYPES)}")
    return env
