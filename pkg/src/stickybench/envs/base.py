"""Episodic environment contract shared by the toy games and the wrappers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional, Tuple

NOOP = 0


class EpisodeOverError(RuntimeError):
    """Raised when stepping an environment whose episode already ended."""


class InvalidActionError(ValueError):
    pass


class FlavorError(ValueError):
    """Unknown game or a (mode, difficulty) pair the game does not advertise."""


class StateMismatchError(ValueError):
    """A snapshot was restored into an environment of another game or flavor."""


@dataclass(frozen=True)
class GameSpec:
    name: str
    mode: int = 1
    difficulty: int = 1

    @classmethod
    def parse(cls, text: str) -> "GameSpec":
        """Parse the ``name:mode:difficulty`` addressing used in configs."""
        parts = text.strip().split(":")
        if len(parts) == 1:
            return cls(parts[0])
        if len(parts) != 3:
            raise FlavorError(f"expected 'name:mode:difficulty', got {text!r}")
        try:
            return cls(parts[0], int(parts[1]), int(parts[2]))
        except ValueError:
            raise FlavorError(f"mode and difficulty must be integers in {text!r}") from None

    def __str__(self) -> str:
        return f"{self.name}:{self.mode}:{self.difficulty}"


@dataclass(frozen=True)
class Observation:
    payload: Tuple[int, ...]
    lives: Optional[int] = None
    score_delta: int = 0


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: float
    terminal: bool
    frames_consumed: int


@dataclass(frozen=True)
class EnvironmentState:
    """Opaque snapshot. ``owner`` identifies the game flavor (and wrapper stack)."""

    owner: str
    data: Any


class Environment:
    """Base class for deterministic episodic games.

    Subclasses keep their whole dynamic state in an immutable tuple and
    implement ``_start``, ``_advance``, ``_payload`` and ``_lives``. The base
    class owns frame accounting, episode truncation and snapshots.
    """

    action_names: Tuple[str, ...] = ()
    flavors: Tuple[Tuple[int, int], ...] = ((1, 1), (1, 2), (2, 1), (2, 2))

    def __init__(self, spec: GameSpec, max_episode_frames: int = 18_000):
        if max_episode_frames < 1:
            raise ValueError("max_episode_frames must be positive")
        self.spec = spec
        self.max_episode_frames = int(max_episode_frames)
        self.total_frames = 0
        self.reset_frames = 0
        self._state = self._start()
        self.episode_frame = 0
        self.episode_score = 0
        self.terminal = False

    # game-specific hooks -------------------------------------------------
    def _start(self) -> tuple:
        raise NotImplementedError

    def _advance(self, state: tuple, action: int) -> Tuple[tuple, int, bool]:
        """Return ``(next_state, reward, game_over)`` for one frame."""
        raise NotImplementedError

    def _payload(self, state: tuple) -> Tuple[int, ...]:
        raise NotImplementedError

    def _lives(self, state: tuple) -> Optional[int]:
        return None

    @property
    def observation_high(self) -> Tuple[int, ...]:
        """Inclusive upper bound of each payload entry (lower bound is 0)."""
        raise NotImplementedError

    # public contract -----------------------------------------------------
    @property
    def action_count(self) -> int:
        return len(self.action_names)

    @property
    def observation_size(self) -> int:
        return len(self.observation_high)

    @property
    def lives(self) -> Optional[int]:
        return self._lives(self._state)

    @property
    def unwrapped(self) -> "Environment":
        return self

    def observe(self, score_delta: int = 0) -> Observation:
        return Observation(self._payload(self._state), self._lives(self._state), score_delta)

    def reset(self) -> Observation:
        self._state = self._start()
        self.episode_frame = 0
        self.episode_score = 0
        self.terminal = False
        self.reset_frames = 0
        return self.observe()

    def step(self, action: int) -> StepResult:
        if self.terminal:
            raise EpisodeOverError("episode is over; call reset()")
        action = int(action)
        if not 0 <= action < self.action_count:
            raise InvalidActionError(f"action {action} outside [0, {self.action_count})")
        self._state, reward, game_over = self._advance(self._state, action)
        self.episode_frame += 1
        self.total_frames += 1
        self.episode_score += reward
        self.terminal = game_over or self.episode_frame >= self.max_episode_frames
        return StepResult(self.observe(reward), reward, self.terminal, 1)

    def save_state(self) -> EnvironmentState:
        return EnvironmentState(
            self._owner(),
            (self._state, self.episode_frame, self.episode_score, self.terminal),
        )

    def restore_state(self, snapshot: EnvironmentState) -> None:
        if snapshot.owner != self._owner():
            raise StateMismatchError(
                f"snapshot from {snapshot.owner!r} cannot be restored into {self._owner()!r}"
            )
        self._state, self.episode_frame, self.episode_score, self.terminal = snapshot.data

    def _owner(self) -> str:
        return f"{self.spec}/{self.max_episode_frames}"

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.spec})"
