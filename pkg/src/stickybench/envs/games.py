"""The built-in toy games.

Each game isolates one phenomenon: open-loop memorization (chain_walk),
losing lives on a ledge (cliff_corridor), timing against periodic hazards
(crossing) and sparse rewards behind exploration (key_door). Action 0 is
always NOOP.
"""

from __future__ import annotations

from typing import Dict, Optional, Tuple, Type

from .base import Environment, FlavorError, GameSpec


class ChainWalk(Environment):
    """1-D line of cells; +1 and game over on reaching the right end.

    Mode 2 doubles the length and charges -1 whenever the walker enters the
    middle cell. Difficulty 2 swaps the meaning of LEFT and RIGHT.
    """

    action_names = ("NOOP", "LEFT", "RIGHT")

    def __init__(self, spec: GameSpec, max_episode_frames: int = 18_000,
                 length: Optional[int] = None):
        self.length = length if length is not None else (8 if spec.mode == 1 else 16)
        if self.length < 2:
            raise ValueError("chain length must be at least 2")
        self.penalty_cell = self.length // 2 if spec.mode == 2 else None
        self.swapped = spec.difficulty == 2
        super().__init__(spec, max_episode_frames)

    @property
    def observation_high(self):
        return (self.length - 1,)

    def _start(self):
        return (0,)

    def _advance(self, state, action):
        (pos,) = state
        step = (0, -1, 1)[action]
        if self.swapped:
            step = -step
        new = min(max(pos + step, 0), self.length - 1)
        reward = 0
        if new == self.penalty_cell and new != pos:
            reward -= 1
        game_over = new == self.length - 1
        if game_over:
            reward += 1
        return (new,), reward, game_over

    def _payload(self, state):
        return state

    def _owner(self):
        return f"{super()._owner()}/L{self.length}"


class CliffCorridor(Environment):
    """A ledge walked left to right toward a goal, with three lives.

    The ledge rests on pillars every ``PILLAR_SPACING`` cells; the cells in
    between are bare ledge over the abyss. DOWN on a ledge cell falls off:
    the fall penalty is charged, a life is lost and the walker respawns at
    column 0. DOWN on a pillar does nothing. Mode 2 adds a retracting bridge
    cell that is only present for part of each cycle, so the walker has to
    wait for it; stepping onto it while retracted is also a fall.
    Difficulty 2 lowers the goal reward to 5 and raises the fall penalty to 5.
    """

    action_names = ("NOOP", "RIGHT", "LEFT", "DOWN")
    PILLAR_SPACING = 5
    MODE1_WIDTH = 21
    START_LIVES = 3
    BRIDGE_PERIOD = 6
    BRIDGE_OPEN = (0, 1)

    def __init__(self, spec: GameSpec, max_episode_frames: int = 18_000):
        self.width = self.MODE1_WIDTH if spec.mode == 1 else 16
        self.bridge_cell = 8 if spec.mode == 2 else None
        self.goal_reward = 10 if spec.difficulty == 1 else 5
        self.fall_penalty = 1 if spec.difficulty == 1 else 5
        super().__init__(spec, max_episode_frames)

    @property
    def observation_high(self):
        if self.bridge_cell is None:
            return (self.width - 1,)
        return (self.width - 1, self.BRIDGE_PERIOD - 1)

    def is_ledge(self, col: int) -> bool:
        return col % self.PILLAR_SPACING != 0

    def bridge_present(self, clock: int) -> bool:
        return clock % self.BRIDGE_PERIOD in self.BRIDGE_OPEN

    # state: (col, lives, clock)
    def _start(self):
        return (0, self.START_LIVES, 0)

    def _advance(self, state, action):
        col, lives, clock = state
        clock += 1
        fell = False
        if action == 1:
            col += 1
        elif action == 2:
            col = max(col - 1, 0)
        elif action == 3 and self.is_ledge(col):
            fell = True
        if col == self.bridge_cell and not self.bridge_present(clock):
            fell = True
        if fell:
            lives -= 1
            return (0, lives, clock), -self.fall_penalty, lives == 0
        if col >= self.width - 1:
            return (self.width - 1, lives, clock), self.goal_reward, True
        return (col, lives, clock), 0, False

    def _payload(self, state):
        if self.bridge_cell is None:
            return (state[0],)
        return (state[0], state[2] % self.BRIDGE_PERIOD)

    def _lives(self, state):
        return state[1]


class Crossing(Environment):
    """Freeway-like: climb across the lanes, dodging periodic traffic.

    Lane ``i`` (1-based) is occupied at the avatar's column whenever
    ``(clock + i) % period == 0``. Being in an occupied lane sends the
    avatar back to the sidewalk with no penalty; reaching the far side
    scores +1 and restarts the climb. Episodes last ``DURATION`` frames.
    Mode selects 3 or 5 lanes, difficulty a hazard period of 4 or 2.
    """

    action_names = ("NOOP", "UP", "DOWN")
    DURATION = 200

    def __init__(self, spec: GameSpec, max_episode_frames: int = 18_000):
        self.lanes = 3 if spec.mode == 1 else 5
        self.period = 4 if spec.difficulty == 1 else 2
        super().__init__(spec, max_episode_frames)

    @property
    def observation_high(self):
        return (self.lanes, self.period - 1)

    def hazard(self, lane: int, clock: int) -> bool:
        return 1 <= lane <= self.lanes and (clock + lane) % self.period == 0

    # state: (row, clock); row 0 is the near sidewalk
    def _start(self):
        return (0, 0)

    def _advance(self, state, action):
        row, clock = state
        clock += 1
        if action == 1:
            row += 1
        elif action == 2:
            row = max(row - 1, 0)
        reward = 0
        if row > self.lanes:
            reward, row = 1, 0
        elif self.hazard(row, clock):
            row = 0
        return (row, clock), reward, clock >= self.DURATION

    def _payload(self, state):
        return (state[0], state[1] % self.period)


class KeyDoor(Environment):
    """Square room: fetch the key in one corner, then open the door in another.

    Only the door pays (+100, game over) and only once the key is held.
    Difficulty 2 lines the middle row with trap cells charging -1 on entry,
    leaving a single safe passage at the right wall.
    """

    action_names = ("NOOP", "UP", "DOWN", "LEFT", "RIGHT")
    MOVES = ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1))

    def __init__(self, spec: GameSpec, max_episode_frames: int = 18_000):
        self.size = 5 if spec.mode == 1 else 7
        self.key = (self.size - 1, 0)
        self.door = (0, self.size - 1)
        mid = self.size // 2
        self.traps = (
            frozenset((mid, c) for c in range(self.size - 1))
            if spec.difficulty == 2 else frozenset()
        )
        super().__init__(spec, max_episode_frames)

    @property
    def observation_high(self):
        return (self.size - 1, self.size - 1, 1)

    # state: (row, col, has_key)
    def _start(self):
        return (0, 0, 0)

    def _advance(self, state, action):
        row, col, has_key = state
        dr, dc = self.MOVES[action]
        nr = min(max(row + dr, 0), self.size - 1)
        nc = min(max(col + dc, 0), self.size - 1)
        reward = 0
        if (nr, nc) in self.traps and (nr, nc) != (row, col):
            reward = -1
        if (nr, nc) == self.key:
            has_key = 1
        if (nr, nc) == self.door and has_key:
            return (nr, nc, has_key), reward + 100, True
        return (nr, nc, has_key), reward, False

    def _payload(self, state):
        return state


GAMES: Dict[str, Type[Environment]] = {
    "chain_walk": ChainWalk,
    "cliff_corridor": CliffCorridor,
    "crossing": Crossing,
    "key_door": KeyDoor,
}


def available_flavors(name: str) -> Tuple[Tuple[int, int], ...]:
    try:
        return GAMES[name].flavors
    except KeyError:
        raise FlavorError(f"unknown game {name!r}; known: {sorted(GAMES)}") from None


def make_env(spec, max_episode_frames: int = 18_000) -> Environment:
    """Build a game at its start configuration from a GameSpec or 'name:mode:difficulty'."""
    if isinstance(spec, str):
        spec = GameSpec.parse(spec)
    flavors = available_flavors(spec.name)
    if (spec.mode, spec.difficulty) not in flavors:
        raise FlavorError(f"{spec.name} does not advertise flavor mode={spec.mode} "
                          f"difficulty={spec.difficulty}; advertised: {flavors}")
    return GAMES[spec.name](spec, max_episode_frames)
