"""Experiment configuration: a JSON object, validated strictly.

Unknown keys are rejected everywhere. ``stochasticity`` is either one
ordered wrapper list (innermost first) or an object mapping setting names
to such lists; each named setting becomes its own column of the grid.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

from .agents import AGENT_TYPES, make_agent
from .envs import FlavorError, GameSpec, make_env
from .protocol import default_milestones
from .wrappers import WRAPPER_TYPES, StickyConfig

OUTPUT_ENV_VAR = "STICKYBENCH_OUTPUT"
DEFAULT_OUTPUT = "stickybench-out"
DEFAULT_STOCHASTICITY = {"sticky": [{"type": "sticky", "varsigma": 0.25, "frame_skip": 5}]}

TOP_LEVEL_KEYS = {
    "agents", "games", "stochasticity", "frame_budget", "milestones", "k", "trials_per_cell",
    "base_seed", "terminate_on_life_loss", "max_episode_frames", "training_games",
    "test_games", "purpose", "run_ledger", "dump_weights", "output_dir",
}
AGENT_KEYS = {"type", "params", "name"}


class ConfigError(ValueError):
    pass


@dataclass
class AgentEntry:
    type: str
    name: str
    params: Dict[str, object] = field(default_factory=dict)

    def spec(self) -> dict:
        return {"type": self.type, "params": dict(self.params)}


@dataclass
class ExperimentConfig:
    agents: List[AgentEntry]
    games: List[str]
    frame_budget: int
    stochasticity: Dict[str, List[dict]] = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_STOCHASTICITY)))
    milestones: List[int] = field(default_factory=list)
    k: int = 100
    trials_per_cell: int = 24
    base_seed: int = 0
    terminate_on_life_loss: bool = False
    max_episode_frames: int = 18_000
    training_games: List[str] = field(default_factory=list)
    test_games: List[str] = field(default_factory=list)
    purpose: str = "final"
    run_ledger: Optional[str] = None
    dump_weights: bool = False
    output_dir: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def settings(self) -> List[str]:
        return list(self.stochasticity)


def _fail(msg):
    raise ConfigError(msg)


def _int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(f"{name} must be at least {minimum}, got {value}")
    return value


def _check_game(game):
    if not isinstance(game, str):
        _fail(f"games are 'name:mode:difficulty' strings, got {game!r}")
    try:
        spec = GameSpec.parse(game)
        make_env(spec)
    except (ValueError, FlavorError) as exc:
        _fail(f"bad game {game!r}: {exc}")
    return str(spec)


def _check_stack(stack, where):
    if not isinstance(stack, list):
        _fail(f"{where}: a stochasticity setting is a list of wrapper objects")
    for decl in stack:
        if not isinstance(decl, dict) or "type" not in decl:
            _fail(f"{where}: each wrapper needs a 'type'")
        kind = decl["type"]
        if kind not in WRAPPER_TYPES:
            _fail(f"{where}: unknown wrapper type {kind!r}; known: {sorted(WRAPPER_TYPES)}")
        extra = set(decl) - {"type"} - set(WRAPPER_TYPES[kind])
        if extra:
            _fail(f"{where}: unknown keys {sorted(extra)} for wrapper {kind!r}")
        if kind == "sticky":
            try:
                StickyConfig(decl.get("varsigma", 0.25), decl.get("frame_skip", 1))
            except ValueError as exc:
                _fail(f"{where}: {exc}")
        if kind == "action_noise" and not 0.0 <= decl.get("eps", 0.01) <= 1.0:
            _fail(f"{where}: action_noise eps must lie in [0, 1]")
    return stack


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment description, filling defaults."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        _fail("config must be a JSON object")
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        _fail(f"unknown config keys: {sorted(unknown)}")
    for key in ("agents", "games", "frame_budget"):
        if key not in raw:
            _fail(f"missing required key {key!r}")

    agents = []
    if not isinstance(raw["agents"], list) or not raw["agents"]:
        _fail("agents must be a non-empty list")
    for entry in raw["agents"]:
        if not isinstance(entry, dict):
            _fail(f"agent entries are objects, got {entry!r}")
        extra = set(entry) - AGENT_KEYS
        if extra:
            _fail(f"unknown agent keys: {sorted(extra)}")
        kind = entry.get("type")
        if kind not in AGENT_TYPES:
            _fail(f"unknown agent type {kind!r}; known: {sorted(AGENT_TYPES)}")
        params = entry.get("params", {})
        if not isinstance(params, dict):
            _fail("agent params must be an object")
        name = entry.get("name", kind)
        if not isinstance(name, str) or not name or any(c in name for c in "/\\@:"):
            _fail(f"agent name {name!r} must be non-empty and free of '/', '\\', '@' and ':'")
        try:
            make_agent({"type": kind, "params": params})
        except (ValueError, TypeError) as exc:
            _fail(f"agent {name!r}: {exc}")
        agents.append(AgentEntry(kind, name, dict(params)))
    names = [a.name for a in agents]
    if len(set(names)) != len(names):
        _fail(f"agent names must be unique, got {names}; set 'name' to tell entries apart")

    if not isinstance(raw["games"], list) or not raw["games"]:
        _fail("games must be a non-empty list")
    games = [_check_game(g) for g in raw["games"]]
    if len(set(games)) != len(games):
        _fail("games are listed more than once")

    budget = _int(raw["frame_budget"], "frame_budget", 1)
    milestones = raw.get("milestones")
    if milestones is None:
        milestones = default_milestones(budget)
    else:
        if not isinstance(milestones, list) or not milestones:
            _fail("milestones must be a non-empty list")
        milestones = [_int(m, "milestone", 1) for m in milestones]
        if any(m > budget for m in milestones):
            _fail("milestones must not exceed frame_budget")
        if sorted(set(milestones)) != milestones:
            _fail("milestones must be strictly ascending")

    stoch = raw.get("stochasticity", DEFAULT_STOCHASTICITY)
    if isinstance(stoch, list):
        stoch = {"default": stoch}
    if not isinstance(stoch, dict) or not stoch:
        _fail("stochasticity must be a wrapper list or a non-empty object of named lists")
    for name, stack in stoch.items():
        if not name or any(c in name for c in "/\\@:"):
            _fail(f"setting name {name!r} must be non-empty and free of '/', '\\', '@' and ':'")
        _check_stack(stack, f"stochasticity[{name!r}]")

    training = [_check_game(g) for g in raw.get("training_games", [])]
    test = [_check_game(g) for g in raw.get("test_games", [])]
    overlap = set(training) & set(test)
    if overlap:
        _fail(f"training_games and test_games overlap: {sorted(overlap)}")

    purpose = raw.get("purpose", "final")
    if purpose not in ("search", "final"):
        _fail("purpose must be 'search' or 'final'")
    for key in ("terminate_on_life_loss", "dump_weights"):
        if not isinstance(raw.get(key, False), bool):
            _fail(f"{key} must be true or false")
    for key in ("run_ledger", "output_dir"):
        if raw.get(key) is not None and not isinstance(raw[key], str):
            _fail(f"{key} must be a string path")

    return ExperimentConfig(
        agents=agents,
        games=games,
        frame_budget=budget,
        stochasticity=stoch,
        milestones=milestones,
        k=_int(raw.get("k", 100), "k", 1),
        trials_per_cell=_int(raw.get("trials_per_cell", 24), "trials_per_cell", 1),
        base_seed=_int(raw.get("base_seed", 0), "base_seed", 0),
        terminate_on_life_loss=raw.get("terminate_on_life_loss", False),
        max_episode_frames=_int(raw.get("max_episode_frames", 18_000), "max_episode_frames", 1),
        training_games=training,
        test_games=test,
        purpose=purpose,
        run_ledger=raw.get("run_ledger"),
        dump_weights=raw.get("dump_weights", False),
        output_dir=raw.get("output_dir"),
    )


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def resolve_output_dir(cfg: ExperimentConfig, override: Optional[str] = None) -> str:
    """``--out`` beats the config, which beats the environment variable."""
    return override or cfg.output_dir or os.environ.get(OUTPUT_ENV_VAR) or DEFAULT_OUTPUT
