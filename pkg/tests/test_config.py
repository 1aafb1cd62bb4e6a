import json

import pytest

from stickybench.config import (
    DEFAULT_OUTPUT,
    OUTPUT_ENV_VAR,
    ConfigError,
    parse_config,
    resolve_output_dir,
)


def cfg(**over):
    base = {"agents": [{"type": "brute"}], "games": ["chain_walk:1:1"], "frame_budget": 1000}
    base.update(over)
    return json.dumps(base)


def test_minimal_config_fills_defaults():
    c = parse_config(cfg())
    assert c.milestones == [50, 250, 500, 1000]
    assert c.k == 100 and c.trials_per_cell == 24 and c.base_seed == 0
    assert c.settings == ["sticky"]
    assert c.stochasticity["sticky"] == [{"type": "sticky", "varsigma": 0.25, "frame_skip": 5}]
    assert not c.terminate_on_life_loss and c.purpose == "final"
    assert c.agents[0].name == "brute"


def test_plain_list_becomes_one_setting():
    c = parse_config(cfg(stochasticity=[{"type": "frame_skip", "k": 5}]))
    assert c.settings == ["default"]


@pytest.mark.parametrize("bad", [
    {"stochasticity": [{"type": "sticky", "varsigma": 1.5}]},
    {"stochasticity": [{"type": "teleport"}]},
    {"stochasticity": [{"type": "sticky", "speed": 2}]},
    {"stochasticity": {"a:b": []}},
    {"colour": "red"},
    {"games": ["pong:1:1"]},
    {"games": ["chain_walk:1:1", "chain_walk:1:1"]},
    {"agents": [{"type": "brute"}, {"type": "brute"}]},
    {"agents": [{"type": "brute", "name": "x@y"}]},
    {"agents": [{"type": "qlearn"}]},
    {"agents": [{"type": "sarsa_lambda", "params": {"beta": 1}}]},
    {"frame_budget": 0},
    {"frame_budget": True},
    {"milestones": [500, 100]},
    {"milestones": [5000]},
    {"training_games": ["chain_walk:1:1"], "test_games": ["chain_walk:1:1"]},
    {"purpose": "tuning"},
    {"dump_weights": "yes"},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        parse_config(cfg(**bad))


def test_missing_key_and_bad_json():
    with pytest.raises(ConfigError, match="frame_budget"):
        parse_config(json.dumps({"agents": [{"type": "brute"}], "games": ["crossing:1:1"]}))
    with pytest.raises(ConfigError):
        parse_config("{not json")
    with pytest.raises(ConfigError):
        parse_config("[]")


def test_output_dir_precedence(monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV_VAR, raising=False)
    c = parse_config(cfg())
    assert resolve_output_dir(c) == DEFAULT_OUTPUT
    monkeypatch.setenv(OUTPUT_ENV_VAR, "/env")
    assert resolve_output_dir(c) == "/env"
    c2 = parse_config(cfg(output_dir="/cfg"))
    assert resolve_output_dir(c2) == "/cfg"
    assert resolve_output_dir(c2, "/flag") == "/flag"
