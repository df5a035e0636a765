from __future__ import annotations

import pytest

from physoly.config import ConfigError, HarnessConfig, load_config
from physoly.transcript import config_digest


def test_defaults_load_without_file():
    config = load_config(None)
    assert config.repetitions == 5
    assert config.max_steps == 24
    assert set(config.enabled_tools) == {
        "image_analyzer", "answer_reviewer", "summarize", "wolfram_query",
    }


def test_load_config_file_overrides(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("max_steps: 8\nenabled_tools: [summarize]\n", encoding="utf-8")
    config = load_config(path)
    assert config.max_steps == 8
    assert config.enabled_tools == ("summarize",)


def test_unknown_config_key_rejected(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("max_stepz: 8\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_unknown_tool_rejected():
    with pytest.raises(ConfigError):
        HarnessConfig(enabled_tools=("time_machine",))


def test_repetitions_must_be_positive():
    with pytest.raises(ConfigError):
        HarnessConfig(repetitions=0)


def test_config_digest_stable_under_key_reordering(tmp_path):
    a = tmp_path / "a.yaml"
    b = tmp_path / "b.yaml"
    a.write_text("max_steps: 8\ntemperature: 0.5\n", encoding="utf-8")
    b.write_text("temperature: 0.5\nmax_steps: 8\n", encoding="utf-8")
    assert load_config(a).digest() == load_config(b).digest()
    # and the underlying digest is insertion-order independent
    assert config_digest({"x": 1, "y": 2}) == config_digest({"y": 2, "x": 1})


def test_digest_changes_with_values(tmp_path):
    assert HarnessConfig(max_steps=8).digest() != HarnessConfig(max_steps=9).digest()
