"""Harness configuration: model endpoints, tool enablement, budgets, paths.

Credentials are read from the environment at the moment a backend is built
(``AGENT_MODEL_API_KEY``, ``WOLFRAM_APP_ID``) and are never part of the
config object, so they cannot leak into run artifacts or digests.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import yaml

from .tools import KNOWN_TOOLS, DEFAULT_WOLFRAM_ENDPOINT
from .transcript import config_digest


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class HarnessConfig:
    manager_endpoint: str = "https://api.example.com/v1/chat/completions"
    manager_model: str = "gemini-2.5-pro"
    vision_endpoint: str = ""  # empty: same as manager_endpoint
    vision_model: str = ""  # empty: same as manager_model
    judge_endpoint: str = ""
    judge_model: str = ""
    wolfram_endpoint: str = DEFAULT_WOLFRAM_ENDPOINT

    enabled_tools: tuple[str, ...] = KNOWN_TOOLS
    max_steps: int = 24
    summarize_when_prompt_exceeds: int = 40000
    max_statements: int = 16
    max_observation_chars: int = 20000
    max_tool_millis: int = 60000
    summary_char_budget: int = 4000

    temperature: float = 0.0
    max_output_tokens: int = 8192
    request_timeout: float = 120.0
    max_retries: int = 2
    backoff_base: float = 0.5

    repetitions: int = 5
    runs_root: str = "runs"
    inline_images: bool = False
    neutral_review_prompt: bool = False
    image_max_dim: int | None = None

    def __post_init__(self) -> None:
        unknown = set(self.enabled_tools) - set(KNOWN_TOOLS)
        if unknown:
            raise ConfigError(f"unknown tools in config: {sorted(unknown)}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")

    @property
    def vision_endpoint_or_default(self) -> str:
        return self.vision_endpoint or self.manager_endpoint

    @property
    def vision_model_or_default(self) -> str:
        return self.vision_model or self.manager_model

    @property
    def judge_endpoint_or_default(self) -> str:
        return self.judge_endpoint or self.manager_endpoint

    @property
    def judge_model_or_default(self) -> str:
        return self.judge_model or self.manager_model

    def digest(self) -> str:
        return config_digest(dataclasses.asdict(self))


def load_config(path: Path | str | None = None) -> HarnessConfig:
    """Config file is YAML with keys matching HarnessConfig fields."""
    if path is None:
        return HarnessConfig()
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    known_fields = {f.name for f in dataclasses.fields(HarnessConfig)}
    unknown = set(raw) - known_fields
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "enabled_tools" in raw:
        raw["enabled_tools"] = tuple(str(t) for t in raw["enabled_tools"])
    try:
        return HarnessConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
