"""Physics-oriented tools behind a uniform registry.

Four tools are known: ``image_analyzer``, ``answer_reviewer``, ``summarize``
and ``wolfram_query``. A registry exposes exactly the enabled subset, which
is how the ablation settings (no image tool, no review tool, no tools at
all) are produced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

import requests

from . import prompts
from .dsl.executor import ToolFailure
from .gateway.messages import (
    ROLE_SYSTEM,
    ROLE_USER,
    AuthFailure,
    ChatMessage,
    ContentPart,
    GatewayError,
    ImagePart,
    ModelConfig,
    TextPart,
)
from .problems import ImageAsset

WOLFRAM_APP_ID_ENV = "WOLFRAM_APP_ID"
DEFAULT_WOLFRAM_ENDPOINT = "https://api.wolframalpha.com/v1/result"

# Canonical tool order; spec listings and system prompts follow it.
KNOWN_TOOLS = ("image_analyzer", "answer_reviewer", "summarize", "wolfram_query")


class UnknownToolName(KeyError):
    pass


class UnknownAsset(ToolFailure):
    def __init__(self, asset_id: str):
        super().__init__("image_analyzer", f"UnknownAsset: {asset_id}")
        self.asset_id = asset_id


class NoAnswer(ToolFailure):
    def __init__(self, query: str):
        super().__init__("wolfram_query", f"no result for query: {query}")


class Backend(Protocol):
    def generate(self, messages: Sequence[ChatMessage], cfg: ModelConfig) -> str: ...


@dataclass(frozen=True)
class ToolParam:
    name: str
    kind: str  # semantic type shown to the agent, e.g. "asset id", "text"
    required: bool = True


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    params: tuple[ToolParam, ...]

    def __post_init__(self) -> None:
        if not self.description:
            raise ValueError(f"tool {self.name}: description must be non-empty")


@dataclass(frozen=True)
class Tool:
    spec: ToolSpec
    fn: Callable[..., str]


class ToolRegistry:
    """Enabled tools, in canonical order."""

    def __init__(self, tools: Sequence[Tool]):
        self._tools = {t.spec.name: t for t in tools}
        if len(self._tools) != len(tools):
            raise ValueError("duplicate tool names")

    @property
    def specs(self) -> tuple[ToolSpec, ...]:
        return tuple(t.spec for t in self._tools.values())

    @property
    def enabled_names(self) -> frozenset[str]:
        return frozenset(self._tools)

    def lookup(self, name: str) -> Callable[..., str]:
        try:
            return self._tools[name].fn
        except KeyError:
            raise UnknownToolName(name) from None


class WolframClient:
    """Thin client for a plain-text computational knowledge-engine endpoint."""

    def __init__(
        self,
        app_id: str | None,
        endpoint: str = DEFAULT_WOLFRAM_ENDPOINT,
        transport: Callable[[str, dict, float], tuple[int, str]] | None = None,
        timeout: float = 30.0,
    ):
        self._app_id = app_id
        self._endpoint = endpoint
        self._transport = transport or self._requests_transport
        self._timeout = timeout

    @staticmethod
    def _requests_transport(url: str, params: dict, timeout: float) -> tuple[int, str]:
        resp = requests.get(url, params=params, timeout=timeout)
        return resp.status_code, resp.text

    def query(self, query: str) -> str:
        if not query:
            raise ValueError("query must be non-empty")
        if not self._app_id:
            raise AuthFailure(f"no knowledge-engine credential; set {WOLFRAM_APP_ID_ENV}")
        try:
            status, text = self._transport(self._endpoint, {"appid": self._app_id, "i": query}, self._timeout)
        except requests.RequestException as exc:
            raise ToolFailure("wolfram_query", str(exc)) from exc
        if status == 200:
            return text
        if status == 501:
            raise NoAnswer(query)
        if status == 403:
            raise AuthFailure(f"knowledge engine returned {status}")
        raise ToolFailure("wolfram_query", f"knowledge engine returned {status}")


class WolframReplayTransport:
    """Serves recorded (status, text) pairs in order; offline stand-in for the engine."""

    def __init__(self, entries: Sequence[tuple[int, str]]):
        self._entries = list(entries)
        self._cursor = 0

    @classmethod
    def load(cls, path) -> "WolframReplayTransport":
        import json
        from pathlib import Path

        entries = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                raw = json.loads(line)
                entries.append((int(raw["status"]), str(raw["text"])))
        return cls(entries)

    def __call__(self, url: str, params: dict, timeout: float) -> tuple[int, str]:
        if self._cursor >= len(self._entries):
            raise ToolFailure("wolfram_query", "replay exhausted: no recorded engine response left")
        entry = self._entries[self._cursor]
        self._cursor += 1
        return entry


class WolframRecordingTransport:
    """Wraps a real transport and appends every exchange to a JSONL file."""

    def __init__(self, inner, path):
        self._inner = inner
        self._path = path

    def __call__(self, url: str, params: dict, timeout: float) -> tuple[int, str]:
        import json

        status, text = self._inner(url, params, timeout)
        with open(self._path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"status": status, "text": text}, ensure_ascii=False) + "\n")
        return status, text


@dataclass
class ToolDeps:
    """Everything the tool implementations need, supplied by the caller.

    ``problem_content`` is the full original problem (text and image parts)
    handed to the reviewer, so the tools themselves stay stateless.
    """

    assets: Mapping[str, ImageAsset] = field(default_factory=dict)
    vision_backend: Backend | None = None
    vision_cfg: ModelConfig | None = None
    review_backend: Backend | None = None
    review_cfg: ModelConfig | None = None
    summary_backend: Backend | None = None
    summary_cfg: ModelConfig | None = None
    problem_content: tuple[ContentPart, ...] = ()
    wolfram: WolframClient | None = None
    summary_char_budget: int = 4000
    neutral_review_prompt: bool = False


def _require_backend(backend: Backend | None, cfg: ModelConfig | None, tool: str) -> tuple[Backend, ModelConfig]:
    if backend is None or cfg is None:
        raise ToolFailure(tool, "no model backend configured")
    return backend, cfg


def make_image_analyzer(deps: ToolDeps) -> Callable[..., str]:
    def image_analyzer(image: str, question: str) -> str:
        if not question:
            raise ToolFailure("image_analyzer", "question must be non-empty")
        asset = deps.assets.get(image)
        if asset is None:
            raise UnknownAsset(image)
        backend, cfg = _require_backend(deps.vision_backend, deps.vision_cfg, "image_analyzer")
        messages = [
            ChatMessage.text(ROLE_SYSTEM, prompts.IMAGE_SYSTEM_PROMPT),
            ChatMessage(
                role=ROLE_USER,
                parts=(
                    ImagePart(asset_id=asset.id, payload=asset.read_bytes(), media_kind=asset.media_kind),
                    TextPart(question),
                ),
            ),
        ]
        try:
            return backend.generate(messages, cfg)
        except GatewayError as exc:
            raise ToolFailure("image_analyzer", str(exc)) from exc

    return image_analyzer


def make_answer_reviewer(deps: ToolDeps) -> Callable[..., str]:
    def answer_reviewer(solution: str, note: str = "") -> str:
        if not solution:
            raise ToolFailure("answer_reviewer", "solution must be non-empty")
        backend, cfg = _require_backend(deps.review_backend, deps.review_cfg, "answer_reviewer")
        system = (
            prompts.NEUTRAL_REVIEW_SYSTEM_PROMPT
            if deps.neutral_review_prompt
            else prompts.REVIEW_SYSTEM_PROMPT
        )
        messages = [
            ChatMessage.text(ROLE_SYSTEM, system),
            ChatMessage(
                role=ROLE_USER,
                parts=(TextPart(prompts.review_instruction(solution, note)),) + deps.problem_content,
            ),
        ]
        try:
            return backend.generate(messages, cfg)
        except GatewayError as exc:
            raise ToolFailure("answer_reviewer", str(exc)) from exc

    return answer_reviewer


def make_summarize(deps: ToolDeps) -> Callable[..., str]:
    def summarize(trajectory_text: str) -> str:
        if not trajectory_text:
            return ""
        backend, cfg = _require_backend(deps.summary_backend, deps.summary_cfg, "summarize")
        messages = [
            ChatMessage.text(ROLE_SYSTEM, prompts.SUMMARIZER_SYSTEM_PROMPT),
            ChatMessage.text(
                ROLE_USER,
                prompts.summarizer_instruction(trajectory_text, deps.summary_char_budget),
            ),
        ]
        try:
            return backend.generate(messages, cfg)
        except GatewayError as exc:
            raise ToolFailure("summarize", str(exc)) from exc

    return summarize


def make_wolfram_query(deps: ToolDeps) -> Callable[..., str]:
    def wolfram_query(query: str) -> str:
        if deps.wolfram is None:
            raise ToolFailure("wolfram_query", "no knowledge-engine client configured")
        try:
            return deps.wolfram.query(query)
        except (ValueError, AuthFailure) as exc:
            raise ToolFailure("wolfram_query", str(exc)) from exc

    return wolfram_query


_SPECS = {
    "image_analyzer": ToolSpec(
        name="image_analyzer",
        description=(
            "Ask a dedicated vision model a question about one problem figure; use it for every "
            "reading or measurement taken from an image."
        ),
        params=(ToolParam("image", "asset id"), ToolParam("question", "text")),
    ),
    "answer_reviewer": ToolSpec(
        name="answer_reviewer",
        description=(
            "Send a drafted solution to a critical physics reviewer that classifies likely errors "
            "and locates the faulty expressions."
        ),
        params=(ToolParam("solution", "text"), ToolParam("note", "text", required=False)),
    ),
    "summarize": ToolSpec(
        name="summarize",
        description="Compact a long working transcript into a short progress summary.",
        params=(ToolParam("trajectory_text", "text"),),
    ),
    "wolfram_query": ToolSpec(
        name="wolfram_query",
        description=(
            "Query a computational knowledge engine for physical constants, material data, and "
            "other expert reference values."
        ),
        params=(ToolParam("query", "text"),),
    ),
}

_FACTORIES = {
    "image_analyzer": make_image_analyzer,
    "answer_reviewer": make_answer_reviewer,
    "summarize": make_summarize,
    "wolfram_query": make_wolfram_query,
}


def build_registry(enabled: Sequence[str] | frozenset[str], deps: ToolDeps) -> ToolRegistry:
    """Registry exposing exactly the enabled tools, in canonical order."""
    enabled_set = set(enabled)
    unknown = enabled_set - set(KNOWN_TOOLS)
    if unknown:
        raise UnknownToolName(sorted(unknown)[0])
    return ToolRegistry(
        [Tool(spec=_SPECS[name], fn=_FACTORIES[name](deps)) for name in KNOWN_TOOLS if name in enabled_set]
    )
