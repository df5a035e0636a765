"""Record/replay backends keyed by prompt digest.

A cassette is a line-delimited JSON file, one record per model turn:
``{"index": 0, "prompt_digest": "<hex>", "response": "<text>"}``. Replaying a
cassette makes an otherwise stochastic pipeline fully deterministic.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .messages import ChatMessage, GatewayError, ModelConfig, canonical_digest

MODE_RECORD = "record"
MODE_REPLAY_STRICT = "replay-strict"
MODE_REPLAY_LENIENT = "replay-lenient"

# digest value that matches any prompt in lenient entries authored by hand
ANY_DIGEST = "*"


class CassetteMismatch(GatewayError):
    pass


class CassetteExhausted(GatewayError):
    pass


@dataclass(frozen=True)
class CassetteEntry:
    index: int
    prompt_digest: str
    response: str


@dataclass
class Cassette:
    entries: list[CassetteEntry] = field(default_factory=list)
    mode: str = MODE_REPLAY_STRICT

    @classmethod
    def load(cls, path: Path | str, mode: str = MODE_REPLAY_STRICT) -> "Cassette":
        entries = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            raw = json.loads(line)
            entries.append(
                CassetteEntry(
                    index=int(raw["index"]),
                    prompt_digest=str(raw["prompt_digest"]),
                    response=str(raw["response"]),
                )
            )
        return cls(entries=entries, mode=mode)

    @classmethod
    def from_responses(cls, responses: Sequence[str]) -> "Cassette":
        """Hand-authored cassette: digests unchecked, lenient replay."""
        entries = [
            CassetteEntry(index=i, prompt_digest=ANY_DIGEST, response=r)
            for i, r in enumerate(responses)
        ]
        return cls(entries=entries, mode=MODE_REPLAY_LENIENT)

    def save(self, path: Path | str) -> None:
        lines = [
            json.dumps(
                {"index": e.index, "prompt_digest": e.prompt_digest, "response": e.response},
                ensure_ascii=False,
            )
            for e in self.entries
        ]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


class CassetteBackend:
    """Replays recorded responses turn by turn.

    Strict mode requires the live prompt digest to match the recorded one at
    every turn; lenient mode serves responses in order regardless. Access is
    serialized, so one backend instance belongs to one run.
    """

    def __init__(self, cassette: Cassette):
        self._cassette = cassette
        self._cursor = 0
        self._lock = threading.Lock()

    def generate(self, messages: Iterable[ChatMessage], cfg: ModelConfig) -> str:
        digest = canonical_digest(messages)
        with self._lock:
            if self._cursor >= len(self._cassette.entries):
                raise CassetteExhausted(f"no recorded response for turn {self._cursor}")
            entry = self._cassette.entries[self._cursor]
            self._cursor += 1
        if (
            self._cassette.mode == MODE_REPLAY_STRICT
            and entry.prompt_digest != ANY_DIGEST
            and entry.prompt_digest != digest
        ):
            raise CassetteMismatch(
                f"turn {entry.index}: prompt digest {digest[:12]}… does not match "
                f"recorded {entry.prompt_digest[:12]}…"
            )
        return entry.response


class CassetteRecorder:
    """Appends turns to one cassette file in strict call order.

    Several RecordingBackends (manager, vision, ...) can share one recorder;
    within a run their calls are sequential, so replaying the file through a
    single CassetteBackend reproduces every backend's turns.
    """

    def __init__(self, path: Path | str):
        self._path = Path(path)
        self._index = 0
        self._lock = threading.Lock()
        self._path.write_text("", encoding="utf-8")

    def append(self, prompt_digest: str, response: str) -> None:
        with self._lock:
            record = {"index": self._index, "prompt_digest": prompt_digest, "response": response}
            self._index += 1
            with open(self._path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")


class RecordingBackend:
    """Wraps a live backend and writes every turn through a shared recorder."""

    def __init__(self, inner, recorder: CassetteRecorder):
        self._inner = inner
        self._recorder = recorder

    def generate(self, messages: Sequence[ChatMessage], cfg: ModelConfig) -> str:
        response = self._inner.generate(messages, cfg)
        self._recorder.append(canonical_digest(messages), response)
        return response
