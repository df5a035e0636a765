"""Run artifacts: line-delimited transcripts, run manifests, solution files.

One transcript record per phase:
``{run_id, step_index, phase, payload, token_usage?, wallclock_ms?}`` with
phase in {system, reasoning, action, observation, final}. Wallclock fields
are excluded from determinism comparisons via :func:`strip_wallclock`.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

PHASE_SYSTEM = "system"
PHASE_REASONING = "reasoning"
PHASE_ACTION = "action"
PHASE_OBSERVATION = "observation"
PHASE_FINAL = "final"

WALLCLOCK_KEYS = ("wallclock_ms", "started_at", "finished_at")

MANIFEST_FILE = "manifest.json"
TRANSCRIPT_FILE = "transcript.jsonl"
SOLUTION_FILE = "solution.json"
SCORE_FILE = "score.json"
CASSETTE_FILE = "cassette.jsonl"


class TranscriptWriter:
    def __init__(self, path: Path | str, run_id: str):
        self._path = Path(path)
        self._run_id = run_id
        self._path.write_text("", encoding="utf-8")

    def write(
        self,
        phase: str,
        step_index: int,
        payload: str,
        token_usage: dict[str, int] | None = None,
        wallclock_ms: float | None = None,
    ) -> None:
        record: dict[str, Any] = {
            "run_id": self._run_id,
            "step_index": step_index,
            "phase": phase,
            "payload": payload,
        }
        if token_usage is not None:
            record["token_usage"] = token_usage
        if wallclock_ms is not None:
            record["wallclock_ms"] = round(wallclock_ms, 3)
        with open(self._path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_transcript(path: Path | str) -> list[dict[str, Any]]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(json.loads(line))
    return records


def strip_wallclock(records: list[dict[str, Any]]) -> list[dict[str, Any]]:
    """Drop wall-clock fields so two runs can be compared byte-for-byte."""
    return [{k: v for k, v in r.items() if k not in WALLCLOCK_KEYS} for r in records]


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_digest(data: Any) -> str:
    """Order-independent digest of a config mapping."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def write_json(path: Path | str, data: Any) -> None:
    Path(path).write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def read_json(path: Path | str) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))
