from __future__ import annotations

import json
import struct
import zlib
from http.server import BaseHTTPRequestHandler
from pathlib import Path

import pytest

from physoly import prompts
from physoly.gateway import ChatMessage, ModelConfig
from physoly.problems import Problem, Rubric, load_problem, load_rubric


def make_png(width: int = 4, height: int = 4, color: tuple[int, int, int] = (120, 40, 200)) -> bytes:
    """A tiny valid PNG, enough to satisfy magic-byte checks."""

    def chunk(tag: bytes, data: bytes) -> bytes:
        return (
            struct.pack(">I", len(data))
            + tag
            + data
            + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)
        )

    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    raw = b"".join(b"\x00" + bytes(color) * width for _ in range(height))
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", zlib.compress(raw))
        + chunk(b"IEND", b"")
    )


PNG_BYTES = make_png()


def write_problem_dir(
    root: Path,
    problem_id: str = "TOY",
    subparts: list[tuple[str, str, list[str], str]] | None = None,
) -> Path:
    """Author a problem directory; subparts are (id, statement, asset_refs, max_points)."""
    if subparts is None:
        subparts = [
            ("TOY.A.1", "Read the frequency of the third peak in the spectrum figure.", ["fig_c1"], "0.5"),
            ("TOY.B.1", "State the photon energy of the copper K-alpha-1 line in keV.", [], "1.0"),
        ]
    directory = root / problem_id.lower()
    (directory / "statements").mkdir(parents=True, exist_ok=True)
    (directory / "assets").mkdir(exist_ok=True)
    (directory / "assets" / "fig_c1.png").write_bytes(PNG_BYTES)

    lines = [f"id: {problem_id}", "title: Toy spectrum problem", "subparts:"]
    for i, (sp_id, statement, refs, points) in enumerate(subparts):
        statement_file = f"statements/s{i}.md"
        (directory / statement_file).write_text(statement + "\n", encoding="utf-8")
        lines.append(f"  - id: {sp_id}")
        lines.append(f"    statement_file: {statement_file}")
        if refs:
            lines.append(f"    asset_refs: [{', '.join(refs)}]")
        lines.append(f'    max_points: "{points}"')
    lines += [
        "assets:",
        "  - id: fig_c1",
        "    path: assets/fig_c1.png",
        "    media_kind: png",
        "    caption: emission spectrum",
        "constants:",
        '  - {symbol: c, value: "2.998e8", unit: "m/s"}',
    ]
    (directory / "problem.yaml").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return directory


TOY_RUBRIC_YAML = """\
problem_id: TOY
parts:
  - id: TOY.A
    total: "0.5"
    points:
      - {id: TOY.A.p1, description: reads the peak frequency, value: "0.3"}
      - {id: TOY.A.p2, description: states units, value: "0.2"}
  - id: TOY.B
    total: "1.0"
    points:
      - {id: TOY.B.p1, description: correct energy value, value: "0.6"}
      - {id: TOY.B.p2, description: correct significant digits, value: "0.4"}
"""


class CapturingBackend:
    """Scripted chat backend that records every generate() call."""

    def __init__(self, responses: list[str]):
        self.responses = list(responses)
        self.calls: list[tuple[tuple[ChatMessage, ...], ModelConfig]] = []

    def generate(self, messages, cfg) -> str:
        self.calls.append((tuple(messages), cfg))
        if not self.responses:
            raise AssertionError("scripted backend ran out of responses")
        if len(self.responses) == 1:
            return self.responses[0]
        return self.responses.pop(0)


def action(block: str, reasoning: str = "Thinking about the next measurement.") -> str:
    return f"{reasoning}\n```action\n{block}\n```\n"


class ScriptedChatHandler(BaseHTTPRequestHandler):
    """Offline localhost stand-in for a chat-completions endpoint.

    Routes on message content rather than call order, so concurrent runs can
    interleave requests freely. Drives the toy problem to a 3-step solve.
    """

    def log_message(self, fmt, *args):
        pass

    @staticmethod
    def _last_text(content: list[dict]) -> str:
        for part in reversed(content):
            if part.get("type") == "text":
                return part["text"]
        return ""

    def do_POST(self):
        if self.headers.get("Authorization") != "Bearer live-test-key":
            self.send_response(401)
            self.end_headers()
            return
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        system = payload["messages"][0]["content"][0]["text"]
        user_text = self._last_text(payload["messages"][-1]["content"])

        if system == prompts.IMAGE_SYSTEM_PROMPT:
            content = "225.45"
        elif system.startswith("You are an uncompromising"):
            content = "Measurement and units check out."
        elif "[rev]" in user_text:
            content = action(
                'final_answer(answers={"TOY.A.1": "225.45 MHz", "TOY.B.1": "8.0478 keV"})',
                reasoning="Everything is confirmed.",
            )
        elif "[m] 225.45" in user_text:
            content = action(
                'let rev = answer_reviewer(solution="third peak at 225.45 MHz", note="draft")',
                reasoning="Ask for a review.",
            )
        else:
            content = action(
                'let m = image_analyzer(image="fig_c1", question="read the third peak in MHz")',
                reasoning="Measure the peak.",
            )
        body = json.dumps({"choices": [{"message": {"content": content}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


@pytest.fixture
def problem_dir(tmp_path) -> Path:
    return write_problem_dir(tmp_path)


@pytest.fixture
def toy_problem(problem_dir) -> Problem:
    return load_problem(problem_dir)


@pytest.fixture
def toy_rubric(tmp_path) -> Rubric:
    path = tmp_path / "toy.rubric.yaml"
    path.write_text(TOY_RUBRIC_YAML, encoding="utf-8")
    return load_rubric(path)


@pytest.fixture
def toy_rubric_path(tmp_path) -> Path:
    path = tmp_path / "toy.rubric.yaml"
    path.write_text(TOY_RUBRIC_YAML, encoding="utf-8")
    return path
