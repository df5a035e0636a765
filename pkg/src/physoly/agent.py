"""The manager agent: a Reason-Act loop over the tool registry.

Each step the model produces free-text reasoning followed by one fenced
``action`` block; the block is parsed and executed in the sandbox, and the
resulting observation is folded back into the next prompt. The loop ends
when the model emits ``final_answer``, when the step budget runs out, or on
a fatal backend error; it never aborts unhandled.

The system prompt intentionally contains no prescribed tool workflow: the
model chooses which tools to call, in which order, from its own progress.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .dsl import executor as dsl_exec
from .dsl import parser as dsl_parser
from .dsl.executor import BudgetExceeded, ExecBudget, Final, Observation
from .dsl.parser import NoActionBlock, ScriptError
from .gateway.messages import (
    ROLE_SYSTEM,
    ROLE_USER,
    ChatMessage,
    GatewayError,
    ImagePart,
    ModelConfig,
    TextPart,
)
from .problems import Problem, format_points
from .tools import ToolRegistry
from .transcript import (
    PHASE_ACTION,
    PHASE_FINAL,
    PHASE_OBSERVATION,
    PHASE_REASONING,
    PHASE_SYSTEM,
    TranscriptWriter,
    canonical_json,
)

log = logging.getLogger(__name__)

TERMINATED_FINAL = "final_answer"
TERMINATED_MAX_STEPS = "max_steps"
TERMINATED_FATAL = "fatal_error"

NUDGE_INSTRUCTION = (
    "Your previous reply contained no fenced action block. Reply with your reasoning "
    "followed by exactly one fenced block tagged `action`."
)


@dataclass(frozen=True)
class RunPolicy:
    max_steps: int = 24
    summarize_when_prompt_exceeds: int = 40000
    seed_label: str = "run"

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class Step:
    index: int
    reasoning: str
    action: str
    observation: str
    token_usage: dict[str, int] = field(default_factory=dict, compare=False)
    wallclock_ms: float = field(default=0.0, compare=False)
    error: str | None = None


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[Step, ...] = ()
    summary: str | None = None

    def append(self, step: Step) -> "Trajectory":
        return dataclasses.replace(self, steps=self.steps + (step,))


@dataclass(frozen=True)
class Solution:
    answers: dict[str, str]
    trajectory: Trajectory
    terminated_by: str


def build_system_prompt(problem: Problem, registry: ToolRegistry) -> str:
    """Role framing + action grammar + tool listing + the full problem.

    Deliberately free of any step-by-step workflow: tool choice and ordering
    are left entirely to the model.
    """
    lines: list[str] = []
    lines.append(
        "You are an expert physicist solving a multi-part olympiad theory problem. "
        "Each turn, first explain in plain language what you are trying to establish "
        "next and why, then emit exactly one fenced code block tagged `action` written "
        "in the action language below."
    )
    lines.append("")
    lines.append("## Action language")
    lines.append("```")
    lines.append("let NAME = tool_name(arg=VALUE, ...)   # bind a tool result to NAME")
    lines.append("tool_name(arg=VALUE, ...)              # call a tool")
    lines.append('final_answer(answers={"<sub-question id>": "<answer text>", ...})')
    lines.append("```")
    lines.append(
        "VALUE is a double-quoted string, a decimal number, true/false/null, a previously "
        "bound NAME, a [list], or a {\"key\": value} map. Arguments are keyword-only. "
        "A `#` starts a comment. There is no arithmetic, no loops, and no nested calls: "
        "do all derivations in your reasoning text and pass results as literals."
    )
    lines.append("")
    lines.append("## Available tools")
    specs = registry.specs
    if specs:
        for spec in specs:
            params = ", ".join(
                f"{p.name}: {p.kind}" + ("" if p.required else " (optional)") for p in spec.params
            )
            lines.append(f"- {spec.name}({params}): {spec.description}")
    else:
        lines.append(
            "No tools are available this session; work from your own reasoning and finish "
            "with final_answer."
        )
    lines.append("")
    lines.append("## Finishing")
    lines.append(
        "When every sub-question is answered, emit final_answer with one answers entry per "
        "sub-question id. Give each answer as its final closed-form expression and/or numeric "
        "value with units."
    )
    lines.append("")
    lines.append(f"## Problem {problem.id}" + (f": {problem.title}" if problem.title else ""))
    if problem.constants:
        lines.append("")
        lines.append("Provided constants:")
        for c in problem.constants:
            unit = f" {c.unit}" if c.unit else ""
            lines.append(f"- {c.symbol} = {c.value}{unit}")
    for sp in problem.subparts:
        lines.append("")
        lines.append(f"### Sub-question {sp.id} ({format_points(sp.max_points)} points)")
        lines.append(sp.statement.strip())
        if sp.asset_refs:
            lines.append(f"[figures available by asset id: {', '.join(sp.asset_refs)}]")
    return "\n".join(lines)


def split_reasoning_and_action(model_output: str) -> tuple[str, str | None]:
    """(text before the action fence, block contents); action is None if absent."""
    try:
        start, action_src = dsl_parser.find_action_block(model_output)
    except NoActionBlock:
        return model_output.strip(), None
    return model_output[:start].strip(), action_src


def render_step(step: Step) -> str:
    parts = [f"### Step {step.index}", f"Reasoning: {step.reasoning}"]
    if step.action:
        parts.append("Action:\n```action\n" + step.action + "\n```")
    parts.append(f"Observation:\n{step.observation}" if step.observation else "Observation: (none)")
    return "\n".join(parts)


def render_trajectory(trajectory: Trajectory) -> str:
    blocks = []
    if trajectory.summary:
        blocks.append(f"[Progress summary]\n{trajectory.summary}")
    blocks.extend(render_step(s) for s in trajectory.steps)
    return "\n\n".join(blocks)


def maybe_summarize(
    trajectory: Trajectory,
    policy: RunPolicy,
    summarizer: Callable[[str], str] | None,
    extra_chars: int = 0,
) -> Trajectory:
    """Compact the trajectory when the rendered prompt would exceed the policy threshold.

    All steps except the most recent are replaced by a summary from the
    summarizer tool. Best-effort: on summarizer failure the trajectory is
    returned unchanged.
    """
    if summarizer is None or len(trajectory.steps) < 2:
        return trajectory
    rendered = render_trajectory(trajectory)
    if len(rendered) + extra_chars <= policy.summarize_when_prompt_exceeds:
        return trajectory
    dropped = Trajectory(steps=trajectory.steps[:-1], summary=trajectory.summary)
    try:
        summary = summarizer(render_trajectory(dropped))
    except Exception as exc:
        log.warning("summarizer failed; keeping full trajectory: %s", exc)
        return trajectory
    return Trajectory(steps=trajectory.steps[-1:], summary=summary)


def _standing_instruction(unanswered: Sequence[str], nudge: bool) -> str:
    text = (
        f"Sub-questions still needing final answers: {', '.join(unanswered)}. "
        "Reply with your reasoning, then one fenced `action` block."
    )
    if nudge:
        text = NUDGE_INSTRUCTION + "\n" + text
    return text


def run_agent(
    problem: Problem,
    registry: ToolRegistry,
    backend,
    policy: RunPolicy,
    manager_cfg: ModelConfig,
    budget: ExecBudget | None = None,
    summarizer: Callable[[str], str] | None = None,
    transcript: TranscriptWriter | None = None,
    inline_images: bool = False,
) -> Solution:
    """Run the Reason-Act loop to completion and return the Solution."""
    budget = budget or ExecBudget()
    system_text = build_system_prompt(problem, registry)
    system_msg = ChatMessage.text(ROLE_SYSTEM, system_text)
    if transcript:
        transcript.write(PHASE_SYSTEM, -1, system_text)

    image_parts: tuple = ()
    if inline_images:
        image_parts = tuple(
            ImagePart(asset_id=a.id, payload=a.read_bytes(), media_kind=a.media_kind)
            for a in problem.assets
        )

    trajectory = Trajectory()
    unanswered = list(problem.subpart_ids)
    nudge = False
    misses = 0

    for index in range(policy.max_steps):
        instruction = _standing_instruction(unanswered, nudge)
        trajectory = maybe_summarize(
            trajectory, policy, summarizer, extra_chars=len(system_text) + len(instruction)
        )
        history = render_trajectory(trajectory)
        user_text = (history + "\n\n" if history else "") + instruction
        messages = [system_msg, ChatMessage(role=ROLE_USER, parts=image_parts + (TextPart(user_text),))]

        started = time.monotonic()
        try:
            output = backend.generate(messages, manager_cfg)
        except GatewayError as exc:
            log.error("backend failed fatally at step %d: %s", index, exc)
            return Solution(answers={}, trajectory=trajectory, terminated_by=TERMINATED_FATAL)
        wallclock_ms = (time.monotonic() - started) * 1000.0
        usage = {
            "prompt_chars": len(system_text) + len(user_text),
            "response_chars": len(output),
        }

        reasoning, action_src = split_reasoning_and_action(output)
        if action_src is None:
            misses += 1
            nudge = True
            if misses >= 2:
                observation, error = "", "no action block in two consecutive replies"
            else:
                observation, error = "[no action block in reply]", None
            step = Step(
                index=index,
                reasoning=reasoning,
                action="",
                observation=observation,
                token_usage=usage,
                wallclock_ms=wallclock_ms,
                error=error,
            )
            trajectory = trajectory.append(step)
            if transcript:
                transcript.write(PHASE_REASONING, index, reasoning, usage, wallclock_ms)
                transcript.write(PHASE_OBSERVATION, index, error or observation)
            continue
        misses = 0
        nudge = False

        outcome = None
        try:
            script = dsl_parser.parse_script(action_src)
            outcome = dsl_exec.execute(script, registry, budget)
        except ScriptError as exc:
            observation = f"SyntaxError: {exc}"
        except BudgetExceeded as exc:
            observation = f"BudgetExceeded: {exc}"

        if isinstance(outcome, Final):
            step = Step(
                index=index,
                reasoning=reasoning,
                action=action_src,
                observation="",
                token_usage=usage,
                wallclock_ms=wallclock_ms,
            )
            trajectory = trajectory.append(step)
            if transcript:
                transcript.write(PHASE_REASONING, index, reasoning, usage, wallclock_ms)
                transcript.write(PHASE_ACTION, index, action_src)
                transcript.write(PHASE_FINAL, index, canonical_json(outcome.answers))
            return Solution(
                answers=dict(outcome.answers), trajectory=trajectory, terminated_by=TERMINATED_FINAL
            )
        if isinstance(outcome, Observation):
            observation = outcome.text

        step = Step(
            index=index,
            reasoning=reasoning,
            action=action_src,
            observation=observation,
            token_usage=usage,
            wallclock_ms=wallclock_ms,
        )
        trajectory = trajectory.append(step)
        if transcript:
            transcript.write(PHASE_REASONING, index, reasoning, usage, wallclock_ms)
            transcript.write(PHASE_ACTION, index, action_src)
            transcript.write(PHASE_OBSERVATION, index, observation)

    return Solution(answers={}, trajectory=trajectory, terminated_by=TERMINATED_MAX_STEPS)
