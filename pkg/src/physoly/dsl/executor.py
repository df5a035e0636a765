"""Sandboxed execution of parsed action scripts against a tool registry.

Execution is strictly sequential. Tool failures are captured into the
observation text so the calling agent can recover on its next step; only
budget overruns abort the step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Callable, Mapping, Protocol

from .nodes import (
    ActionScript,
    BoolLit,
    Call,
    ExprStmt,
    FinalAnswer,
    Let,
    ListLit,
    MapLit,
    NullLit,
    NumberLit,
    StringLit,
    ValueExpr,
    VarRef,
)

TRUNCATION_MARKER = "\n[truncated]"


class BudgetExceeded(Exception):
    pass


class ToolFailure(Exception):
    """A tool call failed; message text is surfaced to the agent."""

    def __init__(self, tool_name: str, cause: str):
        super().__init__(f"ToolFailure[{tool_name}]: {cause}")
        self.tool_name = tool_name
        self.cause = cause


class Registry(Protocol):
    def lookup(self, name: str) -> Callable[..., str]: ...


@dataclass(frozen=True)
class ExecBudget:
    max_statements: int = 16
    max_observation_chars: int = 20000
    max_tool_millis: int = 60000

    def __post_init__(self) -> None:
        if self.max_statements <= 0 or self.max_observation_chars <= 0 or self.max_tool_millis <= 0:
            raise ValueError("budgets must be strictly positive")


@dataclass(frozen=True)
class Observation:
    text: str


@dataclass(frozen=True)
class Final:
    answers: dict[str, str] = field(default_factory=dict)


StepOutcome = Observation | Final


class _EvalError(Exception):
    pass


def _to_python(expr: ValueExpr, bindings: Mapping[str, Any]) -> Any:
    if isinstance(expr, StringLit):
        return expr.value
    if isinstance(expr, NumberLit):
        d: Decimal = expr.value
        return int(d) if d == d.to_integral_value() else float(d)
    if isinstance(expr, BoolLit):
        return expr.value
    if isinstance(expr, NullLit):
        return None
    if isinstance(expr, VarRef):
        if expr.name not in bindings:
            raise _EvalError(f"UnboundVariable: {expr.name}")
        return bindings[expr.name]
    if isinstance(expr, ListLit):
        return [_to_python(i, bindings) for i in expr.items]
    if isinstance(expr, MapLit):
        return {k: _to_python(v, bindings) for k, v in expr.entries}
    raise _EvalError(f"unsupported expression: {expr!r}")


def _final_answers(stmt: FinalAnswer, bindings: Mapping[str, Any]) -> dict[str, str]:
    args = dict(stmt.args)
    if set(args) != {"answers"} or not isinstance(args["answers"], MapLit):
        raise _EvalError('final_answer requires a single map argument: final_answer(answers={...})')
    answers = {k: _to_python(v, bindings) for k, v in args["answers"].entries}
    if not answers:
        raise _EvalError("final_answer requires a non-empty answers map")
    return {k: v if isinstance(v, str) else repr(v) for k, v in answers.items()}


def _run_call(
    call: Call,
    registry: Registry,
    bindings: Mapping[str, Any],
    budget: ExecBudget,
    clock: Callable[[], float],
) -> str:
    kwargs = {name: _to_python(value, bindings) for name, value in call.args}
    try:
        fn = registry.lookup(call.tool_name)
    except KeyError:
        raise _EvalError(f"UnknownTool: {call.tool_name}") from None
    started = clock()
    try:
        result = fn(**kwargs)
    except ToolFailure as exc:
        raise _EvalError(str(exc)) from exc
    except Exception as exc:  # tools must not take the run down
        raise _EvalError(str(ToolFailure(call.tool_name, f"{type(exc).__name__}: {exc}"))) from exc
    elapsed_ms = (clock() - started) * 1000.0
    if elapsed_ms > budget.max_tool_millis:
        raise BudgetExceeded(
            f"tool {call.tool_name} took {elapsed_ms:.0f} ms (budget {budget.max_tool_millis} ms)"
        )
    return result if isinstance(result, str) else repr(result)


def execute(
    script: ActionScript,
    registry: Registry,
    budget: ExecBudget | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> StepOutcome:
    """Run every statement in order and collect labeled tool outputs.

    Returns :class:`Final` when the script ends in final_answer, otherwise an
    :class:`Observation` whose text is truncated to the budget. Bindings are
    script-local and discarded afterward. Unknown tools and tool failures
    become observation lines; :class:`BudgetExceeded` aborts the step.
    """
    budget = budget or ExecBudget()
    bindings: dict[str, Any] = {}
    lines: list[str] = []

    for index, stmt in enumerate(script.statements):
        if index >= budget.max_statements:
            raise BudgetExceeded(
                f"statement {index + 1} exceeds max_statements={budget.max_statements}"
            )
        if isinstance(stmt, FinalAnswer):
            try:
                return Final(answers=_final_answers(stmt, bindings))
            except _EvalError as exc:
                lines.append(f"[final_answer] {exc}")
                break
        call = stmt.call if isinstance(stmt, (Let, ExprStmt)) else None
        assert call is not None
        label = stmt.name if isinstance(stmt, Let) else call.tool_name
        try:
            output = _run_call(call, registry, bindings, budget, clock)
        except _EvalError as exc:
            output = str(exc)
        if isinstance(stmt, Let):
            bindings[stmt.name] = output
        lines.append(f"[{label}] {output}")

    text = "\n".join(lines)
    if len(text) > budget.max_observation_chars:
        text = text[: budget.max_observation_chars] + TRUNCATION_MARKER
    return Observation(text=text)
