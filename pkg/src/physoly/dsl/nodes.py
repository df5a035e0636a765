"""AST for the tool-invocation scripting language, plus its canonical renderer.

The language is deliberately closed: keyword-only tool calls, optional `let`
bindings, literal values, and a terminal `final_answer`. No control flow,
no arithmetic, no nesting of calls, so a script can do nothing but invoke
registered tools.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Union

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
RESERVED_WORDS = frozenset({"let", "final_answer", "true", "false", "null"})

FINAL_ANSWER = "final_answer"


@dataclass(frozen=True)
class StringLit:
    value: str


@dataclass(frozen=True)
class NumberLit:
    value: Decimal


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class NullLit:
    pass


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class ListLit:
    items: tuple["ValueExpr", ...]


@dataclass(frozen=True)
class MapLit:
    entries: tuple[tuple[str, "ValueExpr"], ...]


ValueExpr = Union[StringLit, NumberLit, BoolLit, NullLit, VarRef, ListLit, MapLit]


@dataclass(frozen=True)
class Call:
    tool_name: str
    args: tuple[tuple[str, ValueExpr], ...]


@dataclass(frozen=True)
class Let:
    name: str
    call: Call


@dataclass(frozen=True)
class ExprStmt:
    call: Call


@dataclass(frozen=True)
class FinalAnswer:
    args: tuple[tuple[str, ValueExpr], ...]


Statement = Union[Let, ExprStmt, FinalAnswer]


@dataclass(frozen=True)
class ActionScript:
    statements: tuple[Statement, ...]
    source_text: str = field(default="", compare=False)


_ESCAPES = {'"': '\\"', "\\": "\\\\", "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def escape_string(s: str) -> str:
    out = []
    for ch in s:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return "".join(out)


def render_expr(expr: ValueExpr) -> str:
    if isinstance(expr, StringLit):
        return f'"{escape_string(expr.value)}"'
    if isinstance(expr, NumberLit):
        return str(expr.value)
    if isinstance(expr, BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, NullLit):
        return "null"
    if isinstance(expr, VarRef):
        return expr.name
    if isinstance(expr, ListLit):
        return "[" + ", ".join(render_expr(i) for i in expr.items) + "]"
    if isinstance(expr, MapLit):
        inner = ", ".join(f'"{escape_string(k)}": {render_expr(v)}' for k, v in expr.entries)
        return "{" + inner + "}"
    raise TypeError(f"not a value expression: {expr!r}")


def _render_args(args: tuple[tuple[str, ValueExpr], ...]) -> str:
    return ", ".join(f"{name}={render_expr(value)}" for name, value in args)


def render_statement(stmt: Statement) -> str:
    if isinstance(stmt, Let):
        return f"let {stmt.name} = {stmt.call.tool_name}({_render_args(stmt.call.args)})"
    if isinstance(stmt, ExprStmt):
        return f"{stmt.call.tool_name}({_render_args(stmt.call.args)})"
    if isinstance(stmt, FinalAnswer):
        return f"{FINAL_ANSWER}({_render_args(stmt.args)})"
    raise TypeError(f"not a statement: {stmt!r}")


def render_script(script: ActionScript) -> str:
    """Canonical one-statement-per-line form; parse(render(s)) == s."""
    return "\n".join(render_statement(s) for s in script.statements)
