"""Tokenizer and recursive-descent parser for action scripts.

Grammar:
    script    := statement+
    statement := "let" IDENT "=" call | call | "final_answer" "(" args? ")"
    call      := IDENT "(" args? ")"
    args      := IDENT "=" expr ("," IDENT "=" expr)*
    expr      := STRING | NUMBER | "true" | "false" | "null" | IDENT
               | "[" (expr ("," expr)*)? "]"
               | "{" (STRING ":" expr ("," STRING ":" expr)*)? "}"

Strings are double-quoted with backslash escapes, numbers are decimal with
optional sign/fraction/exponent, `#` starts a comment running to end of line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal

from .nodes import (
    FINAL_ANSWER,
    RESERVED_WORDS,
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
    Statement,
    ValueExpr,
    VarRef,
)


class NoActionBlock(Exception):
    """Model output contained no fenced action block."""


class ScriptError(Exception):
    """Base for script parse failures."""


class ScriptSyntaxError(ScriptError):
    def __init__(self, line: int, col: int, expected: str, found: str = ""):
        detail = f" (found {found})" if found else ""
        super().__init__(f"line {line}, col {col}: expected {expected}{detail}")
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found


class DuplicateBinding(ScriptError):
    def __init__(self, name: str):
        super().__init__(f"duplicate let binding: {name}")
        self.name = name


class FinalAnswerNotLast(ScriptError):
    def __init__(self) -> None:
        super().__init__(f"{FINAL_ANSWER} must be the last statement")


_FENCE_RE = re.compile(r"```([^\n`]*)\n(.*?)```", re.DOTALL)


def find_action_block(model_output: str) -> tuple[int, str]:
    """Locate the action block; returns (fence start offset, contents).

    Prefers the first block tagged ``action``, falling back to the first
    fenced block of any tag; raises :class:`NoActionBlock` if there is none.
    """
    blocks = [(m.start(), m.group(1).strip(), m.group(2)) for m in _FENCE_RE.finditer(model_output)]
    if not blocks:
        raise NoActionBlock("no fenced code block in model output")
    for start, tag, body in blocks:
        if tag == "action":
            return start, body.rstrip("\n")
    start, _, body = blocks[0]
    return start, body.rstrip("\n")


def extract_action_block(model_output: str) -> str:
    """Contents of the first fenced block tagged ``action`` (any tag as fallback)."""
    return find_action_block(model_output)[1]


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT | STRING | NUMBER | PUNCT | EOF
    value: str
    line: int
    col: int


_NUMBER_RE = re.compile(r"[+-]?\d+(\.\d+)?([eE][+-]?\d+)?")
_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789")
_PUNCT = set("()[]{},=:")

_UNESCAPES = {'"': '"', "\\": "\\", "/": "/", "n": "\n", "r": "\r", "t": "\t", "b": "\b", "f": "\f"}


def _tokenize(src: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        ch = src[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
        elif ch in " \t\r":
            i, col = i + 1, col + 1
        elif ch == "#":
            while i < n and src[i] != "\n":
                i += 1
        elif ch == '"':
            start_line, start_col = line, col
            i += 1
            col += 1
            out: list[str] = []
            while True:
                if i >= n or src[i] == "\n":
                    raise ScriptSyntaxError(start_line, start_col, "closing quote")
                c = src[i]
                if c == '"':
                    i += 1
                    col += 1
                    break
                if c == "\\":
                    if i + 1 >= n:
                        raise ScriptSyntaxError(line, col, "escape sequence")
                    esc = src[i + 1]
                    if esc == "u":
                        hexdigits = src[i + 2 : i + 6]
                        if len(hexdigits) != 4 or any(h not in "0123456789abcdefABCDEF" for h in hexdigits):
                            raise ScriptSyntaxError(line, col, "4-digit unicode escape")
                        out.append(chr(int(hexdigits, 16)))
                        i += 6
                        col += 6
                    elif esc in _UNESCAPES:
                        out.append(_UNESCAPES[esc])
                        i += 2
                        col += 2
                    else:
                        raise ScriptSyntaxError(line, col, "valid escape", found=repr(esc))
                else:
                    out.append(c)
                    i += 1
                    col += 1
            tokens.append(_Token("STRING", "".join(out), start_line, start_col))
        elif ch in _PUNCT:
            tokens.append(_Token("PUNCT", ch, line, col))
            i += 1
            col += 1
        elif ch in _IDENT_START:
            start = i
            start_col = col
            while i < n and src[i] in _IDENT_CONT:
                i += 1
                col += 1
            tokens.append(_Token("IDENT", src[start:i], line, start_col))
        elif ch.isdigit() or ch in "+-":
            m = _NUMBER_RE.match(src, i)
            if not m:
                raise ScriptSyntaxError(line, col, "number", found=repr(ch))
            tokens.append(_Token("NUMBER", m.group(0), line, col))
            col += m.end() - i
            i = m.end()
        else:
            raise ScriptSyntaxError(line, col, "statement or expression", found=repr(ch))
    tokens.append(_Token("EOF", "", line, col))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_punct(self, value: str) -> _Token:
        tok = self.next()
        if tok.kind != "PUNCT" or tok.value != value:
            raise ScriptSyntaxError(tok.line, tok.col, f"'{value}'", found=tok.value or "end of input")
        return tok

    def expect_ident(self, what: str = "identifier") -> _Token:
        tok = self.next()
        if tok.kind != "IDENT":
            raise ScriptSyntaxError(tok.line, tok.col, what, found=tok.value or "end of input")
        if tok.value in RESERVED_WORDS:
            raise ScriptSyntaxError(tok.line, tok.col, what, found=f"reserved word {tok.value!r}")
        return tok

    def parse_script(self, source_text: str) -> ActionScript:
        statements: list[Statement] = []
        seen_bindings: set[str] = set()
        while self.peek().kind != "EOF":
            if statements and isinstance(statements[-1], FinalAnswer):
                raise FinalAnswerNotLast()
            statements.append(self.parse_statement(seen_bindings))
        if not statements:
            tok = self.peek()
            raise ScriptSyntaxError(tok.line, tok.col, "at least one statement")
        return ActionScript(statements=tuple(statements), source_text=source_text)

    def parse_statement(self, seen_bindings: set[str]) -> Statement:
        tok = self.peek()
        if tok.kind != "IDENT":
            raise ScriptSyntaxError(tok.line, tok.col, "statement", found=tok.value or "end of input")
        if tok.value == "let":
            self.next()
            name = self.expect_ident("binding name")
            if name.value in seen_bindings:
                raise DuplicateBinding(name.value)
            seen_bindings.add(name.value)
            self.expect_punct("=")
            return Let(name=name.value, call=self.parse_call())
        if tok.value == FINAL_ANSWER:
            self.next()
            return FinalAnswer(args=self.parse_arg_list())
        return ExprStmt(call=self.parse_call())

    def parse_call(self) -> Call:
        name = self.expect_ident("tool name")
        return Call(tool_name=name.value, args=self.parse_arg_list())

    def parse_arg_list(self) -> tuple[tuple[str, ValueExpr], ...]:
        self.expect_punct("(")
        args: list[tuple[str, ValueExpr]] = []
        names: set[str] = set()
        if not (self.peek().kind == "PUNCT" and self.peek().value == ")"):
            while True:
                name = self.expect_ident("argument name")
                if name.value in names:
                    raise ScriptSyntaxError(name.line, name.col, "unique argument name", found=name.value)
                names.add(name.value)
                self.expect_punct("=")
                args.append((name.value, self.parse_expr()))
                tok = self.peek()
                if tok.kind == "PUNCT" and tok.value == ",":
                    self.next()
                    continue
                break
        self.expect_punct(")")
        return tuple(args)

    def parse_expr(self) -> ValueExpr:
        tok = self.next()
        if tok.kind == "STRING":
            return StringLit(tok.value)
        if tok.kind == "NUMBER":
            return NumberLit(Decimal(tok.value))
        if tok.kind == "IDENT":
            if tok.value == "true":
                return BoolLit(True)
            if tok.value == "false":
                return BoolLit(False)
            if tok.value == "null":
                return NullLit()
            if tok.value in RESERVED_WORDS:
                raise ScriptSyntaxError(tok.line, tok.col, "expression", found=f"reserved word {tok.value!r}")
            return VarRef(tok.value)
        if tok.kind == "PUNCT" and tok.value == "[":
            items: list[ValueExpr] = []
            if not (self.peek().kind == "PUNCT" and self.peek().value == "]"):
                while True:
                    items.append(self.parse_expr())
                    nxt = self.peek()
                    if nxt.kind == "PUNCT" and nxt.value == ",":
                        self.next()
                        continue
                    break
            self.expect_punct("]")
            return ListLit(tuple(items))
        if tok.kind == "PUNCT" and tok.value == "{":
            entries: list[tuple[str, ValueExpr]] = []
            if not (self.peek().kind == "PUNCT" and self.peek().value == "}"):
                while True:
                    key = self.next()
                    if key.kind != "STRING":
                        raise ScriptSyntaxError(key.line, key.col, "string key", found=key.value)
                    self.expect_punct(":")
                    entries.append((key.value, self.parse_expr()))
                    nxt = self.peek()
                    if nxt.kind == "PUNCT" and nxt.value == ",":
                        self.next()
                        continue
                    break
            self.expect_punct("}")
            return MapLit(tuple(entries))
        raise ScriptSyntaxError(tok.line, tok.col, "expression", found=tok.value or "end of input")


def parse_script(src: str) -> ActionScript:
    """Parse a script into its AST; raises :class:`ScriptError` subclasses."""
    return _Parser(src).parse_script(src)
