from __future__ import annotations

from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from physoly.dsl import (
    ActionScript,
    BoolLit,
    BudgetExceeded,
    Call,
    DuplicateBinding,
    ExecBudget,
    ExprStmt,
    Final,
    FinalAnswer,
    FinalAnswerNotLast,
    Let,
    ListLit,
    MapLit,
    NoActionBlock,
    NullLit,
    NumberLit,
    Observation,
    ScriptSyntaxError,
    StringLit,
    TRUNCATION_MARKER,
    ToolFailure,
    VarRef,
    execute,
    extract_action_block,
    parse_script,
    render_script,
)
from physoly.dsl.nodes import RESERVED_WORDS


class EchoRegistry:
    """Each tool echoes its kwargs; names in `missing` are unknown; `boom` fails."""

    def __init__(self, missing=()):
        self.calls = []
        self.missing = set(missing)

    def lookup(self, name):
        if name in self.missing:
            raise KeyError(name)
        if name == "boom":
            def boom(**kwargs):
                raise ToolFailure("boom", "exploded")
            return boom

        def echo(**kwargs):
            self.calls.append((name, kwargs))
            return f"{name}:" + ",".join(f"{k}={v!r}" for k, v in sorted(kwargs.items()))

        return echo


# --- extraction ---------------------------------------------------------


def test_extract_action_block_basic():
    out = 'thought about it\n```action\nlet r = wolfram_query(query="Cu Ka1 energy")\n```'
    assert extract_action_block(out) == 'let r = wolfram_query(query="Cu Ka1 energy")'


def test_extract_action_block_missing():
    with pytest.raises(NoActionBlock):
        extract_action_block("no fences here at all")


def test_extract_action_block_prefers_action_tag():
    out = "```python\nprint(1)\n```\nthen\n```action\nf(x=1)\n```"
    assert extract_action_block(out) == "f(x=1)"


def test_extract_action_block_falls_back_to_any_tag():
    out = "```text\nf(x=1)\n```"
    assert extract_action_block(out) == "f(x=1)"


# --- parsing ------------------------------------------------------------


def test_parse_let_call():
    script = parse_script('let r = image_analyzer(image="fig_c1", question="read the peak frequency in MHz")')
    assert script.statements == (
        Let(
            name="r",
            call=Call(
                tool_name="image_analyzer",
                args=(
                    ("image", StringLit("fig_c1")),
                    ("question", StringLit("read the peak frequency in MHz")),
                ),
            ),
        ),
    )


def test_parse_final_answer_map():
    script = parse_script('final_answer(answers={"T1.A.1": "E = 13.6 eV"})')
    (stmt,) = script.statements
    assert isinstance(stmt, FinalAnswer)
    assert stmt.args == (("answers", MapLit((("T1.A.1", StringLit("E = 13.6 eV")),)),),)


def test_parse_rejects_positional_args():
    with pytest.raises(ScriptSyntaxError):
        parse_script("let x = f(1, 2)")


def test_parse_rejects_duplicate_binding():
    with pytest.raises(DuplicateBinding):
        parse_script("let x = f(a=1)\nlet x = g(b=2)")


def test_parse_rejects_statement_after_final_answer():
    with pytest.raises(FinalAnswerNotLast):
        parse_script('final_answer(answers={"a": "b"})\nf(x=1)')


def test_parse_rejects_duplicate_arg_names():
    with pytest.raises(ScriptSyntaxError):
        parse_script("f(a=1, a=2)")


def test_parse_rejects_empty_script():
    with pytest.raises(ScriptSyntaxError):
        parse_script("   # just a comment\n")


def test_parse_error_carries_location():
    with pytest.raises(ScriptSyntaxError) as excinfo:
        parse_script("let x = f(a=@)")
    assert excinfo.value.line == 1
    assert excinfo.value.col == 13


def test_parse_literals_and_comments():
    script = parse_script(
        '# setup\nf(s="a\\nb", n=-2.5e3, t=true, g=false, z=null, l=[1, "x"], m={"k": 1})'
    )
    (stmt,) = script.statements
    args = dict(stmt.call.args)
    assert args["s"] == StringLit("a\nb")
    assert args["n"] == NumberLit(Decimal("-2.5e3"))
    assert args["t"] == BoolLit(True)
    assert args["g"] == BoolLit(False)
    assert args["z"] == NullLit()
    assert args["l"] == ListLit((NumberLit(Decimal(1)), StringLit("x")))
    assert args["m"] == MapLit((("k", NumberLit(Decimal(1))),))


# --- round-trip property --------------------------------------------------


idents = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,8}", fullmatch=True).filter(
    lambda s: s not in RESERVED_WORDS
)
decimals = st.decimals(allow_nan=False, allow_infinity=False, places=6)


def value_exprs():
    leaves = st.one_of(
        st.text(max_size=20).map(StringLit),
        decimals.map(NumberLit),
        st.booleans().map(BoolLit),
        st.just(NullLit()),
        idents.map(VarRef),
    )
    return st.recursive(
        leaves,
        lambda children: st.one_of(
            st.lists(children, max_size=3).map(lambda xs: ListLit(tuple(xs))),
            st.lists(st.tuples(st.text(max_size=8), children), max_size=3, unique_by=lambda kv: kv[0]).map(
                lambda kvs: MapLit(tuple(kvs))
            ),
        ),
        max_leaves=8,
    )


def calls():
    return st.builds(
        Call,
        tool_name=idents,
        args=st.lists(st.tuples(idents, value_exprs()), max_size=3, unique_by=lambda kv: kv[0]).map(tuple),
    )


@st.composite
def scripts(draw):
    n = draw(st.integers(min_value=1, max_value=4))
    let_names = draw(st.lists(idents, min_size=n, max_size=n, unique=True))
    statements = []
    for i in range(n - 1):
        if draw(st.booleans()):
            statements.append(Let(name=let_names[i], call=draw(calls())))
        else:
            statements.append(ExprStmt(call=draw(calls())))
    if draw(st.booleans()):
        entries = draw(
            st.lists(st.tuples(st.text(max_size=8), value_exprs()), min_size=1, max_size=3,
                     unique_by=lambda kv: kv[0])
        )
        statements.append(FinalAnswer(args=(("answers", MapLit(tuple(entries))),)))
    else:
        statements.append(ExprStmt(call=draw(calls())))
    return ActionScript(statements=tuple(statements))


@settings(max_examples=150, deadline=None)
@given(scripts())
def test_parse_render_round_trip(script):
    rendered = render_script(script)
    reparsed = parse_script(rendered)
    assert reparsed == script
    assert render_script(parse_script(render_script(reparsed))) == rendered


@settings(max_examples=100, deadline=None)
@given(scripts())
def test_budget_enforced_on_generated_scripts(script):
    registry = EchoRegistry()
    budget = ExecBudget(max_statements=2, max_observation_chars=200)
    if len(script.statements) > budget.max_statements:
        with pytest.raises(BudgetExceeded):
            execute(script, registry, budget)
    else:
        outcome = execute(script, registry, budget)
        if isinstance(outcome, Observation):
            assert len(outcome.text) <= budget.max_observation_chars + len(TRUNCATION_MARKER)


def test_grammar_has_no_escape_hatch():
    # every statement form is a registered-tool call or final_answer; nothing else parses
    for src in ("import os", "open('/etc/passwd')", "x = 1 + 2", "f(g(x=1))", "f(x=1); g(y=2)"):
        with pytest.raises(ScriptSyntaxError):
            parse_script(src)


# --- execution ------------------------------------------------------------


def test_execute_labels_let_output():
    registry = EchoRegistry()
    outcome = execute(parse_script('let r = echo(msg="hi")'), registry)
    assert isinstance(outcome, Observation)
    assert outcome.text == "[r] echo:msg='hi'"


def test_execute_seventeen_statements_exceeds_default_budget():
    src = "\n".join(f"let v{i} = echo(i={i})" for i in range(17))
    with pytest.raises(BudgetExceeded) as excinfo:
        execute(parse_script(src), EchoRegistry())
    assert "statement 17" in str(excinfo.value)


def test_execute_unknown_tool_is_captured_not_fatal():
    outcome = execute(parse_script("fly()\nlet r = echo(x=1)"), EchoRegistry(missing={"fly"}))
    assert isinstance(outcome, Observation)
    assert "UnknownTool: fly" in outcome.text
    assert "[r] echo:x=1" in outcome.text


def test_execute_tool_failure_is_captured():
    outcome = execute(parse_script("boom()\necho(x=1)"), EchoRegistry())
    assert "ToolFailure[boom]: exploded" in outcome.text
    assert "echo:x=1" in outcome.text


def test_execute_var_ref_resolves_previous_binding():
    registry = EchoRegistry()
    outcome = execute(parse_script('let a = echo(x="v")\nlet b = echo(prev=a)'), registry)
    assert registry.calls[1][1]["prev"] == "echo:x='v'"
    assert isinstance(outcome, Observation)


def test_execute_unbound_var_is_captured():
    outcome = execute(parse_script("echo(prev=missing)"), EchoRegistry())
    assert "UnboundVariable: missing" in outcome.text


def test_execute_final_answer():
    outcome = execute(parse_script('final_answer(answers={"T.A": "42 J"})'), EchoRegistry())
    assert outcome == Final(answers={"T.A": "42 J"})


def test_execute_final_answer_empty_map_is_error_not_final():
    outcome = execute(parse_script("final_answer(answers={})"), EchoRegistry())
    assert isinstance(outcome, Observation)
    assert "non-empty" in outcome.text


def test_execute_truncates_observation():
    budget = ExecBudget(max_statements=16, max_observation_chars=50)
    outcome = execute(parse_script(f'echo(x="{"y" * 200}")'), EchoRegistry(), budget)
    assert isinstance(outcome, Observation)
    assert len(outcome.text) == 50 + len(TRUNCATION_MARKER)
    assert outcome.text.endswith(TRUNCATION_MARKER)


def test_execute_deterministic():
    src = 'let a = echo(x=1)\nlet b = echo(prev=a, note="n")'
    first = execute(parse_script(src), EchoRegistry())
    second = execute(parse_script(src), EchoRegistry())
    assert first == second


def test_execute_tool_time_budget():
    ticks = iter([0.0, 10.0])  # 10 s elapsed for the single call

    def clock():
        return next(ticks)

    budget = ExecBudget(max_tool_millis=100)
    with pytest.raises(BudgetExceeded):
        execute(parse_script("echo(x=1)"), EchoRegistry(), budget, clock=clock)
