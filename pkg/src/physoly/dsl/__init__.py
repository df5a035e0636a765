from .executor import (
    TRUNCATION_MARKER,
    BudgetExceeded,
    ExecBudget,
    Final,
    Observation,
    StepOutcome,
    ToolFailure,
    execute,
)
from .nodes import (
    FINAL_ANSWER,
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
    render_script,
    render_statement,
)
from .parser import (
    DuplicateBinding,
    FinalAnswerNotLast,
    NoActionBlock,
    ScriptError,
    ScriptSyntaxError,
    extract_action_block,
    parse_script,
)

__all__ = [
    "ActionScript",
    "BoolLit",
    "BudgetExceeded",
    "Call",
    "DuplicateBinding",
    "ExecBudget",
    "ExprStmt",
    "FINAL_ANSWER",
    "Final",
    "FinalAnswer",
    "FinalAnswerNotLast",
    "Let",
    "ListLit",
    "MapLit",
    "NoActionBlock",
    "NullLit",
    "NumberLit",
    "Observation",
    "ScriptError",
    "ScriptSyntaxError",
    "Statement",
    "StepOutcome",
    "StringLit",
    "TRUNCATION_MARKER",
    "ToolFailure",
    "ValueExpr",
    "VarRef",
    "execute",
    "extract_action_block",
    "parse_script",
    "render_script",
    "render_statement",
]
