"""Grading, aggregation, ranking, and numeric accuracy metrics.

Scores are integer centipoints end to end so rubric sums are exact. A part's
score is the sum of the values of its addressed scoring points; repeated-run
statistics are mean and sample standard deviation in points. The N-digit
accuracy metric compares truncated significant-digit prefixes aligned to the
ground truth's exponent, in exact integer arithmetic.
"""

from __future__ import annotations

import json
import re
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import prompts
from .gateway.messages import ROLE_SYSTEM, ROLE_USER, ChatMessage, GatewayError, ModelConfig
from .problems import PartRubric, Rubric, format_points

GRADER_HUMAN = "human-file"
GRADER_JUDGE = "judge-model"

CLASS_ABOVE_GOLD_MEDIAN = "above_gold_median"
CLASS_GOLD_RANGE = "gold_range"
CLASS_BELOW_GOLD_MIN = "below_gold_min"


class ScoringError(Exception):
    pass


class UnknownPointId(ScoringError):
    def __init__(self, point_id: str):
        super().__init__(f"grade references unknown scoring point: {point_id}")
        self.point_id = point_id


class MissingThresholds(ScoringError):
    pass


class EmptyInput(ScoringError):
    pass


class SciNotationError(ScoringError):
    pass


@dataclass(frozen=True)
class GradeRecord:
    run_id: str
    problem_id: str
    addressed: frozenset[str]
    grader: str = GRADER_HUMAN
    notes: dict[str, str] = field(default_factory=dict, compare=False)

    def validate_against(self, rubric: Rubric) -> None:
        for point_id in sorted(self.addressed):
            if point_id not in rubric.point_ids:
                raise UnknownPointId(point_id)


@dataclass(frozen=True)
class ScoreReport:
    per_part: dict[str, int]  # part id -> centipoints
    total: int


@dataclass(frozen=True)
class RunStats:
    n: int
    mean: float  # points
    std: float  # sample std (n-1), 0.0 when n == 1


@dataclass(frozen=True)
class Thresholds:
    gold_min: float
    gold_median: float


@dataclass(frozen=True)
class Distribution:
    label: str
    scores: tuple[float, ...] = ()
    thresholds: Thresholds | None = None


def load_grade(path: Path | str, rubric: Rubric | None = None) -> GradeRecord:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    record = GradeRecord(
        run_id=str(raw.get("run_id", "")),
        problem_id=str(raw.get("problem_id", "")),
        addressed=frozenset(str(p) for p in raw.get("addressed", [])),
        grader=str(raw.get("grader", GRADER_HUMAN)),
        notes={str(k): str(v) for k, v in (raw.get("notes") or {}).items()},
    )
    if rubric is not None:
        record.validate_against(rubric)
    return record


def save_grade(path: Path | str, grade: GradeRecord) -> None:
    data = {
        "run_id": grade.run_id,
        "problem_id": grade.problem_id,
        "grader": grade.grader,
        "addressed": sorted(grade.addressed),
        "notes": dict(sorted(grade.notes.items())),
    }
    Path(path).write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def load_distribution(path: Path | str) -> Distribution:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    thresholds = None
    if raw.get("thresholds"):
        thresholds = Thresholds(
            gold_min=float(raw["thresholds"]["gold_min"]),
            gold_median=float(raw["thresholds"]["gold_median"]),
        )
    return Distribution(
        label=str(raw.get("label", "")),
        scores=tuple(float(s) for s in raw.get("scores", [])),
        thresholds=thresholds,
    )


def part_score(rubric_part: PartRubric, grade: GradeRecord) -> int:
    """Sum of the values of the part's addressed points, in centipoints."""
    return sum(p.value for p in rubric_part.points if p.id in grade.addressed)


def score_solution(rubric: Rubric, grade: GradeRecord) -> ScoreReport:
    grade.validate_against(rubric)
    per_part = {part.id: part_score(part, grade) for part in rubric.parts}
    return ScoreReport(per_part=per_part, total=sum(per_part.values()))


def aggregate(scores_centi: Sequence[int]) -> RunStats:
    """Mean and sample standard deviation (n-1) of repeated-run scores, in points."""
    if not scores_centi:
        raise EmptyInput("no scores to aggregate")
    points = [c / 100 for c in scores_centi]
    mean = statistics.fmean(points)
    std = statistics.stdev(points) if len(points) > 1 else 0.0
    return RunStats(n=len(points), mean=mean, std=std)


def rank(score: float, dist: Distribution) -> int:
    """Competition rank: 1 + number of strictly better scores; ties share the better rank."""
    if not dist.scores:
        raise EmptyInput("distribution has no scores")
    return 1 + sum(1 for s in dist.scores if s > score)


def medal_class(theory_score: float, dist: Distribution) -> str:
    if dist.thresholds is None:
        raise MissingThresholds(f"distribution {dist.label!r} carries no medal thresholds")
    if theory_score > dist.thresholds.gold_median:
        return CLASS_ABOVE_GOLD_MEDIAN
    if theory_score >= dist.thresholds.gold_min:
        return CLASS_GOLD_RANGE
    return CLASS_BELOW_GOLD_MIN


_SCI_RE = re.compile(r"\s*([+-]?)(\d)(?:\.(\d*))?[eE]([+-]?\d+)\s*\Z")


@dataclass(frozen=True)
class SciValue:
    """A value in scientific notation, kept as exact digits."""

    mantissa_digits: str
    exponent: int
    sign: int = 1

    def __post_init__(self) -> None:
        if not self.mantissa_digits.isdigit() or self.mantissa_digits[0] == "0":
            raise SciNotationError(f"mantissa must start with a nonzero digit: {self.mantissa_digits!r}")
        if self.sign not in (1, -1):
            raise SciNotationError(f"sign must be +1 or -1: {self.sign!r}")

    @classmethod
    def parse(cls, text: str) -> "SciValue":
        m = _SCI_RE.match(text)
        if not m:
            raise SciNotationError(f"not scientific notation: {text!r}")
        sign_s, lead, frac, exp_s = m.groups()
        return cls(
            mantissa_digits=lead + (frac or ""),
            exponent=int(exp_s),
            sign=-1 if sign_s == "-" else 1,
        )

    def prefix_at(self, ref_exponent: int, n: int) -> int:
        """First digits as a signed integer at scale 10^(ref_exponent - n + 1).

        Exact: the value is mantissa * 10^(exponent - len + 1); shifting left
        appends zeros, shifting right truncates toward zero.
        """
        mantissa = int(self.mantissa_digits)
        shift = self.exponent - ref_exponent + n - len(self.mantissa_digits)
        magnitude = mantissa * 10**shift if shift >= 0 else mantissa // 10**(-shift)
        return self.sign * magnitude

    def __str__(self) -> str:
        digits = self.mantissa_digits
        frac = f".{digits[1:]}" if len(digits) > 1 else ""
        return f"{'-' if self.sign < 0 else ''}{digits[0]}{frac}E{self.exponent:+d}"


def digit_accurate(answer: SciValue, gt: SciValue, n: int) -> bool:
    """True iff answer and ground truth differ by at most 1 in their first n
    significant digits, with the answer's digits aligned to the ground
    truth's exponent and truncated (never rounded).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    available = min(len(answer.mantissa_digits), len(gt.mantissa_digits))
    if n > available:
        raise ValueError(f"values carry only {available} significant digits; cannot compare {n}")
    a = answer.prefix_at(gt.exponent, n)
    b = gt.prefix_at(gt.exponent, n)
    return abs(a - b) <= 1


def count_accurate(pairs: Iterable[tuple[SciValue, SciValue]], n: int) -> int:
    return sum(1 for answer, gt in pairs if digit_accurate(answer, gt, n))


@dataclass(frozen=True)
class ExpertQaRecord:
    id: str
    query: str
    gt: SciValue
    answer_without_tool: SciValue
    answer_with_tool: SciValue


def load_expert_qa(path: Path | str) -> tuple[ExpertQaRecord, ...]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return tuple(
        ExpertQaRecord(
            id=str(entry["id"]),
            query=str(entry["query"]),
            gt=SciValue.parse(entry["gt"]),
            answer_without_tool=SciValue.parse(entry["answer_without_tool"]),
            answer_with_tool=SciValue.parse(entry["answer_with_tool"]),
        )
        for entry in raw["records"]
    )


def mae(readings: Sequence[float], gt: float) -> float:
    """Mean absolute error of repeated readings against a ground-truth value."""
    if not readings:
        raise EmptyInput("no readings")
    return sum(abs(r - gt) for r in readings) / len(readings)


def flag_outliers(readings: Sequence[float], gt: float, tol: float) -> list[int]:
    """Indices whose absolute deviation strictly exceeds tol."""
    if tol <= 0:
        raise ValueError("tol must be > 0")
    return [i for i, r in enumerate(readings) if abs(r - gt) > tol]


def _relevant_answer_text(answers: dict[str, str], part_id: str) -> str:
    relevant = {
        sid: text
        for sid, text in answers.items()
        if sid == part_id or sid.startswith(part_id + ".")
    }
    if not relevant:
        relevant = answers
    return "\n".join(f"{sid}: {text}" for sid, text in sorted(relevant.items()))


def judge_grade(
    answers: dict[str, str],
    rubric: Rubric,
    backend,
    cfg: ModelConfig,
    run_id: str = "",
) -> GradeRecord:
    """Ask a judge model, point by point, whether each criterion is addressed.

    Convenience only: the record is tagged ``judge-model`` and is never an
    official score. Malformed judge replies mark the point not-addressed
    with a warning note.
    """
    addressed: set[str] = set()
    notes: dict[str, str] = {}
    for part in rubric.parts:
        answer_text = _relevant_answer_text(answers, part.id)
        for point in part.points:
            messages = [
                ChatMessage.text(ROLE_SYSTEM, prompts.JUDGE_SYSTEM_PROMPT),
                ChatMessage.text(ROLE_USER, prompts.judge_instruction(point.description, answer_text)),
            ]
            try:
                reply = backend.generate(messages, cfg)
            except GatewayError as exc:
                notes[point.id] = f"judge backend error: {exc}"
                continue
            verdict = reply.strip().lower().rstrip(".,!")
            if verdict.startswith("yes"):
                addressed.add(point.id)
            elif not verdict.startswith("no"):
                notes[point.id] = f"unparseable judge reply: {reply.strip()[:80]}"
    return GradeRecord(
        run_id=run_id,
        problem_id=rubric.problem_id,
        addressed=frozenset(addressed),
        grader=GRADER_JUDGE,
        notes=notes,
    )


def format_report(
    rows: dict[str, list[ScoreReport]],
    part_totals: dict[str, dict[str, int]] | None = None,
) -> str:
    """Aligned text table of per-part and total mean+-std over repeated runs.

    ``rows`` maps problem id to its scored runs; ``part_totals`` optionally
    maps problem id to declared part totals for a reference row.
    """
    lines: list[str] = []
    for problem_id in sorted(rows):
        reports = rows[problem_id]
        part_ids = sorted({pid for r in reports for pid in r.per_part})
        header = ["Problem"] + part_ids + ["SUM"]
        table: list[list[str]] = [header]
        if part_totals and problem_id in part_totals:
            declared = part_totals[problem_id]
            total_row = [f"{problem_id} total score"]
            total_row += [format_points(declared.get(pid, 0)) for pid in part_ids]
            total_row.append(format_points(sum(declared.values())))
            table.append(total_row)
        stats_row = [f"{problem_id} (n={len(reports)})"]
        for pid in part_ids:
            stats = aggregate([r.per_part.get(pid, 0) for r in reports])
            stats_row.append(f"{stats.mean:.2f} ± {stats.std:.2f}")
        total_stats = aggregate([r.total for r in reports])
        stats_row.append(f"{total_stats.mean:.2f} ± {total_stats.std:.2f}")
        table.append(stats_row)

        widths = [max(len(row[i]) for row in table) for i in range(len(header))]
        for row in table:
            lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def report_export(rows: dict[str, list[ScoreReport]]) -> dict:
    """Machine-readable companion to :func:`format_report`."""
    out: dict = {"problems": {}}
    for problem_id, reports in sorted(rows.items()):
        part_ids = sorted({pid for r in reports for pid in r.per_part})
        parts = {}
        for pid in part_ids:
            stats = aggregate([r.per_part.get(pid, 0) for r in reports])
            parts[pid] = {"mean": round(stats.mean, 4), "std": round(stats.std, 4), "n": stats.n}
        total = aggregate([r.total for r in reports])
        out["problems"][problem_id] = {
            "parts": parts,
            "total": {"mean": round(total.mean, 4), "std": round(total.std, 4), "n": total.n},
        }
    return out
