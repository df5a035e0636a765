"""Command-line surface: solve, grade, report, rank, digit-acc, bench-image, replay.

Exit codes: 0 success, 2 usage or data error, 3 fatal backend error across
all runs. Run artifacts land in ``<runs-root>/<problem>/<run-id>/`` as
``manifest.json``, ``transcript.jsonl``, ``solution.json`` and, after
grading, ``score.json``.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import datetime
import os
import sys
from pathlib import Path

from . import FIXTURES_DIR
from .agent import TERMINATED_FATAL, RunPolicy, run_agent
from .config import ConfigError, HarnessConfig, load_config
from .dsl import ExecBudget
from .dsl import executor as dsl_exec
from .dsl import parser as dsl_parser
from .gateway import (
    API_KEY_ENV,
    Cassette,
    CassetteBackend,
    LiveBackend,
    ModelConfig,
    RecordingBackend,
)
from .gateway.cassette import CassetteRecorder
from .gateway.messages import ImagePart, TextPart
from .problems import ProblemError, Problem, load_problem, load_rubric
from .scoring import (
    CLASS_ABOVE_GOLD_MEDIAN,
    CLASS_BELOW_GOLD_MIN,
    CLASS_GOLD_RANGE,
    ScoreReport,
    ScoringError,
    count_accurate,
    flag_outliers,
    format_report,
    judge_grade,
    load_distribution,
    load_expert_qa,
    load_grade,
    mae,
    rank,
    medal_class,
    report_export,
    save_grade,
    score_solution,
)
from .tools import (
    WOLFRAM_APP_ID_ENV,
    ToolDeps,
    WolframClient,
    WolframRecordingTransport,
    WolframReplayTransport,
    build_registry,
)
from .transcript import (
    CASSETTE_FILE,
    MANIFEST_FILE,
    SCORE_FILE,
    SOLUTION_FILE,
    TRANSCRIPT_FILE,
    TranscriptWriter,
    read_json,
    read_transcript,
    write_json,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BACKEND = 3

MEDAL_TEXT = {
    CLASS_ABOVE_GOLD_MEDIAN: "above gold median",
    CLASS_GOLD_RANGE: "gold range",
    CLASS_BELOW_GOLD_MIN: "below gold min",
}

DEFAULT_QA_FIXTURE = FIXTURES_DIR / "expert_qa.json"


class CliError(Exception):
    """Usage or data error; message goes to stderr, exit code 2."""


@dataclasses.dataclass(frozen=True)
class RunSet:
    """Outcome of one solve invocation: K repetitions of one problem."""

    problem_id: str
    repetitions: int
    run_ids: tuple[str, ...]
    status: dict[str, str]  # run id -> terminated_by

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if len(set(self.run_ids)) != len(self.run_ids):
            raise ValueError("run ids must be unique")


def _utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _model_cfg(config: HarnessConfig, model_id: str) -> ModelConfig:
    return ModelConfig(
        model_id=model_id,
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
        request_timeout=config.request_timeout,
        max_retries=config.max_retries,
        backoff_base=config.backoff_base,
    )


def _make_backends(config: HarnessConfig, args, run_dir: Path):
    """One chat backend per run.

    In replay mode a single cassette serves the manager and every
    model-backed tool: execution within a run is strictly sequential, so the
    recorded turn order is reproduced exactly.
    """
    if args.replay:
        mode = "replay-lenient" if args.lenient else "replay-strict"
        backend = CassetteBackend(Cassette.load(args.replay, mode))
        return backend, backend, backend
    api_key = os.environ.get(API_KEY_ENV)
    manager = LiveBackend(config.manager_endpoint, api_key, image_max_dim=config.image_max_dim)
    vision = LiveBackend(config.vision_endpoint_or_default, api_key, image_max_dim=config.image_max_dim)
    if args.record:
        # one shared recorder keeps manager and tool turns in call order, so a
        # single cassette replays the whole run
        recorder = CassetteRecorder(run_dir / CASSETTE_FILE)
        return (
            RecordingBackend(manager, recorder),
            RecordingBackend(vision, recorder),
            RecordingBackend(manager, recorder),
        )
    return manager, vision, manager


def _make_wolfram(config: HarnessConfig, args, run_dir: Path) -> WolframClient:
    if args.wolfram_replay:
        return WolframClient(
            app_id="replay", transport=WolframReplayTransport.load(args.wolfram_replay)
        )
    app_id = os.environ.get(WOLFRAM_APP_ID_ENV)
    client = WolframClient(app_id=app_id, endpoint=config.wolfram_endpoint)
    if args.record:
        client = WolframClient(
            app_id=app_id,
            endpoint=config.wolfram_endpoint,
            transport=WolframRecordingTransport(
                WolframClient._requests_transport, run_dir / "wolfram.jsonl"
            ),
        )
    return client


def _problem_content(problem: Problem):
    """Full problem statement (text, then figures) handed to the reviewer tool."""
    text = "\n\n".join(f"[{sp.id}] {sp.statement.strip()}" for sp in problem.subparts)
    parts = [TextPart(text)]
    for asset in problem.assets:
        parts.append(ImagePart(asset_id=asset.id, payload=asset.read_bytes(), media_kind=asset.media_kind))
    return tuple(parts)


def _execute_run(problem: Problem, config: HarnessConfig, args, enabled: list[str], index: int) -> str:
    run_id = f"run-{index:03d}"
    run_dir = Path(args.out) / problem.id / run_id
    run_dir.mkdir(parents=True, exist_ok=True)

    manager_backend, vision_backend, aux_backend = _make_backends(config, args, run_dir)
    deps = ToolDeps(
        assets={a.id: a for a in problem.assets},
        vision_backend=vision_backend,
        vision_cfg=_model_cfg(config, config.vision_model_or_default),
        review_backend=aux_backend,
        review_cfg=_model_cfg(config, config.manager_model),
        summary_backend=aux_backend,
        summary_cfg=_model_cfg(config, config.manager_model),
        problem_content=_problem_content(problem),
        wolfram=_make_wolfram(config, args, run_dir),
        summary_char_budget=config.summary_char_budget,
        neutral_review_prompt=config.neutral_review_prompt,
    )
    registry = build_registry(enabled, deps)
    policy = RunPolicy(
        max_steps=args.max_steps or config.max_steps,
        summarize_when_prompt_exceeds=config.summarize_when_prompt_exceeds,
        seed_label=run_id,
    )
    budget = ExecBudget(
        max_statements=config.max_statements,
        max_observation_chars=config.max_observation_chars,
        max_tool_millis=config.max_tool_millis,
    )
    summarizer = None
    if "summarize" in registry.enabled_names:
        summarize_fn = registry.lookup("summarize")
        summarizer = lambda text: summarize_fn(trajectory_text=text)  # noqa: E731

    started_at = _utcnow()
    transcript = TranscriptWriter(run_dir / TRANSCRIPT_FILE, run_id)
    solution = run_agent(
        problem,
        registry,
        manager_backend,
        policy,
        _model_cfg(config, config.manager_model),
        budget=budget,
        summarizer=summarizer,
        transcript=transcript,
        inline_images=args.inline_images or config.inline_images,
    )

    write_json(
        run_dir / MANIFEST_FILE,
        {
            "run_id": run_id,
            "problem_id": problem.id,
            "enabled_tools": sorted(registry.enabled_names),
            "model_ids": {
                "manager": config.manager_model,
                "vision": config.vision_model_or_default,
                "judge": config.judge_model_or_default,
            },
            "policy": dataclasses.asdict(policy),
            "config_digest": config.digest(),
            "started_at": started_at,
            "finished_at": _utcnow(),
            "terminated_by": solution.terminated_by,
        },
    )
    write_json(
        run_dir / SOLUTION_FILE,
        {
            "run_id": run_id,
            "problem_id": problem.id,
            "answers": dict(sorted(solution.answers.items())),
            "terminated_by": solution.terminated_by,
            "steps": len(solution.trajectory.steps),
        },
    )
    return solution.terminated_by


def solve_runs(problem: Problem, config: HarnessConfig, args, enabled: list[str]) -> RunSet:
    """Execute K independent runs (parallel by default) and collect their status."""
    runs = args.runs or config.repetitions
    jobs = args.jobs or min(runs, os.cpu_count() or 1)
    if jobs > 1 and runs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_execute_run, problem, config, args, enabled, i + 1)
                for i in range(runs)
            ]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [_execute_run(problem, config, args, enabled, i + 1) for i in range(runs)]
    run_ids = tuple(f"run-{i:03d}" for i in range(1, runs + 1))
    return RunSet(
        problem_id=problem.id,
        repetitions=runs,
        run_ids=run_ids,
        status=dict(zip(run_ids, outcomes)),
    )


def cmd_solve(args) -> int:
    config = load_config(args.config)
    problem = load_problem(args.problem_dir)
    disabled = set(args.disable_tool or [])
    enabled = [t for t in config.enabled_tools if t not in disabled]

    run_set = solve_runs(problem, config, args, enabled)
    for run_id in run_set.run_ids:
        print(f"{run_id}: {run_set.status[run_id]}")
    if any(o == TERMINATED_FATAL for o in run_set.status.values()):
        return EXIT_BACKEND
    return EXIT_OK


def cmd_grade(args) -> int:
    rubric = load_rubric(args.rubric)
    run_dir = Path(args.run_dir)
    solution_path = run_dir / SOLUTION_FILE
    if not solution_path.is_file():
        raise CliError(f"no {SOLUTION_FILE} in {run_dir}")
    solution = read_json(solution_path)

    if args.grade_file:
        grade = load_grade(args.grade_file, rubric)
    elif args.judge:
        config = load_config(args.config)
        if args.replay:
            backend = CassetteBackend(Cassette.load(args.replay, "replay-lenient"))
        else:
            backend = LiveBackend(config.judge_endpoint_or_default, os.environ.get(API_KEY_ENV))
        grade = judge_grade(
            solution.get("answers", {}),
            rubric,
            backend,
            _model_cfg(config, config.judge_model_or_default),
            run_id=solution.get("run_id", ""),
        )
        save_grade(run_dir / "grade.json", grade)
        print("judge-model grading is a convenience, not an official score")
    else:
        raise CliError("provide --grade-file PATH or --judge")

    report = score_solution(rubric, grade)
    write_json(
        run_dir / SCORE_FILE,
        {
            "run_id": solution.get("run_id", ""),
            "problem_id": rubric.problem_id,
            "grader": grade.grader,
            "per_part": report.per_part,
            "total": report.total,
        },
    )
    print(f"total: {report.total / 100:.2f} points")
    return EXIT_OK


def cmd_report(args) -> int:
    root = Path(args.runs_root)
    rows: dict[str, list[ScoreReport]] = {}
    for score_path in sorted(root.glob("*/*/" + SCORE_FILE)):
        data = read_json(score_path)
        problem_id = data["problem_id"]
        if args.problem and problem_id != args.problem:
            continue
        rows.setdefault(problem_id, []).append(
            ScoreReport(per_part={k: int(v) for k, v in data["per_part"].items()}, total=int(data["total"]))
        )
    if not rows:
        raise CliError(f"no scored runs under {root}")
    print(format_report(rows), end="")
    if args.json:
        write_json(args.json, report_export(rows))
    return EXIT_OK


def cmd_rank(args) -> int:
    dist = load_distribution(args.distribution)
    printed = False
    if dist.scores:
        print(f"rank {rank(args.score, dist)} of {len(dist.scores)}")
        printed = True
    if dist.thresholds is not None:
        print(f"medal class: {MEDAL_TEXT[medal_class(args.score, dist)]}")
        printed = True
    if not printed:
        raise CliError(f"distribution {dist.label!r} has neither scores nor thresholds")
    return EXIT_OK


def cmd_digit_acc(args) -> int:
    records = load_expert_qa(args.fixture)
    without = count_accurate([(r.answer_without_tool, r.gt) for r in records], args.n)
    with_tool = count_accurate([(r.answer_with_tool, r.gt) for r in records], args.n)
    print(f"without-tool: {without}/{len(records)}, with-tool: {with_tool}/{len(records)}")
    return EXIT_OK


def cmd_bench_image(args) -> int:
    readings = []
    for line in Path(args.readings).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            readings.append(float(line))
    value = mae(readings, args.gt)
    flagged = flag_outliers(readings, args.gt, args.tol)
    print(f"MAE: {value:.6g}")
    print("outliers: " + (", ".join(str(i) for i in flagged) if flagged else "none"))
    return EXIT_OK


class _EchoRegistry:
    """Deterministic stand-in tools for offline transcript replay."""

    def lookup(self, name: str):
        def stub(**kwargs) -> str:
            rendered = ", ".join(f"{k}={v!r}" for k, v in kwargs.items())
            return f"[stub {name}] {rendered}"

        return stub


def cmd_replay(args) -> int:
    records = read_transcript(args.transcript)
    actions = [r for r in records if r.get("phase") == "action"]
    if not actions:
        raise CliError(f"no action records in {args.transcript}")
    registry = _EchoRegistry()
    for record in actions:
        print(f"### step {record['step_index']}")
        try:
            script = dsl_parser.parse_script(record["payload"])
            outcome = dsl_exec.execute(script, registry)
        except (dsl_parser.ScriptError, dsl_exec.BudgetExceeded) as exc:
            print(f"error: {exc}")
            continue
        if isinstance(outcome, dsl_exec.Final):
            print("final answers:")
            for k, v in sorted(outcome.answers.items()):
                print(f"  {k}: {v}")
        else:
            print(outcome.text)
    return EXIT_OK


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="physoly",
        description="Solve multi-part physics olympiad theory problems with a tool-using "
        "agent and grade the results.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the agent on a problem directory")
    p.add_argument("problem_dir")
    p.add_argument("--config", default=None)
    p.add_argument("--runs", type=int, default=None, help="repetitions (default: config, 5)")
    p.add_argument("--disable-tool", action="append", default=[], metavar="NAME")
    p.add_argument("--replay", default=None, metavar="CASSETTE")
    p.add_argument("--lenient", action="store_true", help="skip digest checks during replay")
    p.add_argument("--record", action="store_true", help="record live turns to a cassette")
    p.add_argument("--wolfram-replay", default=None, metavar="JSONL")
    p.add_argument("--inline-images", action="store_true")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--out", default="runs", metavar="RUNS_ROOT")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("grade", help="score one run against a rubric")
    p.add_argument("run_dir")
    p.add_argument("rubric")
    p.add_argument("--grade-file", default=None)
    p.add_argument("--judge", action="store_true")
    p.add_argument("--replay", default=None, metavar="CASSETTE", help="judge-model cassette")
    p.add_argument("--config", default=None)
    p.set_defaults(fn=cmd_grade)

    p = sub.add_parser("report", help="mean and std over scored runs")
    p.add_argument("runs_root")
    p.add_argument("--problem", default=None)
    p.add_argument("--json", default=None, metavar="PATH", help="write structured export")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("rank", help="rank a score against a distribution file")
    p.add_argument("score", type=float)
    p.add_argument("distribution")
    p.set_defaults(fn=cmd_rank)

    p = sub.add_parser("digit-acc", help="N-digit accuracy counts for a QA fixture")
    p.add_argument("fixture", nargs="?", default=str(DEFAULT_QA_FIXTURE))
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(fn=cmd_digit_acc)

    p = sub.add_parser("bench-image", help="MAE and outliers of figure readings")
    p.add_argument("readings", help="text file, one reading per line")
    p.add_argument("--gt", type=float, required=True)
    p.add_argument("--tol", type=float, required=True)
    p.set_defaults(fn=cmd_bench_image)

    p = sub.add_parser("replay", help="re-execute a transcript's action scripts")
    p.add_argument("transcript")
    p.set_defaults(fn=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, ConfigError, ProblemError, ScoringError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
