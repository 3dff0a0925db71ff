"""Command-line entry point: knowledge-base build/inspect, translate, eval, simulate-check."""

from __future__ import annotations

import argparse
import logging
import sys
from collections import Counter
from pathlib import Path
from typing import TYPE_CHECKING, Sequence, TextIO

from dialsql.aide.pipeline import PipelineDeps, PipelineOptions, run_pipeline
from dialsql.aide.trajectory import dump_trajectory
from dialsql.core.config import LLM_MODES, load_settings
from dialsql.core.errors import DialError, PreconditionError
from dialsql.core.model import DialectId, SqlText, TranslationTask
from dialsql.core.schema import load_schema
from dialsql.dialects.embedded import make_executor
from dialsql.dialects.simulate import simulate
from dialsql.evalkit.bench import load_benchmark
from dialsql.evalkit.report import render_markdown, write_report
from dialsql.evalkit.runner import EvalSetup, run_benchmark, summarize
from dialsql.kb.construct import build_knowledge_base
from dialsql.kb.seed import seed_knowledge_base
from dialsql.kb.store import load, persist
from dialsql.llm.backends import HttpBackend, RecordingBackend, ReplayBackend
from dialsql.llm.fixtures import FixtureStore

if TYPE_CHECKING:
    from dialsql.core.config import Settings
    from dialsql.kb.store import KnowledgeBase
    from dialsql.llm.gateway import ChatBackend

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def echo(message: str = "", *, stream: TextIO | None = None) -> None:
    """Write a line to the chosen stream and flush immediately."""
    stream = stream or sys.stdout
    stream.write(f"{message}\n")
    stream.flush()


def build_backend(settings: Settings) -> ChatBackend:
    """The chat backend selected by ``llm_mode``."""
    if settings.llm_mode in {"replay", "record"} and settings.fixtures_dir is None:
        msg = f"llm_mode={settings.llm_mode} needs a fixture directory (--fixtures or DIAL_LLM_FIXTURES)."
        raise PreconditionError(msg)
    if settings.llm_mode == "replay":
        return ReplayBackend(FixtureStore(settings.fixtures_dir))
    http = HttpBackend(settings.llm_endpoint, settings.llm_model, api_key=settings.llm_api_key)
    if settings.llm_mode == "record":
        return RecordingBackend(http, FixtureStore(settings.fixtures_dir))
    return http


def open_knowledge_base(kb_dir: Path) -> KnowledgeBase:
    """The persisted knowledge base, or the curated seed when `kb_dir` does not exist yet."""
    if kb_dir.exists():
        return load(kb_dir)
    logger.warning("No knowledge base at %s; using the built-in seed", kb_dir)
    return seed_knowledge_base()


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Settings file (default ./dial.toml when present).")
    common.add_argument("--kb", dest="kb_dir", help="Knowledge base directory.")
    common.add_argument("--llm-mode", choices=LLM_MODES, help="Chat backend mode.")
    common.add_argument("--llm-endpoint", help="OpenAI-compatible endpoint base URL.")
    common.add_argument("--llm-model", help="Model name sent to the endpoint.")
    common.add_argument("--fixtures", dest="fixtures_dir", help="Replay/record fixture directory.")
    common.add_argument("--executor", choices=("simulated", "embedded"), help="Execution backend.")
    common.add_argument("--max-syntax-iters", type=int, help="Syntactic repair budget.")
    common.add_argument("--max-semantic-iters", type=int, help="Semantic repair budget.")
    common.add_argument("--top-k", type=int, help="Function templates retrieved per operator.")
    common.add_argument("--tau-rule", type=float, help="Fuzzy rule-match threshold.")
    common.add_argument("--tau-map", type=float, help="Documentation mapping threshold.")
    common.add_argument(
        "--routing-threshold",
        type=float,
        help="Consolidation routing threshold; changing it deviates from the 0.75 default.",
    )
    common.add_argument("--llm-audit", action="store_true", help="Let the model adjudicate free-text plan intents.")
    common.add_argument("--no-planning", action="store_true", help="Generate directly from the question.")
    common.add_argument("--no-kb", action="store_true", help="Disable knowledge retrieval and consolidation.")
    common.add_argument("--no-correction", action="store_true", help="Stop after the initial generation.")
    common.add_argument("--redact", action="store_true", help="Store prompt/reply digests in trajectory dumps.")
    common.add_argument("-v", "--verbose", action="count", default=0, help="More logging (-vv for debug).")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="dial", description="Dialect-specific natural-language-to-SQL translation.")
    commands = parser.add_subparsers(dest="command", required=True)

    kb = commands.add_parser("kb", help="Build or inspect the knowledge base.")
    kb_commands = kb.add_subparsers(dest="kb_command", required=True)
    kb_build = kb_commands.add_parser("build", parents=[common], help="Distill documentation into the knowledge base.")
    kb_build.add_argument("--docs", required=True, type=Path, help="Documentation directory.")
    kb_build.add_argument("--dialect", required=True, help="Dialect the documentation describes.")
    kb_commands.add_parser("inspect", parents=[common], help="Print entry counts.")

    translate = commands.add_parser("translate", parents=[common], help="Translate one question.")
    translate.add_argument("--question", required=True)
    translate.add_argument("--schema", required=True, type=Path, help="Schema JSON or DDL file.")
    translate.add_argument("--dialect", required=True)
    translate.add_argument("--seed", type=Path, help="SQL script seeding the embedded engine.")
    translate.add_argument("--out", dest="out_dir", type=Path, help="Write the trajectory JSON here.")

    evaluate = commands.add_parser("eval", parents=[common], help="Score a benchmark.")
    evaluate.add_argument("--bench", dest="bench_dir", required=True, type=Path)
    evaluate.add_argument("--out", dest="out_dir", required=True, type=Path)
    evaluate.add_argument("--dialects", help="Comma-separated dialects (default: all in the benchmark).")
    evaluate.add_argument("--jobs", type=int, help="Worker threads (default: number of processors).")

    check = commands.add_parser("simulate-check", parents=[common], help="Check a SQL file against the rule catalog.")
    check.add_argument("--dialect", required=True)
    check.add_argument("--schema", type=Path, help="Schema JSON or DDL file naming the known columns.")
    check.add_argument("file", type=Path)
    return parser


def _settings_from(args: argparse.Namespace) -> Settings:
    overrides = {
        name: getattr(args, name, None)
        for name in (
            "kb_dir", "llm_mode", "llm_endpoint", "llm_model", "fixtures_dir", "executor", "max_syntax_iters",
            "max_semantic_iters", "top_k", "tau_rule", "tau_map", "routing_threshold", "bench_dir", "out_dir",
            "jobs", "dialect",
        )
    }  # fmt: skip
    overrides["use_planning"] = False if args.no_planning else None
    overrides["use_kb"] = False if args.no_kb else None
    overrides["use_correction"] = False if args.no_correction else None
    overrides["deterministic"] = False if args.llm_audit else None
    overrides["redact"] = True if args.redact else None
    return load_settings(args.config, overrides)


def _configure_logging(verbosity: int, settings: Settings) -> None:
    level = {0: settings.log_level.upper(), 1: "INFO"}.get(verbosity, "DEBUG")
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def cmd_kb_build(args: argparse.Namespace, settings: Settings) -> int:
    dialect = DialectId.parse(args.dialect)
    kb = open_knowledge_base(settings.kb_dir)
    report = build_knowledge_base(kb, args.docs, dialect, build_backend(settings), tau_map=settings.tau_map)
    persist(kb, settings.kb_dir)
    echo(f"sections: {report.sections}  mapped: {report.mapped}  dropped: {report.dropped}")
    echo(f"function entries added: {report.functions_added}  constraint entries added: {report.constraints_added}")
    for skipped in report.skipped:
        echo(f"skipped: {skipped}", stream=sys.stderr)
    return EXIT_OK


def cmd_kb_inspect(args: argparse.Namespace, settings: Settings) -> int:  # noqa: ARG001
    kb = open_knowledge_base(settings.kb_dir)
    for dialect, counts in kb.counts().items():
        echo(f"{dialect}: f_func={counts['f_func']} r_rule={counts['r_rule']}")
        per_category = Counter(e.category for e in kb.functions_for(DialectId(dialect)))
        for category, count in sorted(per_category.items()):
            echo(f"  {category}: {count}")
    return EXIT_OK


def cmd_translate(args: argparse.Namespace, settings: Settings) -> int:
    dialect = DialectId.parse(args.dialect)
    task = TranslationTask(question=args.question, schema=load_schema(args.schema), dialect=dialect)
    seed_sql = args.seed.read_text(encoding="utf-8") if args.seed else None
    deps = PipelineDeps(
        llm=build_backend(settings),
        kb=open_knowledge_base(settings.kb_dir),
        executor=make_executor(settings.executor, dialect, seed_sql, task.schema),
    )
    result = run_pipeline(task, deps, PipelineOptions.from_settings(settings))
    if settings.out_dir is not None:
        dump_trajectory(result.trajectory, task, settings.out_dir, redact=settings.redact)
    if result.events and settings.use_kb:
        persist(deps.kb, settings.kb_dir)

    if args.verbose:
        for index, step in enumerate(result.trajectory.steps):
            status = "ok" if step.outcome.ok else "error"
            verdict = "" if step.audit is None else f" audit={'pass' if step.audit.passed else 'fail'}"
            rule = f" rule={step.applied_rule}" if step.applied_rule else ""
            echo(f"[{index}] {step.stage} {status}{verdict}{rule}", stream=sys.stderr)
    if result.sql is not None:
        echo(result.sql.text)
    if not result.passed:
        echo(f"not verified: {result.failure or 'final query did not pass execution and audit'}", stream=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    bench = load_benchmark(settings.bench_dir)
    dialects = [DialectId.parse(d) for d in args.dialects.split(",")] if args.dialects else bench.dialects()
    setup = EvalSetup(
        llm=build_backend(settings),
        kb=open_knowledge_base(settings.kb_dir),
        executor_kind=settings.executor,
        options=PipelineOptions.from_settings(settings),
    )
    results = run_benchmark(bench, setup, dialects, jobs=settings.jobs)
    report = summarize(results, dialects)
    write_report(report, results, settings.out_dir)
    echo(render_markdown(report))
    return EXIT_OK


def cmd_simulate_check(args: argparse.Namespace, settings: Settings) -> int:  # noqa: ARG001
    dialect = DialectId.parse(args.dialect)
    schema = load_schema(args.schema) if args.schema else None
    outcome = simulate(SqlText(args.file.read_text(encoding="utf-8"), dialect), schema=schema)
    if outcome.ok:
        echo(f"{args.file}: ok ({dialect.value})")
        return EXIT_OK
    trace = outcome.trace
    rule = trace.rule_id if trace and trace.rule_id else "syntax"
    echo(f"{args.file}: {rule}: {trace.message if trace else 'error'}")
    if trace and trace.failing_segment:
        echo(f"  near: {trace.failing_segment.text}")
    return EXIT_FAILURE


COMMANDS = {
    ("kb", "build"): cmd_kb_build,
    ("kb", "inspect"): cmd_kb_inspect,
    ("translate", None): cmd_translate,
    ("eval", None): cmd_eval,
    ("simulate-check", None): cmd_simulate_check,
}


def dispatch(argv: Sequence[str] | None = None) -> int:
    """Parse `argv`, run the subcommand and map the outcome to an exit code.

    Returns 0 on success, 1 on a domain failure, 2 on a usage error.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    try:
        settings = _settings_from(args)
    except (DialError, FileNotFoundError, ValueError) as exc:
        echo(f"dial: {exc}", stream=sys.stderr)
        return EXIT_USAGE
    _configure_logging(args.verbose, settings)

    handler = COMMANDS[(args.command, getattr(args, "kb_command", None))]
    try:
        return handler(args, settings)
    except DialError as exc:
        echo(f"dial: {exc.__class__.__name__}: {exc}", stream=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        echo(f"dial: {exc}", stream=sys.stderr)
        return EXIT_FAILURE


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
