"""Batch evaluation: run the pipeline per (item, dialect) on a bounded worker pool and score."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

from dialsql.aide.pipeline import PipelineDeps, PipelineOptions, run_pipeline
from dialsql.core.errors import AdapterUnavailable, DialError
from dialsql.core.model import ErrorTrace, ExecutionOutcome, SqlText
from dialsql.dialects.embedded import make_executor
from dialsql.evalkit.metrics import (
    AccuracyCase,
    DialectScores,
    MetricsReport,
    aggregate_overall,
    is_order_sensitive,
    mean_dfc,
    score_acc,
    score_dfc,
    score_exec,
)

if TYPE_CHECKING:
    from dialsql.aide.trajectory import RepairTrajectory
    from dialsql.core.model import DialectId
    from dialsql.dialects.simulate import Executor
    from dialsql.evalkit.bench import Benchmark, BenchmarkItem
    from dialsql.kb.store import KnowledgeBase
    from dialsql.llm.embed import EmbeddingProvider
    from dialsql.llm.gateway import ChatBackend

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class ItemResult:
    qid: str
    dialect: DialectId
    sql: str | None
    outcome: ExecutionOutcome
    gold_outcome: ExecutionOutcome
    order_sensitive: bool
    dfc: float | None
    passed: bool
    trajectory: RepairTrajectory | None = None
    failure: str | None = None

    @property
    def accuracy_case(self) -> AccuracyCase:
        return AccuracyCase(self.outcome, self.gold_outcome, self.order_sensitive)


@dataclass(frozen=True, slots=True)
class EvalSetup:
    llm: ChatBackend
    kb: KnowledgeBase | None
    executor_kind: str = "simulated"
    options: PipelineOptions = field(default_factory=PipelineOptions)
    embedder: EmbeddingProvider | None = None


def _executor(kind: str, item: BenchmarkItem, dialect: DialectId) -> Executor:
    schema = item.task(dialect).schema
    try:
        return make_executor(kind, dialect, item.seed_sql(), schema)
    except AdapterUnavailable:
        logger.debug("No embedded engine for %s; simulating", dialect.value)
        return make_executor("simulated", dialect, schema=schema)


def _failed(message: str) -> ExecutionOutcome:
    return ExecutionOutcome.error(ErrorTrace(message=message))


def evaluate_item(item: BenchmarkItem, dialect: DialectId, setup: EvalSetup) -> ItemResult:
    """Translate one item for one dialect and score it against the gold query on the same engine kind."""
    gold = item.gold[dialect]
    gold_outcome = _executor(setup.executor_kind, item, dialect).execute(SqlText(gold.gold_sql, dialect))
    executor = _executor(setup.executor_kind, item, dialect)
    deps = PipelineDeps(llm=setup.llm, kb=setup.kb, executor=executor)
    if setup.embedder is not None:
        deps.embedder = setup.embedder

    try:
        result = run_pipeline(item.task(dialect), deps, setup.options)
    except DialError as exc:
        logger.warning("Item %s (%s) failed: %s", item.qid, dialect.value, exc)
        return ItemResult(
            qid=item.qid, dialect=dialect, sql=None, outcome=_failed(str(exc)), gold_outcome=gold_outcome,
            order_sensitive=False, dfc=score_dfc("", gold.gold_sql, gold.feature_patterns), passed=False,
            failure=str(exc),
        )  # fmt: skip

    sql = result.sql
    outcome = _executor(setup.executor_kind, item, dialect).execute(sql) if sql else _failed("no query")
    return ItemResult(
        qid=item.qid,
        dialect=dialect,
        sql=sql.text if sql else None,
        outcome=outcome,
        gold_outcome=gold_outcome,
        order_sensitive=is_order_sensitive(gold.gold_sql, dialect),
        dfc=score_dfc(sql.text if sql else "", gold.gold_sql, gold.feature_patterns),
        passed=result.passed,
        trajectory=result.trajectory,
        failure=result.failure,
    )


def run_benchmark(
    bench: Benchmark,
    setup: EvalSetup,
    dialects: list[DialectId] | None = None,
    jobs: int | None = None,
    on_result: Callable[[ItemResult], None] | None = None,
) -> list[ItemResult]:
    """Evaluate every item on every requested dialect it has a gold query for.

    Results come back in (item, dialect) order regardless of `jobs`.
    """
    wanted = dialects or bench.dialects()
    work = [(item, d) for item in bench.items for d in wanted if d in item.gold]
    workers = max(1, jobs or os.cpu_count() or 1)
    logger.info("Evaluating %d run(s) with %d worker(s)", len(work), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda pair: evaluate_item(pair[0], pair[1], setup), work))
    if on_result is not None:
        for result in results:
            on_result(result)
    return results


def summarize(results: list[ItemResult], dialects: list[DialectId]) -> MetricsReport:
    """Per-dialect Exec/Acc/DFC plus the all-or-nothing overall scores."""
    per_dialect: dict[str, DialectScores] = {}
    for dialect in dialects:
        mine = [r for r in results if r.dialect == dialect]
        per_dialect[dialect.value] = DialectScores(
            exec=score_exec([r.outcome for r in mine]),
            acc=score_acc([r.accuracy_case for r in mine]),
            dfc=mean_dfc(r.dfc for r in mine),
            count=len(mine),
        )

    by_item: dict[str, dict[DialectId, ItemResult]] = {}
    for result in results:
        by_item.setdefault(result.qid, {})[result.dialect] = result
    common = {qid: runs for qid, runs in by_item.items() if all(d in runs for d in dialects)}
    overall = {
        "exec": aggregate_overall({q: {d: r.outcome.ok for d, r in runs.items()} for q, runs in common.items()}, dialects),
        "acc": aggregate_overall(
            {q: {d: r.accuracy_case.correct for d, r in runs.items()} for q, runs in common.items()}, dialects
        ),
    }
    counts = {"items": len(by_item), "common_items": len(common), "runs": len(results)}
    return MetricsReport(per_dialect=per_dialect, overall=overall, counts=counts)
