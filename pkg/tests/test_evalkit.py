from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from shop import AVG_SQL, COUNT_SQL, GOLD_SQL, fenced

from dialsql.aide.pipeline import PipelineOptions
from dialsql.core.errors import CorruptRecord, InvalidPattern, MissingDialectOutcome
from dialsql.core.model import DialectId, ErrorTrace, ExecutionOutcome
from dialsql.evalkit.bench import load_benchmark
from dialsql.evalkit.metrics import (
    AccuracyCase,
    aggregate_overall,
    is_order_sensitive,
    mean_dfc,
    score_acc,
    score_dfc,
    score_exec,
)
from dialsql.evalkit.patterns import DEFAULT_PATTERNS, load_patterns, patterns_for
from dialsql.evalkit.report import render_markdown, write_report
from dialsql.evalkit.runner import EvalSetup, run_benchmark, summarize
from dialsql.llm.backends import ScriptedBackend
from dialsql.llm.gateway import ChatRequest

ORACLE, SQLITE = DialectId.ORACLE, DialectId.SQLITE
DIALECTS = [DialectId.SQLITE, DialectId.MYSQL, DialectId.POSTGRESQL, DialectId.SQLSERVER, DialectId.DUCKDB, ORACLE]

OK = ExecutionOutcome.success(rows=((1, "a"), (2, "b")))
SWAPPED = ExecutionOutcome.success(rows=((2, "b"), (1, "a")))
BROKEN = ExecutionOutcome.error(ErrorTrace(message="boom"))


def test_exec_and_acc() -> None:
    assert score_exec([OK, BROKEN, OK, BROKEN]) == 0.5
    assert score_exec([]) == 0.0
    cases = [
        AccuracyCase(SWAPPED, OK),
        AccuracyCase(SWAPPED, OK, order_sensitive=True),
        AccuracyCase(BROKEN, OK),
        AccuracyCase(OK, OK, order_sensitive=True),
    ]
    assert [case.correct for case in cases] == [True, False, False, True]
    assert score_acc(cases) == 0.5


def test_order_sensitivity_follows_outer_query() -> None:
    assert is_order_sensitive(GOLD_SQL, SQLITE)
    assert not is_order_sensitive(COUNT_SQL, SQLITE)
    assert not is_order_sensitive("SELECT a FROM (SELECT a FROM t ORDER BY a) AS s", SQLITE)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_overall_is_all_or_nothing(seed: int) -> None:
    matrix = np.random.default_rng(seed).random((20, len(DIALECTS))) < 0.8
    results = {f"q{i}": dict(zip(DIALECTS, map(bool, row))) for i, row in enumerate(matrix)}
    assert aggregate_overall(results, DIALECTS) == pytest.approx(matrix.all(axis=1).mean())


def test_overall_needs_every_dialect() -> None:
    with pytest.raises(MissingDialectOutcome):
        aggregate_overall({"q1": {SQLITE: True}}, [SQLITE, ORACLE])


def test_dfc() -> None:
    patterns = patterns_for(ORACLE)
    assert score_dfc("SELECT a || b FROM DUAL", "SELECT a || b FROM DUAL", patterns) == 1.0
    assert score_dfc("SELECT CONCAT(a, b)", "SELECT a || b FROM DUAL", patterns) == 0.0
    assert score_dfc("SELECT a || b", "SELECT a || b FROM DUAL", patterns) == 0.5
    assert score_dfc("SELECT 1", "SELECT 1", [r"\bLISTAGG\s*\("]) is None
    assert mean_dfc([None, 1.0, 0.0, None]) == 0.5
    assert mean_dfc([None]) is None


def test_invalid_pattern() -> None:
    with pytest.raises(InvalidPattern):
        score_dfc("SELECT 1", "SELECT 1", ["(unclosed"])


def test_default_patterns_compile() -> None:
    assert len({p.feature_id for p in DEFAULT_PATTERNS}) == len(DEFAULT_PATTERNS)
    for feature in DEFAULT_PATTERNS:
        feature.compile()


def test_pattern_extension_file(tmp_path: Path) -> None:
    path = tmp_path / "patterns.jsonl"
    path.write_text(
        json.dumps({"feature_id": "X1", "description": "top clause", "pattern": r"\bTOP\s+\d+", "dialects": ["sqlserver"]})
        + "\n\n",
        encoding="utf-8",
    )
    (feature,) = load_patterns(path)
    assert feature.dialects == frozenset({DialectId.SQLSERVER})
    assert patterns_for(DialectId.SQLSERVER, (feature,)) == [r"\bTOP\s+\d+"]

    path.write_text('{"feature_id": "X2", "pattern": "[", "dialects": ["oracle"]}\n', encoding="utf-8")
    with pytest.raises(InvalidPattern):
        load_patterns(path)
    path.write_text('{"feature_id": "X3"}\n', encoding="utf-8")
    with pytest.raises(CorruptRecord):
        load_patterns(path)


def test_load_benchmark(bench_dir: Path) -> None:
    bench = load_benchmark(bench_dir)
    assert [item.qid for item in bench.items] == ["shop-1", "shop-2"]
    assert bench.dialects() == [ORACLE, SQLITE]
    first = bench.items[0]
    assert first.dialects == [ORACLE, SQLITE]
    assert first.task(ORACLE).schema.table("orders") is not None
    assert "CREATE TABLE orders" in (first.seed_sql() or "")


def _direct_backend(shop_sql: str) -> ScriptedBackend:
    def reply(req: ChatRequest) -> str:
        return fenced(COUNT_SQL if "How many orders" in req.rendered_prompt else shop_sql)

    return ScriptedBackend({"sql_generate_direct": reply})


def _setup(shop_sql: str) -> EvalSetup:
    return EvalSetup(
        llm=_direct_backend(shop_sql),
        kb=None,
        executor_kind="embedded",
        options=PipelineOptions(use_planning=False),
    )


def test_bench_run_and_report(bench_dir: Path, tmp_path: Path) -> None:
    bench = load_benchmark(bench_dir)
    seen: list[str] = []
    results = run_benchmark(bench, _setup(GOLD_SQL), jobs=1, on_result=lambda r: seen.append(r.qid))

    assert [(r.qid, r.dialect) for r in results] == [("shop-1", ORACLE), ("shop-1", SQLITE), ("shop-2", SQLITE)]
    assert seen == ["shop-1", "shop-1", "shop-2"]
    assert all(r.passed and r.outcome.ok for r in results)
    live = results[1]
    assert live.order_sensitive
    assert live.outcome.rows == live.gold_outcome.rows
    assert len(live.outcome.rows or ()) == 2

    report = summarize(results, bench.dialects())
    assert report.counts == {"items": 2, "common_items": 1, "runs": 3}
    assert report.overall == {"exec": 1.0, "acc": 1.0}
    assert report.per_dialect["sqlite"].count == 2
    assert report.per_dialect["sqlite"].dfc == 1.0
    assert report.per_dialect["oracle"].acc == 1.0

    json_path, md_path = write_report(report, results, tmp_path / "out")
    document = json.loads(json_path.read_text(encoding="utf-8"))
    assert document["counts"]["runs"] == 3
    assert [item["qid"] for item in document["items"]] == ["shop-1", "shop-1", "shop-2"]
    markdown = md_path.read_text(encoding="utf-8")
    assert "| oracle Exec | oracle Acc | oracle DFC | sqlite Exec |" in markdown
    assert "| dialsql | 100.00 |" in markdown


def test_wrong_aggregate_costs_accuracy_only(bench_dir: Path) -> None:
    bench = load_benchmark(bench_dir)
    results = run_benchmark(bench, _setup(AVG_SQL), dialects=[SQLITE], jobs=1)
    report = summarize(results, [SQLITE])
    assert report.per_dialect["sqlite"].exec == 1.0
    assert report.per_dialect["sqlite"].acc == 0.5
    assert report.overall == {"exec": 1.0, "acc": 0.5}
    assert "n/a" not in render_markdown(report)
