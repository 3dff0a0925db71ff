from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pytest
from shop import AVG_SQL, CATEGORY_REPLY, DISTILL_REPLY, FETCH_SQL, GOLD_SQL, LIMITED_SQL, PLAN_REPLY, build_shop_plan, fenced

from dialsql.aide.consolidate import distill_primitive, template_identifiers
from dialsql.aide.pipeline import PipelineDeps, PipelineOptions, run_pipeline
from dialsql.aide.recovery import DebugConfig, syntactic_recovery
from dialsql.aide.trajectory import RepairStep, RepairTrajectory, dump_trajectory
from dialsql.core.errors import PreconditionError, RecoveryExhausted
from dialsql.core.model import DialectId, ExecutionOutcome, SchemaCatalog, SqlText, TranslationTask
from dialsql.dialects.signature import ID
from dialsql.dialects.simulate import SimulatedExecutor
from dialsql.kb.store import KnowledgeBase
from dialsql.llm.backends import ScriptedBackend
from dialsql.planner.model import DialectAwarePlan

ORACLE = DialectId.ORACLE
LIMIT_KEY = "ORA-00933: SQL command not properly ended"


def _backend(**replies: Any) -> ScriptedBackend:
    return ScriptedBackend({"plan_build": PLAN_REPLY, "category_map": CATEGORY_REPLY, **replies})


def _run(task: TranslationTask, backend: ScriptedBackend, kb: KnowledgeBase | None, **options: Any):
    deps = PipelineDeps(llm=backend, kb=kb, executor=SimulatedExecutor(task.dialect))
    return run_pipeline(task, deps, PipelineOptions(**options))


def _oracle(sql: str) -> SqlText:
    return SqlText(sql, ORACLE)


def test_clean_first_attempt(oracle_task: TranslationTask, seeded_kb: KnowledgeBase) -> None:
    before = seeded_kb.counts()
    backend = _backend(sql_generate=fenced(GOLD_SQL))
    result = _run(oracle_task, backend, seeded_kb)

    assert result.passed
    assert result.sql == _oracle(GOLD_SQL)
    assert result.trajectory.stages() == ["init"]
    assert result.audit is not None and result.audit.passed
    assert result.events == []
    assert result.primitive is None
    assert seeded_kb.counts() == before
    assert [ex.template_id for ex in result.trajectory.exchanges] == ["plan_build", "category_map", "sql_generate"]
    assert "- operator 3 <" in backend.prompts("sql_generate")[0]


def test_rule_fix_is_consolidated(oracle_task: TranslationTask, seeded_kb: KnowledgeBase) -> None:
    backend = _backend(sql_generate=fenced(LIMITED_SQL), rule_apply=fenced(FETCH_SQL), distill=DISTILL_REPLY)
    result = _run(oracle_task, backend, seeded_kb)

    assert result.passed
    assert result.sql == _oracle(FETCH_SQL)
    assert result.trajectory.stages() == ["init", "rule_fix"]
    applied = result.trajectory.steps[1].applied_rule
    assert applied is not None
    assert seeded_kb.constraints[applied].rule_spec.startswith("[C1]")
    assert "LIMIT 5" in backend.prompts("rule_apply")[0]

    assert result.primitive is not None
    assert result.primitive.signature == LIMIT_KEY
    assert result.primitive.corrective_exemplar == FETCH_SQL
    assert result.primitive.incorrect_exemplar == LIMITED_SQL
    assert len(result.events) == 1
    assert result.events[0].kind == "added"


def test_failed_rule_escalates_to_diagnosis(oracle_task: TranslationTask, seeded_kb: KnowledgeBase) -> None:
    backend = _backend(
        sql_generate=fenced(LIMITED_SQL),
        rule_apply=fenced(LIMITED_SQL),
        deep_diagnose=fenced(FETCH_SQL),
        distill=DISTILL_REPLY,
    )
    result = _run(oracle_task, backend, seeded_kb)
    assert result.passed
    assert result.trajectory.stages() == ["init", "rule_fix", "deep_fix"]
    assert len(backend.prompts("rule_apply")) == 1


def test_without_kb_goes_straight_to_diagnosis(oracle_task: TranslationTask, seeded_kb: KnowledgeBase) -> None:
    before = seeded_kb.counts()
    backend = _backend(sql_generate=fenced(LIMITED_SQL), deep_diagnose=fenced(FETCH_SQL))
    result = _run(oracle_task, backend, seeded_kb, use_kb=False)

    assert result.passed
    assert result.trajectory.stages() == ["init", "deep_fix"]
    assert result.events == []
    assert seeded_kb.counts() == before
    assert "plan operators:\n(none)" in backend.prompts("sql_generate")[0]


def test_semantic_fix(oracle_task: TranslationTask, seeded_kb: KnowledgeBase) -> None:
    backend = _backend(sql_generate=fenced(AVG_SQL), semantic_fix=fenced(GOLD_SQL), distill=DISTILL_REPLY)
    result = _run(oracle_task, backend, seeded_kb)

    assert result.passed
    assert result.trajectory.stages() == ["init", "semantic_fix"]
    init = result.trajectory.steps[0]
    assert init.outcome.ok
    assert init.audit is not None
    assert init.audit.failed() == ["computation"]
    assert "SUM→AVG on amount" in backend.prompts("semantic_fix")[0]
    assert result.primitive is not None
    assert result.primitive.signature is None


def test_semantic_fix_that_breaks_execution(oracle_task: TranslationTask, seeded_kb: KnowledgeBase) -> None:
    backend = _backend(
        sql_generate=fenced(AVG_SQL),
        semantic_fix=fenced(LIMITED_SQL),
        rule_apply=fenced(FETCH_SQL),
        distill=DISTILL_REPLY,
    )
    result = _run(oracle_task, backend, seeded_kb)

    assert result.passed
    assert result.trajectory.stages() == ["init", "semantic_fix", "semantic_fix"]
    broken, repaired = result.trajectory.steps[1:]
    assert not broken.outcome.ok
    assert repaired.applied_rule is not None
    assert result.sql == _oracle(FETCH_SQL)


def test_syntactic_budget_exhausted(oracle_task: TranslationTask) -> None:
    backend = _backend(sql_generate=fenced(LIMITED_SQL), deep_diagnose=lambda req: fenced(LIMITED_SQL))
    result = _run(oracle_task, backend, None, debug=DebugConfig(max_syntax_iters=2))

    assert not result.passed
    assert result.failure is not None
    assert result.trajectory.stages() == ["init", "deep_fix", "deep_fix"]
    assert result.sql == _oracle(LIMITED_SQL)
    assert result.events == []


def test_semantic_budget_exhausted(oracle_task: TranslationTask, seeded_kb: KnowledgeBase) -> None:
    backend = _backend(sql_generate=fenced(AVG_SQL), semantic_fix=lambda req: fenced(AVG_SQL))
    result = _run(oracle_task, backend, seeded_kb)

    assert not result.passed
    assert result.failure is not None
    assert result.trajectory.stages() == ["init", "semantic_fix", "semantic_fix", "semantic_fix"]
    assert result.sql == _oracle(AVG_SQL)
    assert result.trajectory.final is None
    assert result.events == []


def test_direct_generation_without_planning(oracle_task: TranslationTask, seeded_kb: KnowledgeBase) -> None:
    backend = ScriptedBackend({"sql_generate_direct": fenced(GOLD_SQL)})
    result = _run(oracle_task, backend, seeded_kb, use_planning=False)

    assert result.passed
    assert result.plan is None
    assert result.audit is None
    assert result.trajectory.stages() == ["init"]
    assert backend.prompts("plan_build") == []


def test_without_correction(oracle_task: TranslationTask, seeded_kb: KnowledgeBase) -> None:
    backend = _backend(sql_generate=fenced(AVG_SQL))
    result = _run(oracle_task, backend, seeded_kb, use_correction=False)

    assert not result.passed
    assert result.trajectory.stages() == ["init"]
    assert result.audit is not None
    assert result.audit.failed() == ["computation"]
    assert result.sql == _oracle(AVG_SQL)


def test_executor_must_match_dialect(oracle_task: TranslationTask) -> None:
    deps = PipelineDeps(llm=ScriptedBackend(), kb=None, executor=SimulatedExecutor(DialectId.SQLITE))
    with pytest.raises(PreconditionError):
        run_pipeline(oracle_task, deps)


def test_recovery_exhaustion_carries_trajectory(shop_schema: SchemaCatalog) -> None:
    plan = build_shop_plan(shop_schema, ORACLE)
    backend = ScriptedBackend({"deep_diagnose": lambda req: fenced(LIMITED_SQL)})
    with pytest.raises(RecoveryExhausted) as info:
        syntactic_recovery(_oracle(LIMITED_SQL), plan, SimulatedExecutor(ORACLE), None, backend, DebugConfig(max_syntax_iters=1))
    assert info.value.trajectory.stages() == ["init", "deep_fix"]


def test_trajectory_stage_order() -> None:
    ok = ExecutionOutcome.success()
    sql = _oracle(GOLD_SQL)
    traj = RepairTrajectory()
    with pytest.raises(PreconditionError):
        traj.record(RepairStep("rule_fix", sql, ok))
    traj.record(RepairStep("init", sql, ok))
    traj.record(RepairStep("deep_fix", sql, ok))
    traj.record(RepairStep("rule_fix", sql, ok))
    traj.record(RepairStep("semantic_fix", sql, ok))
    with pytest.raises(PreconditionError):
        traj.record(RepairStep("deep_fix", sql, ok))
    with pytest.raises(PreconditionError):
        traj.record(RepairStep("init", sql, ok))
    assert traj.stages() == ["init", "deep_fix", "rule_fix", "semantic_fix"]


def test_trajectory_dump(oracle_task: TranslationTask, seeded_kb: KnowledgeBase, tmp_path: Path) -> None:
    backend = _backend(sql_generate=fenced(LIMITED_SQL), rule_apply=fenced(FETCH_SQL), distill=DISTILL_REPLY)
    result = _run(oracle_task, backend, seeded_kb)

    plain = dump_trajectory(result.trajectory, oracle_task, tmp_path / "a")
    again = dump_trajectory(result.trajectory, oracle_task, tmp_path / "b")
    assert plain.name == f"{oracle_task.task_hash()}.json"
    assert plain.read_bytes() == again.read_bytes()

    document = json.loads(plain.read_text(encoding="utf-8"))
    assert [step["stage"] for step in document["trajectory"]["steps"]] == ["init", "rule_fix"]
    assert document["trajectory"]["final"] == FETCH_SQL
    assert document["trajectory"]["steps"][0]["outcome"]["trace"]["vendor_code"] == "ORA-00933"

    redacted = json.loads(dump_trajectory(result.trajectory, oracle_task, tmp_path / "c", redact=True).read_text("utf-8"))
    exchanges = redacted["trajectory"]["exchanges"]
    assert exchanges
    assert all(ex["prompt"].startswith("sha256:") and ex["reply"].startswith("sha256:") for ex in exchanges)
    assert all(PLAN_REPLY not in ex["reply"] for ex in exchanges)


def test_distill_requires_verified_fix(shop_plan: DialectAwarePlan) -> None:
    traj = RepairTrajectory()
    traj.record(RepairStep("init", SqlText(GOLD_SQL, DialectId.POSTGRESQL), ExecutionOutcome.success()))
    with pytest.raises(PreconditionError):
        distill_primitive(traj, ScriptedBackend())
    traj.final = traj.steps[0].sql
    with pytest.raises(PreconditionError):
        distill_primitive(traj, ScriptedBackend())


def test_template_identifiers(shop_schema: SchemaCatalog) -> None:
    assert template_identifiers("SUM over orders.amount named total", shop_schema) == f"SUM over {ID}.{ID} named total"
    assert template_identifiers("SUM over orders.amount", None) == "SUM over orders.amount"
