"""Execution-driven syntactic recovery: rule retrieval first, deep diagnosis as escalation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

from dialsql.aide.generate import sql_parser
from dialsql.aide.trajectory import RepairStep, RepairTrajectory
from dialsql.core.errors import GenerationFormatError, PreconditionError, RecoveryExhausted
from dialsql.dialects.signature import normalize_signature
from dialsql.kb.retrieve import DEFAULT_TAU_RULE, retrieve_rules
from dialsql.llm.gateway import ask

if TYPE_CHECKING:
    from dialsql.aide.trajectory import Stage
    from dialsql.core.model import ErrorTrace, ExecutionOutcome, SqlText
    from dialsql.dialects.simulate import Executor
    from dialsql.kb.model import ConstraintEntry
    from dialsql.kb.store import KnowledgeBase
    from dialsql.llm.embed import EmbeddingProvider
    from dialsql.llm.gateway import ChatBackend
    from dialsql.planner.model import DialectAwarePlan

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class DebugConfig:
    max_syntax_iters: int = 5
    max_semantic_iters: int = 3
    deterministic_mode: bool = True

    def __post_init__(self) -> None:
        if self.max_syntax_iters < 1 or self.max_semantic_iters < 1:
            msg = "Iteration budgets must be at least 1."
            raise PreconditionError(msg)


@dataclass(frozen=True, slots=True)
class RuleLookup:
    kb: KnowledgeBase | None
    tau_rule: float = DEFAULT_TAU_RULE
    embedder: EmbeddingProvider | None = None

    def find(self, trace: ErrorTrace, sql: SqlText) -> ConstraintEntry | None:
        if self.kb is None:
            return None
        signature = normalize_signature(trace, sql.dialect)
        segment = trace.failing_segment.text if trace.failing_segment else ""
        return retrieve_rules(self.kb, signature, segment, sql.dialect, tau_rule=self.tau_rule, embedder=self.embedder)


def describe_error(trace: ErrorTrace) -> str:
    parts = [trace.message]
    if trace.failing_segment is not None:
        parts.append(f"near: {trace.failing_segment.text}")
    return "\n".join(parts)


def _render_cases(rule: ConstraintEntry) -> str:
    if not rule.cases:
        return "(none)"
    return "\n".join(f"- wrong: {case.erroneous}\n  right: {case.correct}" for case in rule.cases)


def apply_rule(sql: SqlText, trace: ErrorTrace, rule: ConstraintEntry, plan: DialectAwarePlan, llm: ChatBackend) -> SqlText:
    return ask(
        llm,
        "rule_apply",
        {
            "dialect": sql.dialect.value,
            "sql": sql.text,
            "error": describe_error(trace),
            "rule": rule.rule_spec,
            "cases": _render_cases(rule),
            "plan": plan.render(),
        },
        sql_parser(sql.dialect),
        error_cls=GenerationFormatError,
    )


def deep_diagnose(sql: SqlText, trace: ErrorTrace, plan: DialectAwarePlan, llm: ChatBackend) -> SqlText:
    """Free diagnosis with the flawed query, its newest error and the plan as anchor."""
    return ask(
        llm,
        "deep_diagnose",
        {"dialect": sql.dialect.value, "sql": sql.text, "error": describe_error(trace), "plan": plan.render()},
        sql_parser(sql.dialect),
        error_cls=GenerationFormatError,
    )


def repair_once(
    sql: SqlText,
    outcome: ExecutionOutcome,
    plan: DialectAwarePlan,
    executor: Executor,
    llm: ChatBackend,
    rules: RuleLookup,
    escalate: bool = False,
) -> tuple[RepairStep, bool]:
    """One fix attempt on a failing query.

    Returns the step (stage ``rule_fix`` or ``deep_fix``) and whether the next
    attempt must escalate to deep diagnosis.
    """
    if outcome.trace is None:
        msg = "repair_once needs a failing outcome."
        raise PreconditionError(msg)
    rule = None if escalate else rules.find(outcome.trace, sql)
    if rule is not None:
        revised = apply_rule(sql, outcome.trace, rule, plan, llm)
        result = executor.execute(revised)
        logger.info("rule_fix with %s: %s", rule.id, "ok" if result.ok else "still failing")
        return RepairStep("rule_fix", revised, result, applied_rule=rule.id), not result.ok
    revised = deep_diagnose(sql, outcome.trace, plan, llm)
    result = executor.execute(revised)
    logger.info("deep_fix: %s", "ok" if result.ok else "still failing")
    return RepairStep("deep_fix", revised, result), False


def _restaged(step: RepairStep, stage: Stage | None) -> RepairStep:
    if stage is None:
        return step
    return RepairStep(stage, step.sql, step.outcome, step.audit, step.applied_rule)


def syntactic_recovery(
    q: SqlText,
    plan: DialectAwarePlan,
    executor: Executor,
    kb: KnowledgeBase | None,
    llm: ChatBackend,
    cfg: DebugConfig,
    *,
    trajectory: RepairTrajectory | None = None,
    tau_rule: float = DEFAULT_TAU_RULE,
    embedder: EmbeddingProvider | None = None,
) -> SqlText:
    """Execute and repair until the query runs or the syntactic budget is spent.

    Parameters
    ----------
    q:
        The initial query; recorded as the ``init`` step of an empty trajectory.
    plan:
        Dialect-aware plan, the structural anchor of every repair prompt.
    executor:
        Executor bound to the plan's dialect.
    kb:
        Knowledge base holding the constraint repository, or ``None`` to go straight to diagnosis.
    llm:
        Chat backend answering ``rule_apply`` and ``deep_diagnose``.
    cfg:
        Iteration budgets.
    trajectory:
        Trajectory to append to; a fresh one when omitted.
    tau_rule:
        Fuzzy rule-match threshold.
    embedder:
        Embedding provider for fuzzy rule matching.

    Returns
    -------
    SqlText
        A query that executes successfully.

    Raises
    ------
    RecoveryExhausted
        When `cfg.max_syntax_iters` fixes did not produce an executable query.

    """
    if executor.dialect != plan.dialect:
        msg = f"Executor is bound to {executor.dialect.value}, plan targets {plan.dialect.value}."
        raise PreconditionError(msg)
    traj = trajectory if trajectory is not None else RepairTrajectory()
    outcome = executor.execute(q)
    traj.record(RepairStep("init", q, outcome))

    rules = RuleLookup(kb, tau_rule=tau_rule, embedder=embedder)
    current, escalate, used = q, False, 0
    while not outcome.ok:
        if used >= cfg.max_syntax_iters:
            msg = f"No executable query after {used} syntactic fix(es)."
            raise RecoveryExhausted(msg, traj)
        used += 1
        step, escalate = repair_once(current, outcome, plan, executor, llm, rules, escalate)
        traj.record(step)
        current, outcome = step.sql, step.outcome
    return current


def recover_within(
    step: RepairStep,
    plan: DialectAwarePlan,
    executor: Executor,
    llm: ChatBackend,
    rules: RuleLookup,
    stage: Stage,
) -> RepairStep:
    """A single repair of a failing step, recorded under `stage`."""
    repaired, _ = repair_once(step.sql, step.outcome, plan, executor, llm, rules)
    return _restaged(repaired, stage)
