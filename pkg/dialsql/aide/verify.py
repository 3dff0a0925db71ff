"""Semantic verification: audit, contrastive rectification, re-check executability."""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import TYPE_CHECKING, Callable

from dialsql.aide.generate import sql_parser
from dialsql.aide.recovery import RuleLookup, recover_within
from dialsql.aide.trajectory import RepairStep
from dialsql.audit.audit import audit
from dialsql.core.errors import GenerationFormatError, PreconditionError, VerificationExhausted
from dialsql.llm.gateway import ask

if TYPE_CHECKING:
    from dialsql.aide.recovery import DebugConfig
    from dialsql.aide.trajectory import RepairTrajectory
    from dialsql.audit.audit import AuditReport
    from dialsql.core.model import SqlText
    from dialsql.dialects.simulate import Executor
    from dialsql.llm.gateway import ChatBackend
    from dialsql.planner.model import DialectAwarePlan

logger = logging.getLogger(__name__)

Auditor = Callable[["SqlText", "DialectAwarePlan"], "AuditReport"]


def default_auditor(llm: ChatBackend | None = None, deterministic: bool = True) -> Auditor:
    def run(sql: SqlText, plan: DialectAwarePlan) -> AuditReport:
        return audit(sql, plan, llm=llm, deterministic=deterministic)

    return run


def semantic_fix(sql: SqlText, report: AuditReport, plan: DialectAwarePlan, llm: ChatBackend) -> SqlText:
    return ask(
        llm,
        "semantic_fix",
        {"dialect": sql.dialect.value, "sql": sql.text, "report": report.to_json(), "plan": plan.render()},
        sql_parser(sql.dialect),
        error_cls=GenerationFormatError,
    )


def verify_semantics(
    q_exec: SqlText,
    plan: DialectAwarePlan,
    auditor: Auditor,
    llm: ChatBackend,
    cfg: DebugConfig,
    *,
    executor: Executor,
    trajectory: RepairTrajectory,
    rules: RuleLookup | None = None,
) -> SqlText:
    """Audit the executable query and rectify it until every invariant holds.

    Each rectification is executed before it is audited again; one that no
    longer runs gets a single repair attempt, and the round counts against
    `cfg.max_semantic_iters` either way.

    Raises
    ------
    VerificationExhausted
        When the semantic budget is spent without a passing audit.

    """
    last = trajectory.last
    if last is None or last.sql != q_exec or not last.outcome.ok:
        msg = "verify_semantics needs a trajectory ending with the executable query."
        raise PreconditionError(msg)
    rules = rules or RuleLookup(kb=None)

    current = q_exec
    report = auditor(current, plan)
    trajectory.steps[-1] = replace(last, audit=report)
    used = 0
    while not report.passed:
        if used >= cfg.max_semantic_iters:
            msg = f"Audit still failing after {used} semantic fix(es): {'; '.join(report.details)}"
            raise VerificationExhausted(msg, trajectory)
        used += 1
        candidate = semantic_fix(current, report, plan, llm)
        step = RepairStep("semantic_fix", candidate, executor.execute(candidate))
        if not step.outcome.ok:
            logger.info("Semantic fix broke executability; attempting one repair")
            trajectory.record(step)
            step = recover_within(step, plan, executor, llm, rules, stage="semantic_fix")
            if not step.outcome.ok:
                trajectory.record(step)
                continue
        new_report = auditor(step.sql, plan)
        trajectory.record(replace(step, audit=new_report))
        current, report = step.sql, new_report

    trajectory.finalize()
    logger.info("Audit passed after %d semantic fix(es)", used)
    return current
