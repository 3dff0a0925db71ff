"""One closed-loop translation: plan, generate, recover, verify, consolidate."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from dialsql.aide.consolidate import distill_primitive
from dialsql.aide.generate import generate_direct, generate_initial
from dialsql.aide.recovery import DebugConfig, RuleLookup, syntactic_recovery
from dialsql.aide.trajectory import RepairStep, RepairTrajectory
from dialsql.aide.verify import default_auditor, verify_semantics
from dialsql.core.errors import PreconditionError, RecoveryExhausted, VerificationExhausted
from dialsql.kb.reference import default_reference
from dialsql.kb.retrieve import DEFAULT_TAU_RULE, DEFAULT_TOP_K
from dialsql.kb.routing import ROUTING_THRESHOLD, commit_decision, route_primitive
from dialsql.llm.backends import TranscriptBackend
from dialsql.llm.embed import default_embedder
from dialsql.planner.build import build_logical_plan
from dialsql.planner.categories import map_functional_categories
from dialsql.planner.label import label_operators
from dialsql.planner.mining import mine_implicit_logic
from dialsql.planner.model import DialectAwarePlan, LogicalPlan

if TYPE_CHECKING:
    from dialsql.audit.audit import AuditReport
    from dialsql.core.config import Settings
    from dialsql.core.model import SqlText, TranslationTask
    from dialsql.dialects.simulate import Executor
    from dialsql.kb.model import KnowledgePrimitive
    from dialsql.kb.reference import CanonicalReference
    from dialsql.kb.store import CommitEvent, KnowledgeBase
    from dialsql.llm.embed import EmbeddingProvider
    from dialsql.llm.gateway import ChatBackend
    from dialsql.planner.label import LabelConfig

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class PipelineDeps:
    llm: ChatBackend
    kb: KnowledgeBase | None
    executor: Executor
    embedder: EmbeddingProvider = field(default_factory=default_embedder)
    csr: CanonicalReference = field(default_factory=default_reference)
    label_config: LabelConfig | None = None


@dataclass(frozen=True, slots=True)
class PipelineOptions:
    debug: DebugConfig = field(default_factory=DebugConfig)
    use_planning: bool = True
    use_kb: bool = True
    use_correction: bool = True
    top_k: int = DEFAULT_TOP_K
    tau_rule: float = DEFAULT_TAU_RULE
    routing_threshold: float = ROUTING_THRESHOLD

    @classmethod
    def from_settings(cls, settings: Settings) -> PipelineOptions:
        return cls(
            debug=DebugConfig(
                max_syntax_iters=settings.max_syntax_iters,
                max_semantic_iters=settings.max_semantic_iters,
                deterministic_mode=settings.deterministic,
            ),
            use_planning=settings.use_planning,
            use_kb=settings.use_kb,
            use_correction=settings.use_correction,
            top_k=settings.top_k,
            tau_rule=settings.tau_rule,
            routing_threshold=settings.routing_threshold,
        )


@dataclass(slots=True)
class PipelineResult:
    sql: SqlText | None
    trajectory: RepairTrajectory
    plan: DialectAwarePlan | None = None
    audit: AuditReport | None = None
    events: list[CommitEvent] = field(default_factory=list)
    primitive: KnowledgePrimitive | None = None
    failure: str | None = None

    @property
    def passed(self) -> bool:
        return self.trajectory.final is not None


def plan_task(task: TranslationTask, deps: PipelineDeps, llm: ChatBackend) -> DialectAwarePlan:
    """Build, mine, label and categorize the plan of a task."""
    plan = build_logical_plan(task, llm)
    plan = mine_implicit_logic(plan, task.schema, llm)
    plan = label_operators(plan, task.schema, deps.label_config)
    return map_functional_categories(plan, deps.csr, llm, task.dialect, deps.embedder)


def _best_candidate(trajectory: RepairTrajectory) -> SqlText | None:
    executable = [step for step in trajectory.steps if step.outcome.ok]
    if executable:
        return executable[-1].sql
    return trajectory.current_sql


def _consolidate(
    task: TranslationTask,
    plan: DialectAwarePlan,
    trajectory: RepairTrajectory,
    deps: PipelineDeps,
    options: PipelineOptions,
    llm: ChatBackend,
) -> tuple[KnowledgePrimitive | None, list[CommitEvent]]:
    if deps.kb is None or not options.use_kb or not trajectory.fix_steps():
        return None, []
    primitive = distill_primitive(trajectory, llm, task.schema)
    decision = route_primitive(primitive, plan, deps.embedder, options.routing_threshold, deps.csr)
    event = commit_decision(deps.kb, decision)
    logger.info("Consolidated %s into %s (%s)", event.entry_id, event.repository, event.kind)
    return primitive, [event]


def run_pipeline(
    task: TranslationTask,
    deps: PipelineDeps,
    options: PipelineOptions | None = None,
) -> PipelineResult:
    """Translate one task end to end.

    Parameters
    ----------
    task:
        Question, schema and target dialect.
    deps:
        Chat backend, knowledge base, executor and embedding provider.
    options:
        Budgets and ablation switches.

    Returns
    -------
    PipelineResult
        The final query (or best candidate when a budget ran out), the
        trajectory with every exchange, the last audit, and the commit events.
        The knowledge base is only written after a fully verified run.

    """
    options = options or PipelineOptions()
    if deps.executor.dialect != task.dialect:
        msg = f"Executor is bound to {deps.executor.dialect.value}, task targets {task.dialect.value}."
        raise PreconditionError(msg)
    llm = TranscriptBackend(deps.llm)
    trajectory = RepairTrajectory(exchanges=llm.exchanges)
    kb = deps.kb if options.use_kb else None
    result = PipelineResult(sql=None, trajectory=trajectory)

    if options.use_planning:
        plan = plan_task(task, deps, llm)
        result.plan = plan
        q_init = generate_initial(plan, task.schema, kb, llm, question=task.question, k=options.top_k, embedder=deps.embedder)
    else:
        plan = DialectAwarePlan(base=LogicalPlan(operators=()), enriched=(), dialect=task.dialect)
        q_init = generate_direct(task.question, task.schema, task.dialect, llm)
    auditor = default_auditor(llm, options.debug.deterministic_mode)

    try:
        if options.use_correction:
            q_exec = syntactic_recovery(
                q_init, plan, deps.executor, kb, llm, options.debug,
                trajectory=trajectory, tau_rule=options.tau_rule, embedder=deps.embedder,
            )  # fmt: skip
        else:
            trajectory.record(RepairStep("init", q_init, deps.executor.execute(q_init)))
            q_exec = q_init
        if not options.use_planning:
            # Nothing to audit against: an executable query is the result.
            trajectory.final = q_exec if trajectory.steps[-1].outcome.ok else None
        elif options.use_correction:
            rules = RuleLookup(kb, tau_rule=options.tau_rule, embedder=deps.embedder)
            verify_semantics(q_exec, plan, auditor, llm, options.debug, executor=deps.executor, trajectory=trajectory, rules=rules)
        elif trajectory.steps[-1].outcome.ok:
            step = trajectory.steps[-1]
            trajectory.steps[-1] = RepairStep(step.stage, step.sql, step.outcome, auditor(step.sql, plan))
            trajectory.finalize()
    except (RecoveryExhausted, VerificationExhausted) as exc:
        logger.warning("Budget exhausted for task %s: %s", task.task_hash(), exc)
        result.failure = str(exc)

    result.sql = trajectory.final or _best_candidate(trajectory)
    result.audit = trajectory.last.audit if trajectory.last is not None else None
    if trajectory.final is not None and options.use_planning:
        result.primitive, result.events = _consolidate(task, plan, trajectory, deps, options, llm)
    logger.info("Task %s finished: passed=%s stages=%s", task.task_hash(), result.passed, trajectory.stages())
    return result
