"""Audit a candidate query against a dialect-aware plan on four invariants."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Literal

from dialsql.audit.intent import FilterIntent, PlanIntent, read_plan
from dialsql.audit.trace import FLIPPED, OperatorTrace, Predicate, derive_trace, parse_sql
from dialsql.core.errors import DialError
from dialsql.llm.gateway import ReplyFormatError, ask

if TYPE_CHECKING:
    from dialsql.core.model import SqlText
    from dialsql.llm.gateway import ChatBackend
    from dialsql.planner.model import DialectAwarePlan, MacroOperator, OperatorRef

logger = logging.getLogger(__name__)

INVARIANTS = ("topology", "constraints", "computation", "projection")

Invariant = Literal["topology", "constraints", "computation", "projection"]


@dataclass(frozen=True, slots=True)
class Verdict:
    passed: bool
    details: tuple[str, ...] = ()

    @property
    def label(self) -> str:
        return "pass" if self.passed else "fail"


@dataclass(frozen=True, slots=True)
class AuditReport:
    """Per-invariant verdicts; `passed` is their conjunction."""

    verdicts: dict[str, Verdict] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts[name].passed for name in INVARIANTS)

    @property
    def details(self) -> list[str]:
        return [f"{name}: {detail}" for name in INVARIANTS for detail in self.verdicts[name].details]

    def failed(self) -> list[str]:
        return [name for name in INVARIANTS if not self.verdicts[name].passed]

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdicts": {name: self.verdicts[name].label for name in INVARIANTS},
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> AuditReport:
        details: dict[str, list[str]] = {name: [] for name in INVARIANTS}
        for line in document.get("details", []):
            name, _, detail = line.partition(": ")
            details.setdefault(name, []).append(detail)
        return cls(
            verdicts={
                name: Verdict(document["verdicts"][name] == "pass", tuple(details[name])) for name in INVARIANTS
            },
        )


def _verdict(problems: list[str]) -> Verdict:
    return Verdict(passed=not problems, details=tuple(problems))


def check_topology(intent: PlanIntent, trace: OperatorTrace) -> Verdict:
    if trace.unmodeled:
        return _verdict([f"unmodeled construct {kind}" for kind in trace.unmodeled])
    problems: list[str] = []
    planned = set(intent.tables)
    problems += [f"missing table {name}" for name in sorted(planned - trace.tables)]
    problems += [f"extra table {name}" for name in sorted(trace.tables - planned)]
    for left, right in intent.edges:
        pair = frozenset({left.table.lower(), right.table.lower()})
        joins = [edge for edge in trace.joins if edge.tables == pair]
        if not joins:
            problems.append(f"missing join {left.table.lower()} ~ {right.table.lower()}")
            continue
        key = tuple(sorted((left.column.lower(), right.column.lower())))
        if not any(key in edge.keys for edge in joins):
            problems.append(f"join key mismatch {left.key.lower()} = {right.key.lower()}")
    return _verdict(problems)


def _filter_problem(wanted: FilterIntent, available: frozenset[Predicate]) -> str | None:
    predicate = wanted.predicate
    if predicate in available:
        return None
    for found in available:
        if found.column == predicate.column and found.value == predicate.value:
            return f"comparator flip on {predicate.column}: {predicate.comparator} became {found.comparator}"
    return f"missing predicate ({predicate.describe()})"


def _adjudicate(op: MacroOperator, sql: SqlText, llm: ChatBackend) -> str | None:
    """Ask the model whether a free-text intent is realized; returns the failure reason or None."""

    def parse(text: str) -> str | None:
        head = text.strip().splitlines()[0].strip() if text.strip() else ""
        if head.upper().startswith("PASS"):
            return None
        if head.upper().startswith("FAIL"):
            return head[4:].lstrip(" :") or "not realized"
        msg = "reply must start with PASS or FAIL"
        raise ReplyFormatError(msg)

    return ask(
        llm,
        "audit_adjudicate",
        {"intent": f"{op.kind.value.upper()} | {op.description}", "sql": sql.text},
        parse,
        error_cls=DialError,
    )


def _free_text_problems(
    ops: list[MacroOperator],
    trace: OperatorTrace,
    sql: SqlText,
    llm: ChatBackend | None,
    deterministic: bool,
) -> list[str]:
    problems: list[str] = []
    for op in ops:
        if llm is not None and not deterministic:
            reason = _adjudicate(op, sql, llm)
            if reason is not None:
                problems.append(f"operator {op.order_index} not realized: {reason}")
            continue
        missing = sorted({ref.column.lower() for ref in op.refs} - trace.columns)
        if missing:
            problems.append(f"operator {op.order_index} not realized: no use of {', '.join(missing)}")
    return problems


def check_constraints(
    intent: PlanIntent,
    trace: OperatorTrace,
    sql: SqlText,
    llm: ChatBackend | None = None,
    deterministic: bool = True,
) -> Verdict:
    available = trace.predicates | trace.post_predicates
    problems = [p for p in (_filter_problem(f, available) for f in intent.filters) if p is not None]
    free = [op for op in intent.free_text if op.kind == "flt"]
    problems += _free_text_problems(free, trace, sql, llm, deterministic)
    return _verdict(problems)


def check_computation(
    intent: PlanIntent,
    trace: OperatorTrace,
    sql: SqlText,
    llm: ChatBackend | None = None,
    deterministic: bool = True,
) -> Verdict:
    problems: list[str] = []
    for wanted in intent.aggregates:
        if wanted.function == "COUNT" and any(fn == "COUNT" for fn, _ in trace.aggregates):
            continue
        if (wanted.function, wanted.column) in trace.aggregates:
            continue
        substitutes = sorted(fn for fn, column in trace.aggregates if column == wanted.column)
        if substitutes:
            problems.append(f"{wanted.function}→{substitutes[0]} on {wanted.column}")
        else:
            problems.append(f"missing aggregate {wanted.function}({wanted.column})")

    if intent.has_aggregation:
        problems += [f"missing group dimension {d}" for d in sorted(intent.group_dims - trace.group_dims)]
        problems += [f"extra group dimension {d}" for d in sorted(trace.group_dims - intent.group_dims)]
    elif trace.group_dims:
        problems.append(f"unexpected grouping by {', '.join(sorted(trace.group_dims))}")
    elif trace.aggregates and not any(op.kind == "cal" for op in intent.free_text):
        problems += [f"unexpected aggregate {fn}({column})" for fn, column in sorted(trace.aggregates)]

    free = [op for op in intent.free_text if op.kind in {"cal", "agg"}]
    problems += _free_text_problems(free, trace, sql, llm, deterministic)
    return _verdict(problems)


def check_projection(intent: PlanIntent, trace: OperatorTrace) -> Verdict:
    if not intent.has_organization:
        return _verdict([])
    problems: list[str] = []
    problems += [f"missing output column {c}" for c in sorted(intent.projected_columns - trace.projected_columns)]
    problems += [f"extra output column {c}" for c in sorted(trace.projected_columns - intent.projected_columns)]
    bound = dict(trace.bindings)
    for alias in intent.aliases:
        if alias not in bound:
            problems.append(f"missing alias {alias}")
            continue
        problem = _binding_problem(alias, intent.alias_owner.get(alias), bound[alias])
        if problem is not None:
            problems.append(problem)
    return _verdict(problems)


def _binding_problem(alias: str, owner: OperatorRef | None, column: str | None) -> str | None:
    if owner is None:
        return None if column is None else f"alias {alias} names column {column}, expected a computed value"
    wanted = owner.key.lower() if column is not None and "." in column else owner.column.lower()
    if column == wanted:
        return None
    return f"alias {alias} names {column or 'a computed value'}, expected {owner.key.lower()}"


def audit(
    q_exec: SqlText,
    plan: DialectAwarePlan,
    llm: ChatBackend | None = None,
    deterministic: bool = True,
) -> AuditReport:
    """Check a query against the plan's structural, filtering, computational and output intents.

    Parameters
    ----------
    q_exec:
        Candidate query; must parse under its dialect.
    plan:
        The dialect-aware plan the query should realize.
    llm:
        Optional adjudicator for intents that cannot be read structurally.
    deterministic:
        When set, free-text intents are matched by column use only and `llm` is never called.

    Returns
    -------
    AuditReport
        One verdict per invariant, failures naming the missing or extra element.

    """
    trace = derive_trace(parse_sql(q_exec))
    intent = read_plan(plan.base.operators)
    report = AuditReport(
        verdicts={
            "topology": check_topology(intent, trace),
            "constraints": check_constraints(intent, trace, q_exec, llm, deterministic),
            "computation": check_computation(intent, trace, q_exec, llm, deterministic),
            "projection": check_projection(intent, trace),
        },
    )
    if not report.passed:
        logger.info("Audit failed on %s: %s", ", ".join(report.failed()), "; ".join(report.details))
    return report
