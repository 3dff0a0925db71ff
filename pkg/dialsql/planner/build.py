"""Natural-language logical plan construction from a translation task."""

from __future__ import annotations

import logging
import re
from typing import TYPE_CHECKING

from dialsql.core.errors import BlacklistViolation, InvalidTask, PlanFormatError
from dialsql.core.schema import validate_task
from dialsql.llm.gateway import ReplyFormatError, ask
from dialsql.planner.model import LogicalPlan, MacroOperator, MacroOperatorKind, OperatorRef

if TYPE_CHECKING:
    from dialsql.core.model import SchemaCatalog, TranslationTask
    from dialsql.llm.gateway import ChatBackend

logger = logging.getLogger(__name__)

BLACKLIST_KEYWORDS = ("SELECT", "FROM", "WHERE", "GROUP", "JOIN", "ORDER", "HAVING", "LIMIT")
# Function names that may not appear in call syntax inside a description.
BLACKLIST_FUNCTIONS = frozenset(
    {
        "SUM", "AVG", "COUNT", "MIN", "MAX", "CAST", "CONVERT", "CONCAT", "SUBSTR", "SUBSTRING",
        "EXTRACT", "LISTAGG", "GROUP_CONCAT", "STRING_AGG", "COALESCE", "NVL", "IFNULL", "ISNULL",
        "ROUND", "DATE", "YEAR", "MONTH", "TO_DATE", "TO_CHAR", "TO_NUMBER", "DATEDIFF",
        "TIMESTAMPDIFF", "DATE_TRUNC", "DATE_PART", "DATEPART", "STRFTIME", "REPLACE", "TRIM",
        "UPPER", "LOWER", "LENGTH", "ROW_NUMBER", "RANK", "DENSE_RANK", "REGEXP_REPLACE", "AGE",
    },
)  # fmt: skip

_KEYWORD_RE = re.compile(r"\b(" + "|".join(BLACKLIST_KEYWORDS) + r")\b", re.IGNORECASE)
_CALL_RE = re.compile(r"\b([A-Za-z_][A-Za-z0-9_]*)\(")
_LINE_RE = re.compile(r"^\s*\[(\d+)\]\s*([A-Za-z]+)\s*\|\s*(.*?)\s*(?:\|\s*(.*?)\s*)?$")
_REF_RE = re.compile(r"\b([A-Za-z_][A-Za-z0-9_]*)\.([A-Za-z_][A-Za-z0-9_]*)\b(?:\s*\(([^)]*)\))?")

# Execution phases; AUX inherits the phase of its predecessor.
PHASE_SOURCE = 0
PHASE_ROW = 1
PHASE_AGGREGATE = 2
PHASE_POST_AGGREGATE = 3
PHASE_ORGANIZE = 4


def blacklist_hits(description: str) -> list[str]:
    """SQL keywords and function-call fragments found in a description."""
    hits = [m.group(1).upper() for m in _KEYWORD_RE.finditer(description)]
    hits += [f"{m.group(1).upper()}(" for m in _CALL_RE.finditer(description) if m.group(1).upper() in BLACKLIST_FUNCTIONS]
    return hits


def check_description(description: str) -> None:
    """Raise a retryable format error when a description contains SQL syntax."""
    hits = blacklist_hits(description)
    if hits:
        msg = f"description contains SQL syntax {sorted(set(hits))}: {description!r}"
        raise ReplyFormatError(msg, final_error=BlacklistViolation)


def resolve_refs(text: str, schema: SchemaCatalog) -> list[OperatorRef]:
    """Every ``table.column`` mention in `text` that resolves in `schema`, in order, deduplicated."""
    refs: list[OperatorRef] = []
    for match in _REF_RE.finditer(text):
        tbl = schema.table(match.group(1))
        col = tbl.column(match.group(2)) if tbl is not None else None
        if tbl is None or col is None:
            continue
        ref = OperatorRef(table=tbl.name, column=col.name, physical_type=col.physical_type)
        if ref not in refs:
            refs.append(ref)
    return refs


def annotate(description: str, refs: list[OperatorRef]) -> str:
    """Append the physical type to each unannotated ref mention."""
    for ref in refs:
        pattern = re.compile(rf"\b{re.escape(ref.table)}\.{re.escape(ref.column)}\b(?!\s*\()", re.IGNORECASE)
        description = pattern.sub(ref.label, description)
    return description


def parse_plan_reply(text: str, schema: SchemaCatalog) -> list[MacroOperator]:
    """Parse ``[k] KIND | description | refs`` lines into operators."""
    operators: list[MacroOperator] = []
    for raw in text.splitlines():
        if not raw.strip():
            continue
        match = _LINE_RE.match(raw)
        if match is None:
            continue
        _, kind_text, description, refs_text = match.groups()
        try:
            kind = MacroOperatorKind(kind_text.lower())
        except ValueError as exc:
            msg = f"unknown operator kind {kind_text!r}"
            raise ReplyFormatError(msg) from exc
        if not description:
            msg = f"operator line without description: {raw!r}"
            raise ReplyFormatError(msg)
        check_description(description)

        listed = [part.strip() for part in (refs_text or "").split(",") if part.strip()]
        for item in listed:
            if not resolve_refs(item, schema):
                msg = f"reference {item!r} does not resolve in the schema"
                raise ReplyFormatError(msg)
        refs = resolve_refs(", ".join(listed), schema)
        refs += [ref for ref in resolve_refs(description, schema) if ref not in refs]
        operators.append(MacroOperator(kind=kind, description=annotate(description, refs), refs=tuple(refs)))

    if not operators:
        msg = "no '[k] KIND | description | refs' lines found"
        raise ReplyFormatError(msg)
    return operators


def _phases(operators: list[MacroOperator]) -> list[int]:
    phases: list[int] = []
    seen_aggregate = False
    for op in operators:
        if op.kind == MacroOperatorKind.SRC:
            phase = PHASE_SOURCE
        elif op.kind in {MacroOperatorKind.FLT, MacroOperatorKind.CAL}:
            phase = PHASE_POST_AGGREGATE if seen_aggregate else PHASE_ROW
        elif op.kind == MacroOperatorKind.AGG:
            phase = PHASE_AGGREGATE
            seen_aggregate = True
        elif op.kind == MacroOperatorKind.ORG:
            phase = PHASE_ORGANIZE
        else:
            phase = phases[-1] if phases else PHASE_SOURCE
        phases.append(phase)
    return phases


def order_operators(operators: list[MacroOperator]) -> LogicalPlan:
    """Stably reorder operators into execution phases and renumber them."""
    phases = _phases(operators)
    ranked = sorted(range(len(operators)), key=lambda idx: phases[idx])
    if ranked != list(range(len(operators))):
        logger.info("Reordered plan operators into execution order")
    return LogicalPlan.of([operators[idx] for idx in ranked])


def validate_order(plan: LogicalPlan) -> list[str]:
    """Ordering violations of `plan`; empty when it follows execution order."""
    violations: list[str] = []
    seen_non_source = False
    seen_org = False
    for op in plan.operators:
        if op.kind == MacroOperatorKind.SRC and seen_non_source:
            violations.append(f"src operator {op.order_index} follows a non-src operator")
        if seen_org and op.kind not in {MacroOperatorKind.ORG, MacroOperatorKind.AUX}:
            violations.append(f"{op.kind.value} operator {op.order_index} follows an org operator")
        if op.kind not in {MacroOperatorKind.SRC, MacroOperatorKind.AUX}:
            seen_non_source = True
        if op.kind == MacroOperatorKind.ORG:
            seen_org = True
    return violations


def build_logical_plan(task: TranslationTask, llm: ChatBackend) -> LogicalPlan:
    """Decompose the question into a dialect-agnostic macro-operator chain.

    Parameters
    ----------
    task:
        The translation task; must be valid.
    llm:
        Chat backend answering the ``plan_build`` prompt.

    Returns
    -------
    LogicalPlan
        Operators in execution order with schema refs annotated by type.

    """
    violations = validate_task(task)
    if violations:
        raise InvalidTask(violations)

    gold = ", ".join(f"{table}.{column}" for table, column in task.gold_elements) or "(none given)"
    operators = ask(
        llm,
        "plan_build",
        {"question": task.question, "schema": task.schema.describe(), "gold_elements": gold},
        lambda text: parse_plan_reply(text, task.schema),
        error_cls=PlanFormatError,
    )
    plan = order_operators(operators)
    logger.info("Built plan with %d operators", len(plan))
    return plan
