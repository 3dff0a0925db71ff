"""Implicit-logic mining: materialize calculations hidden by type/intent conflicts."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING

from dialsql.core.errors import PlanFormatError
from dialsql.llm.gateway import ReplyFormatError, ask
from dialsql.planner.build import annotate, check_description
from dialsql.planner.model import LogicalPlan, MacroOperator, MacroOperatorKind

if TYPE_CHECKING:
    from dialsql.core.model import SchemaCatalog
    from dialsql.llm.gateway import ChatBackend
    from dialsql.planner.model import OperatorRef

logger = logging.getLogger(__name__)

TEXTUAL_TYPES = frozenset({"TEXT", "VARCHAR", "CHAR", "STRING", "CLOB", "NVARCHAR", "NCHAR", "VARCHAR2"})
NUMERIC_INTENT = (
    "sum", "total", "average", "avg", "mean", "add up", "greater than", "less than", "more than",
    "at least", "at most", "above", "below", "exceeds", "numeric", "multiply", "divide", "ratio",
)  # fmt: skip
TEMPORAL_INTENT = (
    "year", "month", "day", "date", "before", "after", "earliest", "latest", "most recent", "duration", "interval",
)  # fmt: skip
# Words separating the measured refs from grouping refs.
GROUPING_CUES = (" by ", " per ", " for each ", " grouped ")

_NUMERIC_SAMPLE = re.compile(r"^[+-]?\d+(?:\.\d+)?$")
_DATE_SAMPLE = re.compile(r"\d{4}[-/]\d{1,2}[-/]\d{1,2}|\d{1,2}[-/]\d{1,2}[-/]\d{4}")
_CAL_LINE = re.compile(r"^\s*(?:\[\d+\]\s*)?(?:CAL\s*\|\s*)?(.+?)\s*$", re.IGNORECASE)


@dataclass(frozen=True, slots=True)
class Conflict:
    consumer: int
    ref: OperatorRef
    kind: str  # "numeric" | "temporal"


def base_type(physical_type: str) -> str:
    """``"VARCHAR(20)"`` -> ``"VARCHAR"``; ``"INT[]"`` -> ``"ARRAY"``."""
    cleaned = physical_type.strip().upper()
    if cleaned.endswith("[]"):
        return "ARRAY"
    return re.split(r"[\s(]", cleaned, maxsplit=1)[0]


def _has_phrase(text: str, phrases: tuple[str, ...]) -> bool:
    lowered = f" {text.lower()} "
    return any(re.search(rf"\b{re.escape(phrase)}\b", lowered) for phrase in phrases)


def measured_refs(op: MacroOperator) -> list[OperatorRef]:
    """Refs named before the first grouping cue; all refs when there is none."""
    lowered = op.description.lower()
    cut = min((lowered.find(cue) for cue in GROUPING_CUES if cue in lowered), default=-1)
    if cut < 0:
        return list(op.refs)
    return [ref for ref in op.refs if 0 <= lowered.find(ref.key.lower()) < cut]


def _samples_numeric(samples: tuple[str, ...]) -> bool:
    return bool(samples) and all(_NUMERIC_SAMPLE.match(s.strip()) for s in samples)


def detect_conflicts(plan: LogicalPlan, schema: SchemaCatalog) -> list[Conflict]:
    """Operators whose intent clashes with a referenced column's type or sample shape."""
    conflicts: list[Conflict] = []
    for op in plan.operators:
        if op.kind not in {MacroOperatorKind.AGG, MacroOperatorKind.FLT, MacroOperatorKind.ORG}:
            continue
        refs = measured_refs(op) if op.kind == MacroOperatorKind.AGG else list(op.refs)
        for ref in refs:
            if base_type(ref.physical_type) not in TEXTUAL_TYPES:
                continue
            col = schema.lookup(ref.table, ref.column)
            samples = col.samples if col is not None else ()
            if _has_phrase(op.description, NUMERIC_INTENT) and not _samples_numeric(samples):
                conflicts.append(Conflict(consumer=op.order_index, ref=ref, kind="numeric"))
            elif _has_phrase(op.description, TEMPORAL_INTENT) and any(_DATE_SAMPLE.search(s) for s in samples):
                conflicts.append(Conflict(consumer=op.order_index, ref=ref, kind="temporal"))
    return conflicts


def _already_materialized(operators: list[MacroOperator], position: int, ref: OperatorRef) -> bool:
    if position == 0:
        return False
    previous = operators[position - 1]
    return previous.kind == MacroOperatorKind.CAL and ref in previous.refs


def _parse_cal(text: str) -> str:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        msg = "empty calculation reply"
        raise ReplyFormatError(msg)
    match = _CAL_LINE.match(lines[0])
    description = match.group(1).strip() if match else ""
    if not description:
        msg = f"unusable calculation line {lines[0]!r}"
        raise ReplyFormatError(msg)
    check_description(description)
    return description


def mine_implicit_logic(plan: LogicalPlan, schema: SchemaCatalog, llm: ChatBackend) -> LogicalPlan:
    """Insert a CAL operator before every operator consuming a conflicting column.

    Existing operators are neither removed nor re-described; their relative order is kept.
    """
    operators = list(plan.operators)
    inserted = 0
    for conflict in detect_conflicts(plan, schema):
        position = conflict.consumer + inserted
        if _already_materialized(operators, position, conflict.ref):
            continue
        col = schema.lookup(conflict.ref.table, conflict.ref.column)
        samples = ", ".join(repr(s) for s in (col.samples if col else ()))
        description = ask(
            llm,
            "plan_mine",
            {
                "operator": operators[position].description,
                "column": conflict.ref.label,
                "samples": samples or "(no samples)",
                "conflict": conflict.kind,
            },
            _parse_cal,
            error_cls=PlanFormatError,
        )
        operators.insert(
            position,
            MacroOperator(
                kind=MacroOperatorKind.CAL,
                description=annotate(description, [conflict.ref]),
                refs=(conflict.ref,),
            ),
        )
        inserted += 1
        logger.info("Materialized %s calculation on %s", conflict.kind, conflict.ref.key)
    if not inserted:
        return plan
    return LogicalPlan.of(operators)
