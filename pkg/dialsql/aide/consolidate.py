"""Distillation of a verified repair trajectory into a reusable knowledge primitive."""

from __future__ import annotations

import logging
import re
from typing import TYPE_CHECKING

from dialsql.core.errors import GenerationFormatError, PreconditionError
from dialsql.dialects.signature import ID, normalize_signature
from dialsql.kb.model import KnowledgePrimitive
from dialsql.llm.gateway import ReplyFormatError, ask

if TYPE_CHECKING:
    from dialsql.aide.trajectory import RepairStep, RepairTrajectory
    from dialsql.core.model import SchemaCatalog
    from dialsql.llm.gateway import ChatBackend

logger = logging.getLogger(__name__)

_FIELD = re.compile(r"^\s*(INCORRECT_PATTERN|ROOT_CAUSE)\s*:\s*(.*)$")


def _first_failure(trajectory: RepairTrajectory) -> RepairStep:
    for step in trajectory.steps:
        if not step.outcome.ok or (step.audit is not None and not step.audit.passed):
            return step
    msg = "Trajectory holds no failing step."
    raise PreconditionError(msg)


def _failure_text(step: RepairStep) -> str:
    if step.outcome.trace is not None:
        return step.outcome.trace.message
    return "; ".join(step.audit.details) if step.audit is not None else ""


def _parse(text: str) -> tuple[str, str]:
    found: dict[str, str] = {}
    for line in text.splitlines():
        match = _FIELD.match(line)
        if match and match.group(2).strip():
            found.setdefault(match.group(1), match.group(2).strip())
    missing = [name for name in ("INCORRECT_PATTERN", "ROOT_CAUSE") if name not in found]
    if missing:
        msg = f"missing field(s) {', '.join(missing)}"
        raise ReplyFormatError(msg)
    return found["INCORRECT_PATTERN"], found["ROOT_CAUSE"]


def template_identifiers(text: str, schema: SchemaCatalog | None) -> str:
    """Replace the schema's table and column names with the identifier placeholder."""
    if schema is None:
        return text
    names = {table.name for table in schema.tables} | {col.name for table in schema.tables for col in table.columns}
    for name in sorted(names, key=len, reverse=True):
        text = re.sub(rf"(?<![\w⟨]){re.escape(name)}(?![\w⟩])", ID, text, flags=re.IGNORECASE)
    return text


def distill_primitive(
    traj: RepairTrajectory,
    llm: ChatBackend,
    schema: SchemaCatalog | None = None,
) -> KnowledgePrimitive:
    """Turn a verified trajectory into ⟨incorrect pattern, corrective exemplar, root cause⟩.

    The corrective exemplar is the final query verbatim; the pattern and root
    cause are made schema-agnostic by templating the task's identifiers.
    """
    if traj.final is None:
        msg = "Only verified trajectories can be distilled."
        raise PreconditionError(msg)
    if not traj.fix_steps():
        msg = "Trajectory contains no fix step."
        raise PreconditionError(msg)

    failing = _first_failure(traj)
    incorrect, root_cause = ask(
        llm,
        "distill",
        {
            "dialect": traj.final.dialect.value,
            "failing_sql": failing.sql.text,
            "failure": _failure_text(failing),
            "final_sql": traj.final.text,
            "stages": " -> ".join(traj.stages()),
        },
        _parse,
        error_cls=GenerationFormatError,
    )
    signature = None
    if failing.outcome.trace is not None:
        signature = normalize_signature(failing.outcome.trace, traj.final.dialect).key
    primitive = KnowledgePrimitive(
        incorrect_pattern=template_identifiers(incorrect, schema),
        corrective_exemplar=traj.final.text,
        root_cause=template_identifiers(root_cause, schema),
        dialect=traj.final.dialect,
        signature=signature,
        incorrect_exemplar=failing.sql.text,
    )
    logger.info("Distilled primitive from %d fix step(s)", len(traj.fix_steps()))
    return primitive
