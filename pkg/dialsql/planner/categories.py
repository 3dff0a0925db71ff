"""Functional category mapping of sensitive operators onto the canonical reference."""

from __future__ import annotations

import logging
import re
from typing import TYPE_CHECKING

import numpy as np

from dialsql.core.errors import PlanFormatError, UnknownCategory
from dialsql.llm.embed import default_embedder
from dialsql.llm.gateway import ReplyFormatError, ask
from dialsql.planner.model import DialectAwarePlan, StandardizedOperator

if TYPE_CHECKING:
    from dialsql.core.model import DialectId
    from dialsql.kb.reference import CanonicalCategory, CanonicalReference
    from dialsql.llm.embed import EmbeddingProvider
    from dialsql.llm.gateway import ChatBackend
    from dialsql.planner.model import LogicalPlan, MacroOperator

logger = logging.getLogger(__name__)

# Clauses carrying business justification rather than the operation itself.
JUSTIFICATION_CUES = (" because ", " so that ", " in order to ", " since ", " to ensure ", " which lets ")


def strip_justification(description: str) -> str:
    lowered = description.lower()
    cut = min((lowered.find(cue) for cue in JUSTIFICATION_CUES if cue in lowered), default=len(description))
    return description[:cut].strip().rstrip(",;.").strip()


def _parse_mapping(text: str, csr: CanonicalReference) -> tuple[CanonicalCategory, str]:
    for line in text.splitlines():
        if "|" not in line:
            continue
        label, _, description = line.partition("|")
        description = strip_justification(description.strip())
        if not description:
            msg = f"mapping line without standardized description: {line!r}"
            raise ReplyFormatError(msg)
        category = csr.resolve(label)
        if category is None:
            msg = f"category {label.strip()!r} is not in the canonical reference"
            raise ReplyFormatError(msg, final_error=UnknownCategory)
        return category, description
    msg = "no 'category | standard description' line found"
    raise ReplyFormatError(msg)


def nearest_category(text: str, csr: CanonicalReference, embedder: EmbeddingProvider) -> CanonicalCategory:
    """Category whose profile embedding is closest to `text`; first listed wins ties."""
    query = embedder.embed(text)
    scores = np.array([float(np.dot(query, embedder.embed(cat.profile_text))) for cat in csr.categories])
    return csr.categories[int(np.argmax(scores))]


def _categories_prompt(csr: CanonicalReference) -> str:
    return "\n".join(f"- {cat.id}: {cat.profile_text}" for cat in csr.categories)


def _standardize(
    op: MacroOperator,
    csr: CanonicalReference,
    llm: ChatBackend,
    dialect: DialectId,
    embedder: EmbeddingProvider,
) -> StandardizedOperator:
    try:
        category, description = ask(
            llm,
            "category_map",
            {"categories": _categories_prompt(csr), "operator": op.description, "dialect": dialect.value},
            lambda text: _parse_mapping(text, csr),
            error_cls=PlanFormatError,
        )
    except UnknownCategory:
        category = nearest_category(op.description, csr, embedder)
        description = strip_justification(op.description)
        logger.warning("Operator %d fell back to nearest category %s", op.order_index, category.id)
    return StandardizedOperator(category=category.id, standard_description=description, source_index=op.order_index)


def map_functional_categories(
    plan: LogicalPlan,
    csr: CanonicalReference,
    llm: ChatBackend,
    dialect: DialectId,
    embedder: EmbeddingProvider | None = None,
) -> DialectAwarePlan:
    """Give each sensitive operator one canonical category and a standardized description.

    Parameters
    ----------
    plan:
        A labeled plan.
    csr:
        Canonical reference the categories come from.
    llm:
        Chat backend answering ``category_map``.
    dialect:
        Target dialect, recorded on the resulting plan.
    embedder:
        Used for the nearest-category fallback.

    Returns
    -------
    DialectAwarePlan
        One standardized operator per sensitive operator, in plan order.

    """
    embedder = embedder or default_embedder()
    enriched = tuple(_standardize(op, csr, llm, dialect, embedder) for op in plan.sensitive_operators())
    return DialectAwarePlan(base=plan, enriched=enriched, dialect=dialect)
