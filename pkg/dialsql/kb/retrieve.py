"""Intent-keyed function retrieval and signature-keyed rule retrieval."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

import numpy as np

from dialsql.core.errors import EmptyRepository, PreconditionError
from dialsql.dialects.signature import matches_pattern
from dialsql.kb.model import INDEX_SEPARATOR, Hit
from dialsql.llm.embed import cosine, default_embedder

if TYPE_CHECKING:
    from dialsql.core.model import DialectId
    from dialsql.dialects.signature import ErrorSignature
    from dialsql.kb.model import ConstraintEntry
    from dialsql.kb.store import KnowledgeBase
    from dialsql.llm.embed import EmbeddingProvider
    from dialsql.planner.model import StandardizedOperator

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 3
DEFAULT_TAU_RULE = 0.5


def function_query_text(op: StandardizedOperator) -> str:
    return f"{op.category}{INDEX_SEPARATOR}{op.standard_description}"


def retrieve_functions(
    kb: KnowledgeBase,
    op: StandardizedOperator,
    dialect: DialectId,
    k: int = DEFAULT_TOP_K,
    embedder: EmbeddingProvider | None = None,
) -> list[Hit]:
    """Top-`k` function entries of `dialect` by cosine similarity to the operator intent.

    Ties are broken by entry id, so the ranking is total and deterministic.
    """
    if k < 1:
        msg = f"k must be at least 1, got {k}."
        raise PreconditionError(msg)
    entries = kb.functions_for(dialect)
    if not entries:
        msg = f"No function entries for {dialect.value}."
        raise EmptyRepository(msg)

    embedder = embedder or default_embedder()
    query = embedder.embed(function_query_text(op))
    matrix = np.array([entry.embedding for entry in entries], dtype=np.float64)
    scores = np.clip(matrix @ query, -1.0, 1.0)
    ranked = sorted(zip(entries, scores.tolist()), key=lambda pair: (-pair[1], pair[0].id))
    return [Hit(entry=entry, score=score) for entry, score in ranked[:k]]


def retrieve_rules(
    kb: KnowledgeBase,
    signature: ErrorSignature,
    segment: str,
    dialect: DialectId,
    tau_rule: float = DEFAULT_TAU_RULE,
    embedder: EmbeddingProvider | None = None,
) -> ConstraintEntry | None:
    """Exact signature-pattern match first (lowest id), else the best fuzzy match above `tau_rule`."""
    entries = kb.constraints_for(dialect)
    for entry in entries:
        if any(matches_pattern(pattern, signature, segment) for pattern in entry.signature_patterns):
            logger.debug("Signature %r matched %s exactly", signature.key, entry.id)
            return entry
    if not entries:
        return None

    embedder = embedder or default_embedder()
    query = embedder.embed(f"{signature.key} {segment}".strip())
    best: ConstraintEntry | None = None
    best_score = tau_rule
    for entry in entries:
        score = cosine(query, embedder.embed(entry.index_text))
        if score >= best_score and (best is None or score > best_score):
            best, best_score = entry, score
    if best is not None:
        logger.debug("Signature %r matched %s fuzzily (%.3f)", signature.key, best.id, best_score)
    return best
