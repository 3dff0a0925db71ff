"""Consolidation routing of distilled primitives into the function or constraint repository."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

import numpy as np

from dialsql.dialects.signature import escape_glob
from dialsql.kb.model import (
    Case,
    ConstraintEntry,
    FunctionEntry,
    constraint_entry_id,
    function_entry_id,
    function_index_text,
)
from dialsql.kb.reference import default_reference
from dialsql.llm.embed import cosine, default_embedder
from dialsql.planner.categories import nearest_category

if TYPE_CHECKING:
    from dialsql.kb.model import KnowledgePrimitive
    from dialsql.kb.reference import CanonicalReference
    from dialsql.kb.store import CommitEvent, KnowledgeBase
    from dialsql.llm.embed import EmbeddingProvider
    from dialsql.planner.model import DialectAwarePlan

logger = logging.getLogger(__name__)

ROUTING_THRESHOLD = 0.75


@dataclass(frozen=True, slots=True)
class RoutingDecision:
    target: Literal["to_F_Func", "to_R_Rule"]
    similarity: float
    entry: FunctionEntry | ConstraintEntry


def routing_similarity(g: KnowledgePrimitive, plan: DialectAwarePlan, embedder: EmbeddingProvider) -> float:
    return cosine(embedder.embed(g.text), embedder.embed(plan.to_json()))


def _function_entry(
    g: KnowledgePrimitive,
    plan: DialectAwarePlan,
    embedder: EmbeddingProvider,
    csr: CanonicalReference,
) -> FunctionEntry:
    if plan.enriched:
        query = embedder.embed(g.text)
        scores = [float(np.dot(query, embedder.embed(std.standard_description))) for std in plan.enriched]
        anchor = plan.enriched[int(np.argmax(scores))]
        category, specification = anchor.category, anchor.standard_description
    else:
        category, specification = nearest_category(g.text, csr, embedder).id, g.root_cause
    scenarios = (g.root_cause,)
    vector = embedder.embed(function_index_text(category, scenarios, specification))
    return FunctionEntry(
        id=function_entry_id(plan.dialect, category, g.corrective_exemplar),
        dialect=plan.dialect,
        category=category,
        scenarios=scenarios,
        specification=specification,
        implementation=g.corrective_exemplar,
        embedding=tuple(float(x) for x in vector),
        origin="consolidated",
    )


def _constraint_entry(g: KnowledgePrimitive, plan: DialectAwarePlan) -> ConstraintEntry:
    patterns = (escape_glob(g.signature),) if g.signature else ()
    return ConstraintEntry(
        id=constraint_entry_id(plan.dialect, g.incorrect_pattern),
        dialect=plan.dialect,
        rule_spec=g.incorrect_pattern,
        signature_patterns=patterns,
        cases=(Case(erroneous=g.incorrect_exemplar or g.incorrect_pattern, correct=g.corrective_exemplar),),
        origin="consolidated",
    )


def route_primitive(
    g: KnowledgePrimitive,
    plan: DialectAwarePlan,
    embedder: EmbeddingProvider | None = None,
    threshold: float = ROUTING_THRESHOLD,
    csr: CanonicalReference | None = None,
) -> RoutingDecision:
    """Decide where a primitive belongs and materialize the entry; the KB is not touched.

    Parameters
    ----------
    g:
        The distilled primitive.
    plan:
        The dialect-aware plan of the run that produced it.
    embedder:
        Embedding provider; the default hashing embedder when omitted.
    threshold:
        Similarity at or above which the primitive becomes a function entry.
    csr:
        Canonical reference for the category fallback of plans without enriched operators.

    Returns
    -------
    RoutingDecision
        Target repository, similarity and the entry to commit.

    """
    embedder = embedder or default_embedder()
    similarity = routing_similarity(g, plan, embedder)
    if similarity >= threshold:
        entry: FunctionEntry | ConstraintEntry = _function_entry(g, plan, embedder, csr or default_reference())
        target: Literal["to_F_Func", "to_R_Rule"] = "to_F_Func"
    else:
        entry = _constraint_entry(g, plan)
        target = "to_R_Rule"
    logger.info("Routed primitive %s (similarity %.3f)", target, similarity)
    return RoutingDecision(target=target, similarity=similarity, entry=entry)


def commit_decision(kb: KnowledgeBase, decision: RoutingDecision) -> CommitEvent:
    """Apply a routing decision through the knowledge base's single writer."""
    if isinstance(decision.entry, FunctionEntry):
        return kb.add_function(decision.entry)
    return kb.add_constraint(decision.entry)
