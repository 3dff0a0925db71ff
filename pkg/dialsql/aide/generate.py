"""Knowledge-grounded generation of the initial query."""

from __future__ import annotations

import logging
import re
from typing import TYPE_CHECKING, Callable

from dialsql.core.errors import EmptyRepository, GenerationFormatError
from dialsql.core.model import SqlText
from dialsql.kb.retrieve import DEFAULT_TOP_K, retrieve_functions
from dialsql.llm.gateway import ReplyFormatError, ask

if TYPE_CHECKING:
    from dialsql.core.model import DialectId, SchemaCatalog
    from dialsql.kb.model import Hit
    from dialsql.kb.store import KnowledgeBase
    from dialsql.llm.embed import EmbeddingProvider
    from dialsql.llm.gateway import ChatBackend
    from dialsql.planner.model import DialectAwarePlan

logger = logging.getLogger(__name__)

NO_TEMPLATES = "(none)"

_FENCE = re.compile(r"```[A-Za-z]*\s*\n?(.*?)```", re.DOTALL)
_QUERY_START = re.compile(r"\b(SELECT|WITH)\b", re.IGNORECASE)


def extract_sql(text: str) -> str:
    """The query of a model reply: the first fenced block, else the text from its first SELECT/WITH."""
    fenced = _FENCE.search(text)
    body = fenced.group(1) if fenced else text
    start = _QUERY_START.search(body)
    if start is None:
        msg = "reply contains no query"
        raise ReplyFormatError(msg)
    sql = body[start.start() :].strip().rstrip(";").strip()
    if not sql:
        msg = "reply contains an empty query"
        raise ReplyFormatError(msg)
    return sql


def sql_parser(dialect: DialectId) -> Callable[[str], SqlText]:
    def parse(text: str) -> SqlText:
        return SqlText(extract_sql(text), dialect)

    return parse


def retrieve_templates(
    plan: DialectAwarePlan,
    kb: KnowledgeBase,
    k: int = DEFAULT_TOP_K,
    embedder: EmbeddingProvider | None = None,
) -> list[tuple[int, Hit]]:
    """Top-`k` function entries per enriched operator, tagged with the operator index."""
    found: list[tuple[int, Hit]] = []
    for std in plan.enriched:
        try:
            hits = retrieve_functions(kb, std, plan.dialect, k=k, embedder=embedder)
        except EmptyRepository:
            logger.warning("No function entries for %s; generating without templates", plan.dialect.value)
            return []
        found += [(std.source_index, hit) for hit in hits]
    return found


def render_templates(templates: list[tuple[int, Hit]]) -> str:
    if not templates:
        return NO_TEMPLATES
    lines = []
    for index, hit in templates:
        entry = hit.entry
        lines.append(f"- operator {index} <{entry.category}> {entry.implementation}")
        lines.append(f"    use for: {'; '.join(entry.scenarios)} ({entry.specification})")
    return "\n".join(lines)


def generate_initial(
    plan: DialectAwarePlan,
    schema: SchemaCatalog,
    kb: KnowledgeBase | None,
    llm: ChatBackend,
    *,
    question: str = "",
    k: int = DEFAULT_TOP_K,
    embedder: EmbeddingProvider | None = None,
) -> SqlText:
    """Generate the first query from the plan, the schema and retrieved function templates.

    Parameters
    ----------
    plan:
        Dialect-aware plan; its enriched operators drive retrieval.
    schema:
        Schema of the task.
    kb:
        Knowledge base, or ``None`` to generate without templates.
    llm:
        Chat backend answering ``sql_generate``.
    question:
        Original question, shown alongside the plan.
    k:
        Templates retrieved per enriched operator.
    embedder:
        Embedding provider for retrieval.

    Returns
    -------
    SqlText
        The initial query in the plan's dialect.

    """
    templates = retrieve_templates(plan, kb, k=k, embedder=embedder) if kb is not None else []
    logger.info("Generating initial %s query with %d template(s)", plan.dialect.value, len(templates))
    return ask(
        llm,
        "sql_generate",
        {
            "question": question,
            "plan": plan.render(),
            "schema": schema.describe(),
            "dialect": plan.dialect.value,
            "templates": render_templates(templates),
        },
        sql_parser(plan.dialect),
        error_cls=GenerationFormatError,
    )


def generate_direct(question: str, schema: SchemaCatalog, dialect: DialectId, llm: ChatBackend) -> SqlText:
    """Generate straight from the question, without a plan or templates."""
    logger.info("Generating %s query directly from the question", dialect.value)
    return ask(
        llm,
        "sql_generate_direct",
        {"question": question, "schema": schema.describe(), "dialect": dialect.value},
        sql_parser(dialect),
        error_cls=GenerationFormatError,
    )
