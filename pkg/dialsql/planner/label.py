"""Rule-based cascaded labeling of dialect-sensitive operators."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

from dialsql.planner.mining import base_type
from dialsql.planner.model import LogicalPlan, MacroOperator, MacroOperatorKind

if TYPE_CHECKING:
    from dialsql.core.model import SchemaCatalog

DEFAULT_LEXICON = frozenset(
    {
        "extract", "regex", "cast", "convert", "format", "concatenate", "truncate", "substring", "pivot",
        "window", "rank", "percentile", "json", "split", "pad", "interval", "timezone",
    },
)  # fmt: skip
DEFAULT_SENSITIVE_TYPES = frozenset(
    {"TIMESTAMP", "DATETIME", "DATE", "TIME", "JSON", "JSONB", "ARRAY", "BLOB", "INTERVAL", "UUID"},
)
# Sorting, limiting and pagination facets that make an ORG operator divergent.
DEFAULT_ORG_FACETS = frozenset(
    {
        "sort", "sorted", "ascending", "descending", "top", "first", "limit", "pagination", "page",
        "offset", "highest", "lowest", "latest", "earliest", "most recent",
    },
)  # fmt: skip


@dataclass(frozen=True, slots=True)
class LabelConfig:
    lexicon: frozenset[str] = field(default=DEFAULT_LEXICON)
    sensitive_types: frozenset[str] = field(default=DEFAULT_SENSITIVE_TYPES)
    org_facets: frozenset[str] = field(default=DEFAULT_ORG_FACETS)


def _mentions(text: str, phrases: frozenset[str]) -> bool:
    # Prefix match so "extract" also covers "extracting" and "extraction".
    lowered = text.lower()
    return any(re.search(rf"\b{re.escape(phrase.lower())}", lowered) for phrase in phrases)


def structural_check(op: MacroOperator, config: LabelConfig) -> bool:
    """(i) Scalar calculations, and ORG operators with a sort or cardinality facet."""
    if op.kind == MacroOperatorKind.CAL:
        return True
    return op.kind == MacroOperatorKind.ORG and _mentions(op.description, config.org_facets)


def lexicon_check(op: MacroOperator, config: LabelConfig) -> bool:
    """(ii) Description mentions a dialect-sensitive keyword."""
    return _mentions(op.description, config.lexicon)


def type_check(op: MacroOperator, schema: SchemaCatalog, config: LabelConfig) -> bool:
    """(iii) Any referenced column has a sensitive physical type."""
    sensitive = {t.upper() for t in config.sensitive_types}
    for ref in op.refs:
        col = schema.lookup(ref.table, ref.column)
        physical = col.physical_type if col is not None else ref.physical_type
        if base_type(physical) in sensitive:
            return True
    return False


def label_checks(op: MacroOperator, schema: SchemaCatalog, config: LabelConfig) -> tuple[bool, bool, bool]:
    return structural_check(op, config), lexicon_check(op, config), type_check(op, schema, config)


def is_sensitive(op: MacroOperator, schema: SchemaCatalog, config: LabelConfig) -> bool:
    return structural_check(op, config) or lexicon_check(op, config) or type_check(op, schema, config)


def label_operators(plan: LogicalPlan, schema: SchemaCatalog, config: LabelConfig | None = None) -> LogicalPlan:
    """Set the `sensitive` flag of every operator; pure and LLM-free."""
    config = config or LabelConfig()
    return LogicalPlan(
        operators=tuple(replace(op, sensitive=is_sensitive(op, schema, config)) for op in plan.operators),
    )
