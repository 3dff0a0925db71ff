"""Curated seed knowledge: native function entries and one constraint entry per catalog rule."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

from dialsql.core.model import DialectId
from dialsql.dialects.rules import load_catalog
from dialsql.kb.model import ConstraintEntry, FunctionEntry, constraint_entry_id, function_entry_id, function_index_text
from dialsql.kb.store import KnowledgeBase
from dialsql.llm.embed import default_embedder

if TYPE_CHECKING:
    from dialsql.dialects.rules import DialectRule
    from dialsql.llm.embed import EmbeddingProvider

logger = logging.getLogger(__name__)

# (dialect, category id, scenarios, specification, implementation)
SEED_FUNCTIONS: tuple[tuple[str, str, tuple[str, ...], str, str], ...] = (
    ("oracle", "string_manipulation", ("concatenate the values of a group into one list", "aggregate strings per group"),
     "string aggregation with a separator, ordered within the group",
     "LISTAGG(expr, ',') WITHIN GROUP (ORDER BY expr)"),
    ("oracle", "string_manipulation", ("slice part of a string", "extract a substring by position"),
     "substring extraction from a start index for a length",
     "SUBSTR(s, start, length)"),
    ("oracle", "string_manipulation", ("join more than two strings",),
     "string concatenation of any number of operands",
     "s1 || s2 || s3"),
    ("oracle", "date_time_operations", ("extract the year of a date", "filter rows by year"),
     "timestamp extraction of the year field",
     "EXTRACT(YEAR FROM d)"),
    ("oracle", "date_time_operations", ("difference between two dates in months", "months elapsed"),
     "date difference in months",
     "MONTHS_BETWEEN(end_date, start_date)"),
    ("oracle", "date_time_operations", ("truncate a date to its day or month",),
     "date truncation to a unit boundary",
     "TRUNC(d, 'MM')"),
    ("oracle", "type_conversion_casting", ("parse a date literal", "compare a column with a literal date"),
     "date parsing of text with a format pattern",
     "TO_DATE('2017-03-22', 'YYYY-MM-DD')"),
    ("oracle", "type_conversion_casting", ("convert formatted currency text to a number", "sum amounts stored as text"),
     "numeric parsing of text after removing symbols and separators",
     "TO_NUMBER(REGEXP_REPLACE(s, '[^0-9.]', ''))"),
    ("oracle", "pagination_row_limiting", ("keep the first n rows", "top n rows after sorting"),
     "top-n rows of an ordered result",
     "ORDER BY expr FETCH FIRST n ROWS ONLY"),
    ("oracle", "conditional_null_handling", ("replace missing values with a default",),
     "null coalescing",
     "NVL(x, default_value)"),
    ("mysql", "date_time_operations", ("interval between two dates in years", "calculating age"),
     "date difference in years",
     "TIMESTAMPDIFF(YEAR, start_date, end_date)"),
    ("mysql", "string_manipulation", ("concatenate the values of a group into one list",),
     "string aggregation with a separator",
     "GROUP_CONCAT(expr ORDER BY expr SEPARATOR ',')"),
    ("mysql", "type_conversion_casting", ("cast a value to text",),
     "explicit cast to a character type",
     "CAST(x AS CHAR)"),
    ("mysql", "type_conversion_casting", ("convert formatted currency text to a number", "sum amounts stored as text"),
     "numeric parsing of text after removing symbols and separators",
     "CAST(REPLACE(REPLACE(SUBSTRING(s, 3, CHAR_LENGTH(s) - 6), ',', ''), ' ', '') AS DECIMAL(18, 2))"),
    ("mysql", "date_time_operations", ("format a date as year and month",),
     "date formatting with a pattern",
     "DATE_FORMAT(d, '%Y-%m')"),
    ("mysql", "date_time_operations", ("extract the year of a date", "filter rows by year"),
     "timestamp extraction of the year field",
     "YEAR(d)"),
    ("mysql", "pagination_row_limiting", ("keep the first n rows",),
     "top-n rows of an ordered result",
     "ORDER BY expr LIMIT n"),
    ("postgresql", "date_time_operations", ("calculating age", "interval between two dates in years"),
     "date difference in years",
     "EXTRACT(YEAR FROM AGE(end_date, start_date))"),
    ("postgresql", "string_manipulation", ("concatenate the values of a group into one list",),
     "string aggregation with a separator",
     "STRING_AGG(expr, ',' ORDER BY expr)"),
    ("postgresql", "date_time_operations", ("truncate a timestamp to its month",),
     "date truncation to a unit boundary",
     "DATE_TRUNC('month', ts)"),
    ("postgresql", "date_time_operations", ("extract the year of a date", "filter rows by year"),
     "timestamp extraction of the year field",
     "EXTRACT(YEAR FROM d)"),
    ("postgresql", "type_conversion_casting", ("convert formatted currency text to a number", "sum amounts stored as text"),
     "numeric parsing of text after removing symbols and separators",
     "CAST(REGEXP_REPLACE(s, '[^0-9.]', '', 'g') AS NUMERIC)"),
    ("postgresql", "pagination_row_limiting", ("keep the first n rows",),
     "top-n rows of an ordered result",
     "ORDER BY expr LIMIT n"),
    ("sqlite", "date_time_operations", ("extract the year of a date", "filter rows by year"),
     "timestamp extraction of the year field as text",
     "strftime('%Y', d)"),
    ("sqlite", "date_time_operations", ("difference between two dates in days",),
     "date difference in days",
     "julianday(end_date) - julianday(start_date)"),
    ("sqlite", "string_manipulation", ("concatenate the values of a group into one list",),
     "string aggregation with a separator",
     "group_concat(expr, ',')"),
    ("sqlite", "type_conversion_casting", ("convert formatted currency text to a number", "sum amounts stored as text"),
     "numeric parsing of text after removing symbols and separators",
     "CAST(REPLACE(REPLACE(REPLACE(s, '$', ''), ',', ''), ' USD', '') AS REAL)"),
    ("sqlite", "pagination_row_limiting", ("keep the first n rows",),
     "top-n rows of an ordered result",
     "ORDER BY expr LIMIT n"),
    ("sqlserver", "string_manipulation", ("concatenate the values of a group into one list",),
     "string aggregation with a separator, ordered within the group",
     "STRING_AGG(expr, ',') WITHIN GROUP (ORDER BY expr)"),
    ("sqlserver", "date_time_operations", ("interval between two dates in years", "difference between two dates"),
     "date difference in a given unit",
     "DATEDIFF(year, start_date, end_date)"),
    ("sqlserver", "date_time_operations", ("extract the year of a date", "filter rows by year"),
     "timestamp extraction of the year field",
     "DATEPART(year, d)"),
    ("sqlserver", "type_conversion_casting", ("convert formatted currency text to a number",),
     "numeric parsing of text that may fail",
     "TRY_CAST(REPLACE(REPLACE(s, '$', ''), ',', '') AS DECIMAL(18, 2))"),
    ("sqlserver", "pagination_row_limiting", ("keep the first n rows",),
     "top-n rows of an ordered result",
     "SELECT TOP (n) ... ORDER BY expr"),
    ("duckdb", "string_manipulation", ("concatenate the values of a group into one list",),
     "string aggregation with a separator",
     "string_agg(expr, ',' ORDER BY expr)"),
    ("duckdb", "date_time_operations", ("interval between two dates in years", "difference between two dates"),
     "date difference in a given unit",
     "date_diff('year', start_date, end_date)"),
    ("duckdb", "date_time_operations", ("truncate a timestamp to its month",),
     "date truncation to a unit boundary",
     "date_trunc('month', ts)"),
    ("duckdb", "type_conversion_casting", ("convert text to a number without failing",),
     "numeric parsing of text that may fail",
     "TRY_CAST(regexp_replace(s, '[^0-9.]', '', 'g') AS DOUBLE)"),
    ("duckdb", "pagination_row_limiting", ("keep the first n rows",),
     "top-n rows of an ordered result",
     "ORDER BY expr LIMIT n"),
)  # fmt: skip

# Signature patterns per catalog rule and dialect: ``<signature glob>[ @ <segment glob>]``.
SEED_RULE_PATTERNS: dict[str, dict[str, tuple[str, ...]]] = {
    "C1": {"oracle": ("ORA-00933: * @ LIMIT*",), "sqlserver": ("102: * @ LIMIT*",)},
    "C3": {"postgresql": ("42P10: *ORDER BY expressions must appear in select list*",)},
    "I1": {"postgresql": ("0A000: DISTINCT is not implemented for window functions",), "mysql": ("1235: *",)},
    "I2": {"mysql": ("1111: *",)},
    "I3": {"sqlserver": ("8127: *",), "postgresql": ("42803: *",), "oracle": ("ORA-00979: *",)},
    "I4": {"postgresql": ("21000: more than one row returned by a subquery*",), "mysql": ("1242: *",)},
    "I5": {"mysql": ("1241: *",), "postgresql": ("42601: subquery has too many columns",)},
    "M1": {"oracle": ("ORA-00909: *",)},
    "M2": {"oracle": ("ORA-00933: * @ FROM *", "ORA-00933: * @ JOIN *")},
    "M3": {"oracle": ("ORA-00936: * @ ASC(*", "ORA-00936: * @ DESC(*")},
    "M4": {"postgresql": ("42703: column ⟨id⟩ does not exist",)},
    "M5": {"oracle": ("ORA-00923: *",)},
    "M6": {"postgresql": ("42601: subquery in FROM must have an alias",), "mysql": ("1248: *",)},
    "U1": {"oracle": ("ORA-00904: * @ GROUP_CONCAT(*",)},
    "U2": {"mysql": ("1064: * @ CAST*",)},
    "U3": {"oracle": ("ORA-00936: * @ DATE(*",)},
    "U4": {"duckdb": ("-: Invalid Input Error: Values were not provided*",)},
}


def seed_function_entries(embedder: EmbeddingProvider | None = None) -> list[FunctionEntry]:
    embedder = embedder or default_embedder()
    entries: list[FunctionEntry] = []
    for dialect_name, category, scenarios, specification, implementation in SEED_FUNCTIONS:
        dialect = DialectId(dialect_name)
        vector = embedder.embed(function_index_text(category, scenarios, specification))
        entries.append(
            FunctionEntry(
                id=function_entry_id(dialect, category, implementation),
                dialect=dialect,
                category=category,
                scenarios=scenarios,
                specification=specification,
                implementation=implementation,
                embedding=tuple(float(x) for x in vector),
            ),
        )
    return entries


def seed_constraint_entries(catalog: tuple[DialectRule, ...] | None = None) -> list[ConstraintEntry]:
    """One entry per (catalog rule, dialect): the rule's fix hint with its signature patterns, no cases."""
    entries: list[ConstraintEntry] = []
    for rule in catalog if catalog is not None else load_catalog():
        for dialect in sorted(rule.dialects):
            patterns = SEED_RULE_PATTERNS.get(rule.rule_id, {}).get(dialect.value, ())
            rule_spec = f"[{rule.rule_id}] {rule.gold_hint}"
            entries.append(
                ConstraintEntry(
                    id=constraint_entry_id(dialect, rule_spec),
                    dialect=dialect,
                    rule_spec=rule_spec,
                    signature_patterns=patterns,
                ),
            )
    return entries


def seed_knowledge_base(embedder: EmbeddingProvider | None = None) -> KnowledgeBase:
    kb = KnowledgeBase()
    for entry in seed_function_entries(embedder):
        kb.add_function(entry)
    for constraint in seed_constraint_entries():
        kb.add_constraint(constraint)
    logger.info("Seeded knowledge base: %s", kb.counts())
    return kb
