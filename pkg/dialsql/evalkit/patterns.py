"""Dialect-feature patterns for feature-coverage scoring.

Extension format: a JSON-lines file with one object per feature,
``{"feature_id": ..., "description": ..., "pattern": ..., "dialects": [...]}``.
Patterns are case-insensitive regular expressions.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from dialsql.core.errors import CorruptRecord, InvalidPattern
from dialsql.core.model import DialectId


@dataclass(frozen=True, slots=True)
class FeaturePattern:
    feature_id: str
    description: str
    pattern: str
    dialects: frozenset[DialectId]

    def compile(self) -> re.Pattern[str]:
        return compile_pattern(self.pattern)


def compile_pattern(pattern: str) -> re.Pattern[str]:
    try:
        return re.compile(pattern, re.IGNORECASE)
    except re.error as exc:
        raise InvalidPattern(pattern, str(exc)) from exc


def _feature(feature_id: str, description: str, pattern: str, *dialects: str) -> FeaturePattern:
    return FeaturePattern(feature_id, description, pattern, frozenset(DialectId(d) for d in dialects))


DEFAULT_PATTERNS: tuple[FeaturePattern, ...] = (
    _feature("I1", "distinct count through grouping", r"\bCOUNT\s*\(\s*DISTINCT\b", "postgresql", "mysql"),
    _feature("I2", "conditional count", r"\bCOUNT\s*\(\s*CASE\s+WHEN\b", "mysql"),
    _feature("I3", "ordering isolated in a CTE", r"\bWITH\s+\w+\s+AS\s*\(", "sqlserver", "postgresql", "oracle"),
    _feature("I4", "single-row scalar subquery", r"=\s*\(\s*SELECT\b[^()]*\bLIMIT\s+1\s*\)", "postgresql", "mysql"),
    _feature("M1", "pipe concatenation", r"\|\|", "oracle"),
    _feature("M2", "table alias without AS", r"\bJOIN\s+\w+\s+(?!AS\b|ON\b)[A-Za-z_]\w*\s+ON\b", "oracle"),
    _feature("M3", "sort direction keyword", r"\bORDER\s+BY\s+[\w.]+\s+(?:ASC|DESC)\b", "oracle"),
    _feature("M4", "single-quoted string literal", r"(?:=|<>|!=|\bLIKE)\s*'[^']*'", "postgresql"),
    _feature("M5", "select from DUAL", r"\bFROM\s+DUAL\b", "oracle"),
    _feature(
        "M6",
        "aliased derived table",
        r"\)\s*(?:AS\s+)?(?!(?:WHERE|GROUP|ORDER|JOIN|ON|LIMIT|UNION|FROM)\b)[A-Za-z_]\w*\s*(?:$|\b(?:WHERE|GROUP|ORDER|JOIN|LIMIT)\b)",
        "postgresql",
        "mysql",
    ),
    _feature("U1", "LISTAGG string aggregation", r"\bLISTAGG\s*\(", "oracle"),
    _feature("U2", "cast to CHAR", r"\bCAST\s*\([^()]*\bAS\s+CHAR\b", "mysql"),
    _feature("U3", "native date conversion", r"\b(?:TO_DATE|TRUNC)\s*\(", "oracle"),
    _feature("U4", "inline date literal", r"\bDATE\s+'\d{4}-\d{2}-\d{2}'", "duckdb"),
)


def patterns_for(dialect: DialectId, patterns: tuple[FeaturePattern, ...] = DEFAULT_PATTERNS) -> list[str]:
    return [p.pattern for p in patterns if dialect in p.dialects]


def load_patterns(path: str | Path) -> tuple[FeaturePattern, ...]:
    """Read an extension file; every pattern is compiled up front."""
    source = Path(path)
    found: list[FeaturePattern] = []
    for line_no, line in enumerate(source.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            feature = _feature(record["feature_id"], record.get("description", ""), record["pattern"], *record["dialects"])
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptRecord(str(source), line_no, str(exc)) from exc
        feature.compile()
        found.append(feature)
    return tuple(found)
