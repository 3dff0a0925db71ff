"""Exec, Acc and feature-coverage scores, and the all-or-nothing overall aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterable, Mapping, Sequence

import sqlglot
from sqlglot import exp
from sqlglot.errors import ParseError as SqlglotParseError
from sqlglot.errors import TokenError

from dialsql.core.errors import MissingDialectOutcome
from dialsql.dialects.compare import compare_result_sets
from dialsql.dialects.profiles import profile_for
from dialsql.evalkit.patterns import compile_pattern

if TYPE_CHECKING:
    from dialsql.core.model import DialectId, ExecutionOutcome


@dataclass(frozen=True, slots=True)
class AccuracyCase:
    got: ExecutionOutcome
    gold: ExecutionOutcome
    order_sensitive: bool = False

    @property
    def correct(self) -> bool:
        if not (self.got.ok and self.gold.ok) or self.got.rows is None or self.gold.rows is None:
            return False
        return compare_result_sets(self.got.rows, self.gold.rows, self.order_sensitive)


def _ratio(hits: int, total: int) -> float:
    return hits / total if total else 0.0


def score_exec(outcomes: Sequence[ExecutionOutcome]) -> float:
    return _ratio(sum(1 for outcome in outcomes if outcome.ok), len(outcomes))


def score_acc(cases: Sequence[AccuracyCase]) -> float:
    """Fraction of cases whose result set matches the gold one; failures count as incorrect."""
    return _ratio(sum(1 for case in cases if case.correct), len(cases))


def is_order_sensitive(gold_sql: str, dialect: DialectId) -> bool:
    """Whether the outermost query of the gold SQL sorts its rows."""
    try:
        tree = sqlglot.parse_one(gold_sql, read=profile_for(dialect).read)
    except (SqlglotParseError, TokenError):
        return " ORDER BY " in f" {gold_sql.upper()} "
    return isinstance(tree, exp.Query) and tree.args.get("order") is not None


def score_dfc(generated_sql: str, gold_sql: str, patterns: Iterable[str]) -> float | None:
    """Recall of the gold query's dialect features in the generated query.

    Returns ``None`` (not applicable) when the gold query matches no pattern.
    Raises ``InvalidPattern`` for a pattern that does not compile.
    """
    compiled = [compile_pattern(p) for p in patterns]
    in_gold = [p for p in compiled if p.search(gold_sql)]
    if not in_gold:
        return None
    return sum(1 for p in in_gold if p.search(generated_sql)) / len(in_gold)


def mean_dfc(scores: Iterable[float | None]) -> float | None:
    applicable = [s for s in scores if s is not None]
    return sum(applicable) / len(applicable) if applicable else None


def aggregate_overall(
    results: Mapping[str, Mapping[DialectId, bool]],
    dialects: Sequence[DialectId],
) -> float:
    """Fraction of items that hold on every evaluated dialect.

    Raises ``MissingDialectOutcome`` when an item lacks one of `dialects`.
    """
    passing = 0
    for qid, per_dialect in results.items():
        missing = [d.value for d in dialects if d not in per_dialect]
        if missing:
            msg = f"item {qid} has no outcome for {', '.join(missing)}"
            raise MissingDialectOutcome(msg)
        passing += all(per_dialect[d] for d in dialects)
    return _ratio(passing, len(results))


@dataclass(frozen=True, slots=True)
class DialectScores:
    exec: float
    acc: float
    dfc: float | None
    count: int

    def to_dict(self) -> dict[str, Any]:
        return {"exec": self.exec, "acc": self.acc, "dfc": self.dfc, "count": self.count}


@dataclass(frozen=True, slots=True)
class MetricsReport:
    per_dialect: dict[str, DialectScores] = field(default_factory=dict)
    overall: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "per_dialect": {name: scores.to_dict() for name, scores in sorted(self.per_dialect.items())},
            "overall": dict(self.overall),
            "counts": dict(self.counts),
        }
