"""Mechanical ANSI rendering of a plan's structured intents."""

from __future__ import annotations

import re
from typing import TYPE_CHECKING

from dialsql.audit.intent import AggregateIntent, FilterIntent, read_plan
from dialsql.audit.trace import YEAR_FILTER
from dialsql.core.errors import PreconditionError
from dialsql.core.model import SqlText

if TYPE_CHECKING:
    from dialsql.planner.model import DialectAwarePlan

_NUMERIC = re.compile(r"^-?\d+(?:\.\d+)?$")


def _literal(value: str) -> str:
    if _NUMERIC.match(value):
        return value
    escaped = value.replace("'", "''")
    return f"'{escaped}'"


def _aggregate_sql(aggregate: AggregateIntent) -> str:
    if aggregate.column == "*" or aggregate.ref is None:
        return f"{aggregate.function}(*)"
    return f"{aggregate.function}({aggregate.ref.key})"


def _condition(wanted: FilterIntent, subject: str) -> str:
    predicate = wanted.predicate
    if predicate.comparator == YEAR_FILTER:
        return f"EXTRACT(YEAR FROM {subject}) = {predicate.value}"
    if predicate.comparator == "in":
        values = ", ".join(_literal(v) for v in predicate.value.split(","))
        return f"{subject} IN ({values})"
    if predicate.comparator == "like":
        return f"{subject} LIKE {_literal(predicate.value)}"
    return f"{subject} {predicate.comparator} {_literal(predicate.value)}"


def synthesize_query(plan: DialectAwarePlan) -> SqlText:
    """Render the query a plan literally asks for.

    Only structurally readable intents contribute; free-text operators are
    skipped. The result is the reference a faithful query must audit like.
    """
    intent = read_plan(plan.base.operators)
    if not intent.tables:
        msg = "Plan names no table to read from."
        raise PreconditionError(msg)

    sources = [intent.tables[0]]
    joined = {intent.tables[0]}
    for left, right in intent.edges:
        for ref, other in ((left, right), (right, left)):
            table = ref.table.lower()
            if table not in joined:
                sources.append(f"JOIN {table} ON {ref.key.lower()} = {other.key.lower()}")
                joined.add(table)
                break
    sources += [f"CROSS JOIN {table}" for table in intent.tables if table not in joined]

    owned = {owner.key: alias for alias, owner in intent.alias_owner.items() if owner is not None}
    free_aliases = iter(alias for alias in intent.aliases if intent.alias_owner.get(alias) is None)
    items = [
        f"{ref.key.lower()} AS {owned[ref.key]}" if ref.key in owned else ref.key.lower()
        for ref in intent.projection_refs
    ]
    if not intent.has_organization:
        items += [ref.key.lower() for ref in intent.group_refs]
    for aggregate in intent.aggregates:
        alias = next(free_aliases, None)
        items.append(f"{_aggregate_sql(aggregate)} AS {alias}" if alias else _aggregate_sql(aggregate))

    measured = {a.column: _aggregate_sql(a) for a in intent.aggregates}
    where = [_condition(f, f.ref.key.lower()) for f in intent.filters if not f.post_aggregate]
    having = [
        _condition(f, measured.get(f.predicate.column, f.ref.key.lower())) for f in intent.filters if f.post_aggregate
    ]

    lines = [f"SELECT {', '.join(items) or '*'}", f"FROM {' '.join(sources)}"]
    if where:
        lines.append(f"WHERE {' AND '.join(where)}")
    if intent.group_refs and intent.has_aggregation:
        lines.append(f"GROUP BY {', '.join(ref.key.lower() for ref in intent.group_refs)}")
    if having:
        lines.append(f"HAVING {' AND '.join(having)}")
    return SqlText("\n".join(lines), plan.dialect)
