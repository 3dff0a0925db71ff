"""Constraint simulator: validates SQL against a dialect's grammar profile and rule catalog."""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import TYPE_CHECKING, Literal, Protocol, Sequence

import sqlglot
from sqlglot import exp
from sqlglot.errors import ParseError as SqlglotParseError
from sqlglot.errors import TokenError

from dialsql.core.model import ErrorTrace, ExecutionOutcome, FailingSegment, SqlText
from dialsql.dialects.profiles import GrammarProfile, profile_for
from dialsql.dialects.rules import DialectRule, ScanInput, load_catalog
from dialsql.utils.text import find_span, mask_strings

if TYPE_CHECKING:
    from dialsql.core.model import DialectId, SchemaCatalog

logger = logging.getLogger(__name__)


class Executor(Protocol):
    """Runs one query for one dialect."""

    dialect: DialectId
    capability: Literal["live", "simulated"]

    def execute(self, sql: SqlText) -> ExecutionOutcome: ...


def simulate(
    sql: SqlText,
    catalog: Sequence[DialectRule] | None = None,
    schema: SchemaCatalog | None = None,
) -> ExecutionOutcome:
    """Validate `sql` for its dialect without evaluating it.

    The query is parsed under the dialect profile first. A parse failure is
    reported as the first lexical rule that explains it, or as the profile's
    generic syntax error. A parsed query runs every detector in rule_id order
    and the first violation becomes the error trace.

    Parameters
    ----------
    sql:
        Query and its target dialect.
    catalog:
        Rules to apply; the shipped ``rules.jsonl`` when omitted.
    schema:
        Task schema; its table and column names are not mistaken for misused literals.

    Returns
    -------
    ExecutionOutcome
        Success with an empty row table, or the synthetic error trace.

    """
    profile = profile_for(sql.dialect)
    rules = sorted(
        (rule for rule in (catalog or load_catalog()) if sql.dialect in rule.dialects),
        key=lambda rule: rule.rule_id,
    )

    try:
        tokens = sqlglot.tokenize(sql.text, read=profile.read)
    except TokenError as exc:
        return _syntax_outcome(profile, sql.text, near=str(exc).split("\n")[0][:40])

    scan = ScanInput(
        sql=sql.text,
        masked=mask_strings(sql.text),
        tokens=tokens,
        profile=profile,
        identifiers=schema_identifiers(schema) if schema is not None else frozenset(),
    )
    tree_or_failure = _parse(sql.text, profile)
    if isinstance(tree_or_failure, ExecutionOutcome):
        lexical = [rule for rule in rules if rule.stage == "lexical"]
        return _first_violation(sql, lexical, scan) or tree_or_failure

    return _first_violation(sql, rules, replace(scan, tree=tree_or_failure)) or ExecutionOutcome.success(rows=())


def schema_identifiers(schema: SchemaCatalog) -> frozenset[str]:
    names = {table.name.lower() for table in schema.tables}
    names |= {column.name.lower() for table in schema.tables for column in table.columns}
    return frozenset(names)


def _first_violation(sql: SqlText, rules: list[DialectRule], scan: ScanInput) -> ExecutionOutcome | None:
    for rule in rules:
        violation = rule.detect(scan)
        if violation is not None:
            return ExecutionOutcome.error(rule.synthetic_trace(sql.dialect, violation))
    return None


def _parse(text: str, profile: GrammarProfile) -> exp.Expression | ExecutionOutcome:
    try:
        statements = [stmt for stmt in sqlglot.parse(text, read=profile.read) if stmt is not None]
    except SqlglotParseError as exc:
        first = exc.errors[0] if exc.errors else {}
        return _syntax_outcome(profile, text, near=str(first.get("highlight") or ""))
    except TokenError as exc:
        return _syntax_outcome(profile, text, near=str(exc)[:40])

    if len(statements) != 1:
        near = statements[1].sql(dialect=profile.read)[:40] if statements else ""
        return _syntax_outcome(profile, text, near=near)
    tree = statements[0]
    if not isinstance(tree, exp.Query):
        return _syntax_outcome(profile, text, near=text.split()[0] if text.split() else "")
    return tree


def _syntax_outcome(profile: GrammarProfile, text: str, near: str) -> ExecutionOutcome:
    span = find_span(text, near) if near else None
    segment = FailingSegment(text=near, start=span[0], end=span[1]) if span else None
    return ExecutionOutcome.error(
        ErrorTrace(
            message=profile.syntax_error(near),
            vendor_code=profile.syntax_vendor_code,
            failing_segment=segment if near else None,
        ),
    )


class SimulatedExecutor:
    """Executor backed by the simulator; never touches data."""

    capability: Literal["live", "simulated"] = "simulated"

    def __init__(
        self,
        dialect: DialectId,
        catalog: Sequence[DialectRule] | None = None,
        schema: SchemaCatalog | None = None,
    ) -> None:
        self.dialect = dialect
        self.catalog = tuple(catalog) if catalog is not None else None
        self.schema = schema

    def execute(self, sql: SqlText) -> ExecutionOutcome:
        outcome = simulate(sql, self.catalog, self.schema)
        if not outcome.ok and outcome.trace is not None:
            logger.debug("simulate %s: %s", self.dialect, outcome.trace.rule_id or "syntax")
        return outcome
