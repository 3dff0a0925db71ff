"""Dialect rule catalog: rule records, detector registry and catalog loading."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable, Literal, Mapping

from sqlglot import exp
from sqlglot.tokens import TokenType

from dialsql.core.errors import CorruptRecord
from dialsql.core.model import DialectId, ErrorTrace, FailingSegment
from dialsql.utils.text import find_span

if TYPE_CHECKING:
    from sqlglot.tokens import Token

    from dialsql.dialects.profiles import GrammarProfile

logger = logging.getLogger(__name__)

DEFAULT_CATALOG_FILE = Path(__file__).resolve().parent / "rules.jsonl"

Stage = Literal["lexical", "ast"]
STAGE_ORDER: dict[str, int] = {"lexical": 0, "ast": 1}

# Tokens whose text is user data, never a keyword or function name.
OPAQUE_TOKENS = frozenset({TokenType.STRING, TokenType.IDENTIFIER})
COMPARISONS = (exp.EQ, exp.NEQ, exp.GT, exp.GTE, exp.LT, exp.LTE)


@dataclass(frozen=True, slots=True)
class ScanInput:
    """Everything a detector may look at for one query."""

    sql: str
    masked: str
    tokens: list[Token]
    profile: GrammarProfile
    tree: exp.Expression | None = None
    # Lower-cased table and column names of the task schema, when known.
    identifiers: frozenset[str] = frozenset()


@dataclass(frozen=True, slots=True)
class Violation:
    segment: FailingSegment
    near: str


@dataclass(frozen=True, slots=True)
class RuleExample:
    anti: str
    gold: str


Detector = Callable[[ScanInput, Mapping[str, Any]], Violation | None]
DETECTORS: dict[str, Detector] = {}


def detector(kind: str) -> Callable[[Detector], Detector]:
    def register(func: Detector) -> Detector:
        DETECTORS[kind] = func
        return func

    return register


@dataclass(frozen=True, slots=True)
class DialectRule:
    """One catalog rule: where it applies, how it detects, what the engine says."""

    rule_id: str
    dialects: frozenset[DialectId]
    stage: Stage
    detector_kind: str
    detector_args: Mapping[str, Any]
    # Either one template or one per dialect; ``{near}`` names the offending token.
    message_template: str | Mapping[str, str]
    vendor_code: str | Mapping[str, str] | None
    gold_hint: str
    examples: Mapping[DialectId, RuleExample] = field(default_factory=dict)

    def detect(self, scan: ScanInput) -> Violation | None:
        if self.stage == "ast" and scan.tree is None:
            return None
        return DETECTORS[self.detector_kind](scan, self.detector_args)

    def synthetic_trace(self, dialect: DialectId, violation: Violation) -> ErrorTrace:
        template = _per_dialect(self.message_template, dialect) or self.rule_id
        return ErrorTrace(
            message=template.replace("{near}", violation.near),
            vendor_code=_per_dialect(self.vendor_code, dialect),
            failing_segment=violation.segment,
            rule_id=self.rule_id,
        )


def _per_dialect(value: str | Mapping[str, str] | None, dialect: DialectId) -> str | None:
    if value is None or isinstance(value, str):
        return value
    return value.get(dialect.value)


@lru_cache(maxsize=4)
def load_catalog(path: Path = DEFAULT_CATALOG_FILE) -> tuple[DialectRule, ...]:
    """Read ``rules.jsonl`` into rules sorted by stage, then rule id.

    Parameters
    ----------
    path:
        Catalog file, one JSON rule per line.

    Returns
    -------
    tuple[DialectRule, ...]
        The rules in evaluation order.

    """
    rules: list[DialectRule] = []
    seen: set[str] = set()
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            rule = _rule_from_record(record)
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptRecord(str(path), line_no, str(exc)) from exc
        if rule.rule_id in seen:
            raise CorruptRecord(str(path), line_no, f"duplicate rule_id {rule.rule_id}")
        seen.add(rule.rule_id)
        rules.append(rule)

    rules.sort(key=lambda rule: (STAGE_ORDER[rule.stage], rule.rule_id))
    logger.debug("Loaded %d dialect rules from %s", len(rules), path)
    return tuple(rules)


def _rule_from_record(record: dict[str, Any]) -> DialectRule:
    kind = record["detector_kind"]
    if kind not in DETECTORS:
        msg = f"unknown detector_kind {kind!r}"
        raise ValueError(msg)
    stage = record.get("stage", "ast")
    if stage not in STAGE_ORDER:
        msg = f"unknown stage {stage!r}"
        raise ValueError(msg)
    return DialectRule(
        rule_id=record["rule_id"],
        dialects=frozenset(DialectId(d) for d in record["dialects"]),
        stage=stage,
        detector_kind=kind,
        detector_args=record.get("detector_args", {}),
        message_template=record["message_template"],
        vendor_code=record.get("vendor_code"),
        gold_hint=record["gold_hint"],
        examples={
            DialectId(dialect): RuleExample(anti=pair["anti"], gold=pair["gold"])
            for dialect, pair in record.get("examples", {}).items()
        },
    )


def rule_by_id(rule_id: str, catalog: tuple[DialectRule, ...] | None = None) -> DialectRule | None:
    return next((rule for rule in catalog or load_catalog() if rule.rule_id == rule_id), None)


# ---------------------------------------------------------------------------
# lexical detectors


def _segment(scan: ScanInput, start: int, end: int) -> FailingSegment:
    return FailingSegment(text=scan.sql[start:end], start=start, end=end)


def _closing_paren(tokens: list[Token], open_idx: int) -> int:
    depth = 0
    for idx in range(open_idx, len(tokens)):
        if tokens[idx].token_type == TokenType.L_PAREN:
            depth += 1
        elif tokens[idx].token_type == TokenType.R_PAREN:
            depth -= 1
            if depth == 0:
                return idx
    return len(tokens) - 1


def _function_calls(scan: ScanInput, names: set[str]) -> list[tuple[int, int]]:
    """(name token index, closing paren index) for each call of `names`."""
    calls: list[tuple[int, int]] = []
    tokens = scan.tokens
    for idx, token in enumerate(tokens[:-1]):
        if token.token_type in OPAQUE_TOKENS or token.text.upper() not in names:
            continue
        if tokens[idx + 1].token_type == TokenType.L_PAREN:
            calls.append((idx, _closing_paren(tokens, idx + 1)))
    return calls


@detector("function_call")
def _detect_function_call(scan: ScanInput, args: Mapping[str, Any]) -> Violation | None:
    names = {name.upper() for name in args["names"]}
    for name_idx, close_idx in _function_calls(scan, names):
        name_token = scan.tokens[name_idx]
        return Violation(
            segment=_segment(scan, name_token.start, scan.tokens[close_idx].end + 1),
            near=name_token.text.upper(),
        )
    return None


@detector("function_arity")
def _detect_function_arity(scan: ScanInput, args: Mapping[str, Any]) -> Violation | None:
    name = args["name"].upper()
    max_args = int(args["max_args"])
    for name_idx, close_idx in _function_calls(scan, {name}):
        depth = 0
        commas = 0
        for token in scan.tokens[name_idx + 1 : close_idx]:
            if token.token_type == TokenType.L_PAREN:
                depth += 1
            elif token.token_type == TokenType.R_PAREN:
                depth -= 1
            elif token.token_type == TokenType.COMMA and depth == 1:
                commas += 1
        if commas + 1 > max_args:
            start = scan.tokens[name_idx].start
            return Violation(segment=_segment(scan, start, scan.tokens[close_idx].end + 1), near=name)
    return None


@detector("row_limit_keyword")
def _detect_row_limit(scan: ScanInput, args: Mapping[str, Any]) -> Violation | None:
    keyword = args.get("keyword", "LIMIT").upper()
    if keyword.lower() in scan.profile.row_limit_forms:
        return None
    for idx, token in enumerate(scan.tokens):
        if token.token_type in OPAQUE_TOKENS or token.text.upper() != keyword:
            continue
        last = scan.tokens[idx + 1] if idx + 1 < len(scan.tokens) else token
        return Violation(segment=_segment(scan, token.start, last.end + 1), near=keyword)
    return None


@detector("text_pattern")
def _detect_text_pattern(scan: ScanInput, args: Mapping[str, Any]) -> Violation | None:
    flags = re.IGNORECASE if "i" in args.get("flags", "") else 0
    haystack = scan.masked if args.get("mask_strings", True) else scan.sql
    near_group = args.get("near_group", 0)
    for match in re.finditer(args["pattern"], haystack, flags):
        near = scan.sql[match.start(near_group) : match.end(near_group)].strip()
        if args.get("skip_identifiers") and near.strip("\"`").lower() in scan.identifiers:
            continue
        return Violation(segment=_segment(scan, match.start(), match.end()), near=near)
    return None


# ---------------------------------------------------------------------------
# AST detectors


def _node_violation(scan: ScanInput, node: exp.Expression, near: str | None = None) -> Violation:
    rendered = node.sql(dialect=scan.profile.read)
    span = find_span(scan.sql, rendered)
    if span is None:
        segment = FailingSegment(text=rendered)
    else:
        segment = _segment(scan, *span)
    return Violation(segment=segment, near=near or rendered)


def _scope_of(node: exp.Expression) -> exp.Expression | None:
    """Nearest enclosing SELECT."""
    parent = node.parent
    while parent is not None and not isinstance(parent, exp.Select):
        parent = parent.parent
    return parent


def _aggregates_in_scope(select: exp.Select) -> list[exp.AggFunc]:
    return [
        agg
        for agg in select.find_all(exp.AggFunc)
        if _scope_of(agg) is select and not isinstance(agg.parent, exp.Window)
    ]


def _is_aggregate_expr(node: exp.Expression) -> bool:
    node = node.unalias()
    if isinstance(node, exp.AggFunc):
        return True
    if node.find(exp.AggFunc) is None:
        return False
    return all(col.find_ancestor(exp.AggFunc) is not None for col in node.find_all(exp.Column))


def _limited(select: exp.Select) -> bool:
    return bool(select.args.get("limit") or select.args.get("fetch"))


@detector("distinct_order_by")
def _detect_distinct_order_by(scan: ScanInput, args: Mapping[str, Any]) -> Violation | None:  # noqa: ARG001
    assert scan.tree is not None  # noqa: S101
    for select in scan.tree.find_all(exp.Select):
        order = select.args.get("order")
        if not select.args.get("distinct") or order is None:
            continue
        projected: set[str] = set()
        for item in select.expressions:
            projected.add(item.sql().lower())
            projected.add(item.unalias().sql().lower())
            if item.alias_or_name:
                projected.add(item.alias_or_name.lower())
        for ordered in order.expressions:
            target = ordered.this
            if isinstance(target, exp.Literal) or target.sql().lower() in projected:
                continue
            if isinstance(target, exp.Column) and target.name.lower() in projected:
                continue
            return _node_violation(scan, target)
    return None


@detector("select_without_from")
def _detect_select_without_from(scan: ScanInput, args: Mapping[str, Any]) -> Violation | None:  # noqa: ARG001
    assert scan.tree is not None  # noqa: S101
    for select in scan.tree.find_all(exp.Select):
        if select.args.get("from") is None:
            return _node_violation(scan, select, near="SELECT")
    return None


@detector("derived_table_alias")
def _detect_derived_table_alias(scan: ScanInput, args: Mapping[str, Any]) -> Violation | None:  # noqa: ARG001
    assert scan.tree is not None  # noqa: S101
    for subquery in scan.tree.find_all(exp.Subquery):
        if isinstance(subquery.parent, (exp.From, exp.Join)) and not subquery.alias:
            return _node_violation(scan, subquery, near="(")
    return None


@detector("distinct_in_window")
def _detect_distinct_in_window(scan: ScanInput, args: Mapping[str, Any]) -> Violation | None:  # noqa: ARG001
    assert scan.tree is not None  # noqa: S101
    for window in scan.tree.find_all(exp.Window):
        func = window.this
        if func is not None and func.find(exp.Distinct) is not None:
            return _node_violation(scan, window, near=func.sql())
    return None


@detector("nested_aggregate")
def _detect_nested_aggregate(scan: ScanInput, args: Mapping[str, Any]) -> Violation | None:  # noqa: ARG001
    assert scan.tree is not None  # noqa: S101
    for agg in scan.tree.find_all(exp.AggFunc):
        parent = agg.parent
        while parent is not None and not isinstance(parent, (exp.Select, exp.Subquery, exp.Window)):
            if isinstance(parent, exp.AggFunc) and not isinstance(parent.parent, exp.Window):
                return _node_violation(scan, parent, near=parent.sql())
            parent = parent.parent
    return None


@detector("order_by_not_grouped")
def _detect_order_by_not_grouped(scan: ScanInput, args: Mapping[str, Any]) -> Violation | None:  # noqa: ARG001
    assert scan.tree is not None  # noqa: S101
    for select in scan.tree.find_all(exp.Select):
        order = select.args.get("order")
        group = select.args.get("group")
        if order is None or (group is None and not _aggregates_in_scope(select)):
            continue
        group_exprs = list(group.expressions) if group is not None else []
        group_keys = {g.sql().lower() for g in group_exprs}
        group_names = {col.name.lower() for g in group_exprs for col in g.find_all(exp.Column)}
        aliases = {item.alias.lower() for item in select.expressions if isinstance(item, exp.Alias)}
        for ordered in order.expressions:
            target = ordered.this
            if isinstance(target, exp.Literal) or target.find(exp.AggFunc) is not None:
                continue
            if target.sql().lower() in group_keys:
                continue
            for col in target.find_all(exp.Column):
                if col.name.lower() not in aliases and col.name.lower() not in group_names:
                    return _node_violation(scan, col, near=col.sql())
    return None


@detector("scalar_subquery_rows")
def _detect_scalar_subquery_rows(scan: ScanInput, args: Mapping[str, Any]) -> Violation | None:  # noqa: ARG001
    assert scan.tree is not None  # noqa: S101
    for comparison in scan.tree.find_all(*COMPARISONS):
        for side in (comparison.this, comparison.expression):
            if not isinstance(side, exp.Subquery) or not isinstance(side.this, exp.Select):
                continue
            inner = side.this
            # Only ranked lookups without a row bound are rejected.
            if inner.args.get("order") is None or _limited(inner):
                continue
            if inner.args.get("group") is None and all(_is_aggregate_expr(e) for e in inner.expressions):
                continue
            return _node_violation(scan, side, near=side.sql())
    return None


@detector("scalar_subquery_columns")
def _detect_scalar_subquery_columns(scan: ScanInput, args: Mapping[str, Any]) -> Violation | None:  # noqa: ARG001
    assert scan.tree is not None  # noqa: S101
    for subquery in scan.tree.find_all(exp.Subquery):
        parent = subquery.parent
        scalar_slot = isinstance(parent, COMPARISONS) or isinstance(parent, exp.Select) or (
            isinstance(parent, exp.Alias) and isinstance(parent.parent, exp.Select)
        )
        inner = subquery.this
        if scalar_slot and isinstance(inner, exp.Select) and len(inner.expressions) > 1:
            return _node_violation(scan, subquery, near=subquery.sql())
    return None
