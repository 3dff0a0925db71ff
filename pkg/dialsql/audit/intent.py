"""Structured intents read from plan operator descriptions."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from dialsql.audit.trace import YEAR_FILTER, Predicate, normalize_literal
from dialsql.planner.mining import GROUPING_CUES
from dialsql.planner.model import MacroOperator, MacroOperatorKind, OperatorRef

# Longest phrases first so "greater than or equal to" wins over "greater than".
COMPARATOR_PHRASES: tuple[tuple[str, str], ...] = (
    ("greater than or equal to", ">="),
    ("less than or equal to", "<="),
    ("not equal to", "<>"),
    ("is not", "<>"),
    ("differs from", "<>"),
    ("at least", ">="),
    ("at most", "<="),
    ("greater than", ">"),
    ("more than", ">"),
    ("exceeds", ">"),
    ("above", ">"),
    ("after", ">"),
    ("less than", "<"),
    ("fewer than", "<"),
    ("below", "<"),
    ("before", "<"),
    ("equal to", "="),
    ("equals", "="),
    ("is", "="),
    (">=", ">="),
    ("<=", "<="),
    ("<>", "<>"),
    ("!=", "<>"),
    (">", ">"),
    ("<", "<"),
    ("=", "="),
)
AGGREGATE_WORDS: tuple[tuple[str, str], ...] = (
    ("average", "AVG"),
    ("avg", "AVG"),
    ("mean", "AVG"),
    ("count", "COUNT"),
    ("number of", "COUNT"),
    ("how many", "COUNT"),
    ("maximum", "MAX"),
    ("max", "MAX"),
    ("largest", "MAX"),
    ("minimum", "MIN"),
    ("min", "MIN"),
    ("smallest", "MIN"),
    ("sum", "SUM"),
    ("total", "SUM"),
    ("add up", "SUM"),
)
SORT_CUES = (" sorted", " ordered", " ranked", " ascending", " descending", " highest", " lowest", " top ")

_QUOTED = re.compile(r"'((?:[^']|'')*)'")
_NUMBER = re.compile(r"(?<![\w.⟩])-?\d+(?:\.\d+)?(?![\w.])")
_ALIAS = re.compile(r"\b(?:aliased|named|labeled|labelled|called)\s+(?:as\s+)?[`'\"]?([A-Za-z_]\w*)", re.IGNORECASE)
_REF_MARK = "⟨ref⟩"


@dataclass(frozen=True, slots=True)
class AggregateIntent:
    function: str
    column: str  # bare lower-case name or "*"
    ref: OperatorRef | None = None


@dataclass(frozen=True, slots=True)
class FilterIntent:
    predicate: Predicate
    ref: OperatorRef
    post_aggregate: bool = False


@dataclass(slots=True)
class PlanIntent:
    tables: list[str] = field(default_factory=list)
    edges: list[tuple[OperatorRef, OperatorRef]] = field(default_factory=list)
    filters: list[FilterIntent] = field(default_factory=list)
    aggregates: list[AggregateIntent] = field(default_factory=list)
    group_refs: list[OperatorRef] = field(default_factory=list)
    projection_refs: list[OperatorRef] = field(default_factory=list)
    aliases: list[str] = field(default_factory=list)
    # Declared alias -> the projected ref it names; None for computed outputs.
    alias_owner: dict[str, OperatorRef | None] = field(default_factory=dict)
    # Operators whose intent could not be read structurally.
    free_text: list[MacroOperator] = field(default_factory=list)
    has_aggregation: bool = False
    has_organization: bool = False

    @property
    def group_dims(self) -> set[str]:
        return {ref.column.lower() for ref in self.group_refs}

    @property
    def projected_columns(self) -> set[str]:
        return {ref.column.lower() for ref in self.projection_refs}


def _without_refs(op: MacroOperator) -> str:
    text = op.description
    for ref in sorted(op.refs, key=lambda r: -len(r.label)):
        text = re.sub(re.escape(ref.label), _REF_MARK, text, flags=re.IGNORECASE)
        text = re.sub(rf"\b{re.escape(ref.key)}\b", _REF_MARK, text, flags=re.IGNORECASE)
    return text


def _has_word(text: str, phrase: str) -> bool:
    if phrase[0].isalpha():
        return re.search(rf"\b{re.escape(phrase)}\b", text) is not None
    return phrase in text


def read_filter(op: MacroOperator, post_aggregate: bool = False) -> FilterIntent | None:
    """``"transaction_logs.action (TEXT) is 'viewed'"`` -> ``action = viewed``."""
    if not op.refs:
        return None
    text = _without_refs(op)
    quoted = _QUOTED.search(text)
    number = _NUMBER.search(_QUOTED.sub("", text))
    if quoted:
        value = normalize_literal(quoted.group(1).replace("''", "'"))
    elif number:
        value = normalize_literal(number.group(0))
    else:
        return None
    lowered = text.lower()
    column = op.refs[0].column.lower()
    if re.search(r"\byear\b", lowered) and re.fullmatch(r"\d{4}", value):
        return FilterIntent(Predicate(column, YEAR_FILTER, value), op.refs[0], post_aggregate)
    for phrase, comparator in COMPARATOR_PHRASES:
        if _has_word(lowered, phrase):
            return FilterIntent(Predicate(column, comparator, value), op.refs[0], post_aggregate)
    return None


def _split_at(op: MacroOperator, cues: tuple[str, ...]) -> tuple[list[OperatorRef], list[OperatorRef]]:
    lowered = op.description.lower()
    cut = min((lowered.find(cue) for cue in cues if cue in lowered), default=-1)
    if cut < 0:
        return list(op.refs), []
    before = [ref for ref in op.refs if lowered.find(ref.key.lower()) < cut]
    after = [ref for ref in op.refs if ref not in before]
    return before, after


def read_aggregate(op: MacroOperator) -> tuple[AggregateIntent | None, list[OperatorRef]]:
    """The aggregate function and measured column, plus the grouping refs."""
    measured, grouping = _split_at(op, GROUPING_CUES)
    lowered = _without_refs(op).lower()
    found = [(m.start(), fn) for word, fn in AGGREGATE_WORDS for m in re.finditer(rf"\b{re.escape(word)}\b", lowered)]
    if not found:
        return None, grouping
    function = min(found)[1]
    ref = measured[0] if measured else None
    column = ref.column.lower() if ref is not None and function != "COUNT" else "*"
    return AggregateIntent(function=function, column=column, ref=ref), grouping


def read_plan(operators: tuple[MacroOperator, ...] | list[MacroOperator]) -> PlanIntent:
    """Collect the structured intents of every operator, in plan order."""
    intent = PlanIntent()
    seen_aggregate = False
    for op in operators:
        if op.kind == MacroOperatorKind.SRC:
            for ref in op.refs:
                if ref.table.lower() not in intent.tables:
                    intent.tables.append(ref.table.lower())
            pairs = list(zip(op.refs[0::2], op.refs[1::2]))
            intent.edges += [(a, b) for a, b in pairs if a.table.lower() != b.table.lower()]
        elif op.kind == MacroOperatorKind.FLT:
            parsed = read_filter(op, post_aggregate=seen_aggregate)
            if parsed is None:
                intent.free_text.append(op)
            else:
                intent.filters.append(parsed)
        elif op.kind == MacroOperatorKind.AGG:
            seen_aggregate = True
            intent.has_aggregation = True
            aggregate, grouping = read_aggregate(op)
            if aggregate is None:
                intent.free_text.append(op)
            else:
                intent.aggregates.append(aggregate)
            intent.group_refs += [ref for ref in grouping if ref not in intent.group_refs]
        elif op.kind == MacroOperatorKind.CAL:
            intent.free_text.append(op)
        elif op.kind == MacroOperatorKind.ORG:
            intent.has_organization = True
            projected, _ = _split_at(op, SORT_CUES)
            intent.projection_refs += [ref for ref in projected if ref not in intent.projection_refs]
            for alias, owner in _aliases(op):
                if alias not in intent.aliases:
                    intent.aliases.append(alias)
                    intent.alias_owner[alias] = owner

    if not intent.tables:
        for op in operators:
            for ref in op.refs:
                if ref.table.lower() not in intent.tables:
                    intent.tables.append(ref.table.lower())
    return intent


def _aliases(op: MacroOperator) -> list[tuple[str, OperatorRef | None]]:
    """Declared output aliases, each with the ref it directly follows, if any."""
    found: list[tuple[str, OperatorRef | None]] = []
    for match in _ALIAS.finditer(op.description):
        prefix = op.description[: match.start()].rstrip().rstrip(",").rstrip().lower()
        owner = next(
            (ref for ref in op.refs if prefix.endswith(ref.label.lower()) or prefix.endswith(ref.key.lower())),
            None,
        )
        found.append((match.group(1).lower(), owner))
    return found
