"""SQL parsing and operator-trace derivation with dialect normalization."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import sqlglot
from sqlglot import exp
from sqlglot.errors import ParseError as SqlglotParseError
from sqlglot.errors import TokenError

from dialsql.core.errors import ParseError
from dialsql.core.model import SqlText
from dialsql.dialects.profiles import profile_for

COMPARATORS: dict[type[exp.Expression], str] = {
    exp.EQ: "=",
    exp.NEQ: "<>",
    exp.GT: ">",
    exp.GTE: ">=",
    exp.LT: "<",
    exp.LTE: "<=",
}
FLIPPED = {"=": "=", "<>": "<>", ">": "<", ">=": "<=", "<": ">", "<=": ">="}
YEAR_FILTER = "year="
# Column-to-column equality; a join condition rather than a filter.
COLUMN_EQUALITY = "col="
# Unit arguments and format strings that select the year of a date.
YEAR_UNITS = frozenset({"year", "yyyy", "yy", "%y"})

_ISO_DATE = re.compile(r"^(\d{4})-(\d{1,2})-(\d{1,2})(?:[ T].*)?$")


@dataclass(frozen=True, slots=True, order=True)
class Predicate:
    column: str
    comparator: str
    value: str

    def describe(self) -> str:
        return f"{self.column} {self.comparator} {self.value}".strip()


@dataclass(frozen=True, slots=True)
class JoinEdge:
    tables: frozenset[str]
    # Sorted bare column-name pairs of the join condition.
    keys: frozenset[tuple[str, str]] = frozenset()


@dataclass(frozen=True, slots=True)
class OperatorTrace:
    tables: frozenset[str] = frozenset()
    joins: frozenset[JoinEdge] = frozenset()
    predicates: frozenset[Predicate] = frozenset()
    post_predicates: frozenset[Predicate] = frozenset()
    aggregates: frozenset[tuple[str, str]] = frozenset()
    group_dims: frozenset[str] = frozenset()
    projection: tuple[tuple[str, str | None], ...] = ()
    # Output alias to the column it exposes, None when it names a computed value.
    bindings: tuple[tuple[str, str | None], ...] = ()
    projected_columns: frozenset[str] = frozenset()
    columns: frozenset[str] = frozenset()
    unmodeled: tuple[str, ...] = field(default=())


def parse_sql(sql: SqlText) -> exp.Expression:
    """Parse one query under its dialect's grammar profile.

    Raises
    ------
    ParseError
        With line and column when the text is not a single parseable query.

    """
    profile = profile_for(sql.dialect)
    try:
        statements = [s for s in sqlglot.parse(sql.text, read=profile.read) if s is not None]
    except SqlglotParseError as exc:
        detail = exc.errors[0] if exc.errors else {}
        raise ParseError(str(exc), line=detail.get("line"), col=detail.get("col")) from exc
    except TokenError as exc:
        raise ParseError(str(exc)) from exc
    if len(statements) != 1:
        msg = f"Expected exactly one statement, found {len(statements)}."
        raise ParseError(msg)
    tree = statements[0]
    if not isinstance(tree, exp.Query):
        msg = f"Statement is not a query: {tree.key.upper()}."
        raise ParseError(msg)
    return tree


def normalize_literal(value: str) -> str:
    """Canonical text of a literal: ISO dates zero-padded, integral numbers without decimals."""
    text = value.strip()
    date = _ISO_DATE.match(text)
    if date:
        year, month, day = date.groups()
        return f"{year}-{int(month):02d}-{int(day):02d}"
    try:
        number = float(text)
    except ValueError:
        return text
    return str(int(number)) if number.is_integer() else repr(number)


def literal_value(node: exp.Expression) -> str | None:
    """Literal text of `node`, looking through casts and date constructors."""
    if isinstance(node, exp.Literal):
        return normalize_literal(node.this)
    if isinstance(node, exp.Neg) and isinstance(node.this, exp.Literal):
        return normalize_literal(f"-{node.this.this}")
    if isinstance(node, exp.Boolean):
        return "true" if node.this else "false"
    if isinstance(node, exp.Null):
        return "null"
    if isinstance(node, (exp.Cast, exp.Func)) and not isinstance(node, exp.AggFunc):
        literals = list(node.find_all(exp.Literal))
        columns = list(node.find_all(exp.Column))
        if literals and not columns and literals[0].is_string:
            return normalize_literal(literals[0].this)
    return None


def column_key(node: exp.Expression) -> str:
    """Bare lower-case column name; expressions over one column reduce to it."""
    if isinstance(node, exp.Column):
        return node.name.lower()
    names = sorted({col.name.lower() for col in node.find_all(exp.Column)})
    if len(names) == 1:
        return names[0]
    return node.sql().lower()


def _year_source(node: exp.Expression) -> exp.Expression | None:
    """The date operand when `node` extracts a year, else ``None``."""
    if isinstance(node, exp.Extract):
        return node.expression if node.this.name.upper() == "YEAR" else None
    if isinstance(node, exp.Year):
        return node.this
    if not isinstance(node, exp.Func) or isinstance(node, exp.AggFunc):
        return None
    args = list(node.iter_expressions())
    units = [a for a in args if isinstance(a, (exp.Literal, exp.Var, exp.Column)) and a.name.strip().lower() in YEAR_UNITS]
    operands = [a for a in args if a not in units and next(a.find_all(exp.Column), None) is not None]
    if (units or node.sql_name().upper() == "YEAR") and len(operands) == 1:
        return operands[0]
    return None


def _comparison(node: exp.Expression) -> list[Predicate]:
    comparator = COMPARATORS[type(node)]
    left, right = node.left, node.right
    if literal_value(left) is not None and literal_value(right) is None:
        left, right = right, left
        comparator = FLIPPED[comparator]
    value = literal_value(right)
    if value is None:
        if comparator == "=" and isinstance(left, exp.Column) and isinstance(right, exp.Column):
            keys = sorted([column_key(left), column_key(right)])
            return [Predicate(keys[0], COLUMN_EQUALITY, keys[1])]
        return [Predicate(column_key(left), comparator, column_key(right))]
    year_of = _year_source(left) if comparator == "=" else None
    if year_of is not None:
        return [Predicate(column_key(year_of), YEAR_FILTER, value[:4])]
    return [Predicate(column_key(left), comparator, value)]


def _year_of_bounds(low: str, high: str, exclusive: bool) -> str | None:
    low_date = _ISO_DATE.match(low)
    high_date = _ISO_DATE.match(high)
    if not (low_date and high_date) or low[5:] != "01-01":
        return None
    year = int(low_date.group(1))
    if exclusive:
        return str(year) if high == f"{year + 1}-01-01" else None
    return str(year) if high == f"{year}-12-31" else None


def _predicates_of(node: exp.Expression) -> list[Predicate]:
    node = node.unnest() if isinstance(node, exp.Paren) else node
    if isinstance(node, exp.And):
        return _predicates_of(node.left) + _predicates_of(node.right)
    if type(node) in COMPARATORS:
        return _comparison(node)
    if isinstance(node, exp.Between):
        low, high = literal_value(node.args["low"]), literal_value(node.args["high"])
        column = column_key(node.this)
        year = _year_of_bounds(low, high, exclusive=False) if low and high else None
        if year:
            return [Predicate(column, YEAR_FILTER, year)]
        return [Predicate(column, ">=", low or node.args["low"].sql()), Predicate(column, "<=", high or node.args["high"].sql())]
    if isinstance(node, exp.In):
        values = sorted(literal_value(v) or v.sql() for v in node.expressions)
        return [Predicate(column_key(node.this), "in", ",".join(values))]
    if isinstance(node, exp.Like):
        return [Predicate(column_key(node.this), "like", literal_value(node.expression) or node.expression.sql())]
    if isinstance(node, exp.Is):
        return [Predicate(column_key(node.this), "is", "null")]
    if isinstance(node, exp.Not) and isinstance(node.this, exp.Is):
        return [Predicate(column_key(node.this.this), "is not", "null")]
    return [Predicate(node.sql().lower(), "expr", "")]


def _fold_year_ranges(predicates: list[Predicate]) -> list[Predicate]:
    """``d >= 'Y-01-01' AND d < 'Y+1-01-01'`` becomes one year filter."""
    result = list(predicates)
    for low in predicates:
        if low.comparator != ">=":
            continue
        for high in predicates:
            if high.column != low.column or high.comparator != "<":
                continue
            year = _year_of_bounds(low.value, high.value, exclusive=True)
            if year and low in result and high in result:
                result.remove(low)
                result.remove(high)
                result.append(Predicate(low.column, YEAR_FILTER, year))
    return result


def _condition_predicates(condition: exp.Expression | None) -> list[Predicate]:
    if condition is None:
        return []
    return _fold_year_ranges(_predicates_of(condition))


def _table_aliases(tree: exp.Expression, cte_names: set[str]) -> dict[str, str]:
    aliases: dict[str, str] = {}
    for table in tree.find_all(exp.Table):
        name = table.name.lower()
        if not name or name in cte_names:
            continue
        aliases[table.alias_or_name.lower()] = name
        aliases[name] = name
    return aliases


def _join_edges(select: exp.Select, aliases: dict[str, str]) -> set[JoinEdge]:
    edges: set[JoinEdge] = set()
    conditions = [join.args.get("on") for join in select.args.get("joins") or []]
    where = select.args.get("where")
    conditions.append(where.this if where is not None else None)
    for condition in conditions:
        if condition is None:
            continue
        for eq in condition.find_all(exp.EQ):
            left, right = eq.left, eq.right
            if not (isinstance(left, exp.Column) and isinstance(right, exp.Column)):
                continue
            left_table = aliases.get(left.table.lower())
            right_table = aliases.get(right.table.lower())
            if left_table is None or right_table is None or left_table == right_table:
                continue
            key = tuple(sorted((left.name.lower(), right.name.lower())))
            edges.add(JoinEdge(tables=frozenset({left_table, right_table}), keys=frozenset({key})))
    return edges


def _bound_column(node: exp.Expression, aliases: dict[str, str]) -> str | None:
    if not isinstance(node, exp.Column):
        return None
    if not node.table:
        return node.name.lower()
    return f"{aliases.get(node.table.lower(), node.table.lower())}.{node.name.lower()}"


def derive_trace(tree: exp.Expression) -> OperatorTrace:
    """Map a parsed query onto logical operators.

    Year extraction through EXTRACT, YEAR(), DATE_PART/DATEPART, strftime/TO_CHAR
    and year-bounded ranges all normalize to one ``year=`` predicate; anything
    unrecognized passes through verbatim as an ``expr`` predicate.
    """
    unmodeled = tuple(sorted({node.key.upper() for node in tree.find_all(exp.Union, exp.Intersect, exp.Except)}))
    cte_names = {cte.alias_or_name.lower() for cte in tree.find_all(exp.CTE)}
    aliases = _table_aliases(tree, cte_names)

    predicates: list[Predicate] = []
    post_predicates: list[Predicate] = []
    aggregates: set[tuple[str, str]] = set()
    group_dims: set[str] = set()
    edges: set[JoinEdge] = set()
    for select in tree.find_all(exp.Select):
        where = select.args.get("where")
        having = select.args.get("having")
        predicates += [p for p in _condition_predicates(where.this if where else None) if p.comparator != COLUMN_EQUALITY]
        post_predicates += [
            p for p in _condition_predicates(having.this if having else None) if p.comparator != COLUMN_EQUALITY
        ]
        group = select.args.get("group")
        if group is not None:
            group_dims.update(column_key(e) for e in group.expressions)
        edges |= _join_edges(select, aliases)
    for agg in tree.find_all(exp.AggFunc):
        target = agg.this
        column = "*" if target is None or isinstance(target, exp.Star) else column_key(target)
        aggregates.add((agg.sql_name().upper(), column))

    outer = tree if isinstance(tree, exp.Select) else next(iter(tree.find_all(exp.Select)), None)
    projection: list[tuple[str, str | None]] = []
    projected: set[str] = set()
    bindings: list[tuple[str, str | None]] = []
    if outer is not None:
        for item in outer.expressions:
            alias = item.alias.lower() if isinstance(item, exp.Alias) else None
            inner = item.unalias()
            projection.append((inner.sql().lower(), alias))
            if isinstance(inner, exp.Column):
                projected.add(inner.name.lower())
            if alias:
                bindings.append((alias, _bound_column(inner, aliases)))

    return OperatorTrace(
        tables=frozenset(aliases.values()),
        joins=frozenset(edges),
        predicates=frozenset(predicates),
        post_predicates=frozenset(post_predicates),
        aggregates=frozenset(aggregates),
        group_dims=frozenset(group_dims),
        projection=tuple(projection),
        bindings=tuple(bindings),
        projected_columns=frozenset(projected),
        columns=frozenset(col.name.lower() for col in tree.find_all(exp.Column)),
        unmodeled=unmodeled,
    )

