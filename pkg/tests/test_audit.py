from __future__ import annotations

import re
from dataclasses import dataclass

import pytest
from shop import AVG_SQL, GOLD_SQL

from dialsql.audit.audit import AuditReport, audit
from dialsql.audit.synthesize import synthesize_query
from dialsql.audit.trace import Predicate, derive_trace, parse_sql
from dialsql.core.errors import FixtureMiss, ParseError
from dialsql.core.model import DialectId, SchemaCatalog, SqlText
from dialsql.llm.backends import ScriptedBackend
from dialsql.planner.build import parse_plan_reply
from dialsql.planner.model import DialectAwarePlan, LogicalPlan

PG = DialectId.POSTGRESQL

CROSS_SQL = (
    "SELECT customers.city, SUM(orders.amount) AS total_amount FROM orders CROSS JOIN customers "
    "WHERE orders.status = 'paid' GROUP BY customers.city ORDER BY total_amount DESC"
)

MUTATIONS = [
    pytest.param(
        GOLD_SQL.replace(" WHERE orders.status = 'paid'", ""),
        "constraints",
        "constraints: missing predicate (status = paid)",
        id="dropped-filter",
    ),
    pytest.param(
        GOLD_SQL.replace("= 'paid'", "<> 'paid'"),
        "constraints",
        "constraints: comparator flip on status: = became <>",
        id="flipped-comparator",
    ),
    pytest.param(AVG_SQL, "computation", "computation: SUM→AVG on amount", id="wrong-aggregate"),
    pytest.param(
        GOLD_SQL.replace("GROUP BY customers.city", "GROUP BY customers.city, orders.status"),
        "computation",
        "computation: extra group dimension status",
        id="extra-grouping",
    ),
    pytest.param(CROSS_SQL, "topology", "topology: missing join orders ~ customers", id="cross-join"),
    pytest.param(
        GOLD_SQL.replace("total_amount", "total"),
        "projection",
        "projection: missing alias total_amount",
        id="renamed-output",
    ),
]


def test_gold_query_passes(shop_plan: DialectAwarePlan) -> None:
    report = audit(SqlText(GOLD_SQL, PG), shop_plan)
    assert report.passed, report.details
    assert report.failed() == []


@pytest.mark.parametrize(("sql", "invariant", "detail"), MUTATIONS)
def test_mutation_is_caught(shop_plan: DialectAwarePlan, sql: str, invariant: str, detail: str) -> None:
    report = audit(SqlText(sql, PG), shop_plan)
    assert not report.passed
    assert report.failed() == [invariant]
    assert detail in report.details


def test_set_operations_are_unmodeled(shop_plan: DialectAwarePlan) -> None:
    sql = "SELECT customers.city FROM customers UNION SELECT customers.city FROM customers"
    report = audit(SqlText(sql, PG), shop_plan)
    assert "topology: unmodeled construct UNION" in report.details


def test_unparseable_query(shop_plan: DialectAwarePlan) -> None:
    with pytest.raises(ParseError):
        audit(SqlText("SELECT (city FROM customers", PG), shop_plan)


def test_synthesized_query_passes_its_own_audit(shop_plan: DialectAwarePlan) -> None:
    sql = synthesize_query(shop_plan)
    assert sql.dialect is PG
    assert "JOIN customers ON customers.customer_id = orders.customer_id" in sql.text
    assert "WHERE orders.status = 'paid'" in sql.text
    assert "SUM(orders.amount) AS total_amount" in sql.text
    assert audit(sql, shop_plan).passed


def test_report_survives_serialization(shop_plan: DialectAwarePlan) -> None:
    report = audit(SqlText(AVG_SQL, PG), shop_plan)
    again = AuditReport.from_dict(report.to_dict())
    assert again.failed() == report.failed()
    assert again.details == report.details


@pytest.mark.parametrize(
    ("dialect", "condition"),
    [
        (DialectId.POSTGRESQL, "EXTRACT(YEAR FROM d) = 2017"),
        (DialectId.POSTGRESQL, "DATE_PART('year', d) = 2017"),
        (DialectId.MYSQL, "YEAR(d) = 2017"),
        (DialectId.SQLITE, "strftime('%Y', d) = '2017'"),
        (DialectId.POSTGRESQL, "d BETWEEN '2017-01-01' AND '2017-12-31'"),
        (DialectId.POSTGRESQL, "d >= '2017-01-01' AND d < '2018-01-01'"),
    ],
)
def test_year_filters_normalize_alike(dialect: DialectId, condition: str) -> None:
    trace = derive_trace(parse_sql(SqlText(f"SELECT id FROM t WHERE {condition}", dialect)))
    assert Predicate("d", "year=", "2017") in trace.predicates


def test_non_year_range_is_kept() -> None:
    trace = derive_trace(parse_sql(SqlText("SELECT id FROM t WHERE d >= '2017-02-01' AND d < '2018-01-01'", PG)))
    assert Predicate("d", ">=", "2017-02-01") in trace.predicates
    assert Predicate("d", "<", "2018-01-01") in trace.predicates


def _recent_orders_plan(shop_schema: SchemaCatalog) -> DialectAwarePlan:
    reply = """\
[1] SRC | read orders | orders.order_id
[2] FLT | keep only recent rows of orders.order_date | orders.order_date
"""
    return DialectAwarePlan(base=LogicalPlan.of(parse_plan_reply(reply, shop_schema)), enriched=(), dialect=PG)


def test_free_text_filter_checked_by_column_use(shop_schema: SchemaCatalog) -> None:
    plan = _recent_orders_plan(shop_schema)
    # An empty scripted backend fails loudly if the model were consulted.
    silent = ScriptedBackend()
    missing = audit(SqlText("SELECT orders.order_id FROM orders", PG), plan, silent, deterministic=True)
    assert missing.details == ["constraints: operator 1 not realized: no use of order_date"]
    used = SqlText("SELECT orders.order_id FROM orders WHERE orders.order_date > '2018-01-01'", PG)
    assert audit(used, plan, silent, deterministic=True).passed


def test_free_text_filter_adjudicated_by_model(shop_schema: SchemaCatalog) -> None:
    plan = _recent_orders_plan(shop_schema)
    sql = SqlText("SELECT orders.order_id FROM orders WHERE orders.order_date > '2018-01-01'", PG)

    approving = ScriptedBackend({"audit_adjudicate": "PASS"})
    assert audit(sql, plan, approving, deterministic=False).passed
    assert "keep only recent rows" in approving.prompts("audit_adjudicate")[0]

    rejecting = ScriptedBackend({"audit_adjudicate": "FAIL: no recency window"})
    report = audit(sql, plan, rejecting, deterministic=False)
    assert report.details == ["constraints: operator 1 not realized: no recency window"]

    with pytest.raises(FixtureMiss):
        audit(sql, plan, ScriptedBackend(), deterministic=False)


@dataclass(frozen=True)
class PlanCase:
    first: str
    filter_text: str
    aggregate: str
    measured: str
    group: str
    group_alias: str
    value_alias: str

    def reply(self) -> str:
        second = "customers" if self.first == "orders" else "orders"
        return (
            f"[1] SRC | read {self.first}.customer_id joined with {second}.customer_id"
            f" | {self.first}.customer_id, {second}.customer_id\n"
            f"[2] FLT | keep only rows with {self.filter_text}\n"
            f"[3] AGG | {self.aggregate} {self.measured} per {self.group} | {self.measured}, {self.group}\n"
            f"[4] ORG | output {self.group} named {self.group_alias} and the aggregated value"
            f" named {self.value_alias}, sorted descending by it | {self.group}\n"
        )


PLAN_CASES = [
    PlanCase("orders", "orders.status equal to 'paid'", "total", "orders.amount", "customers.city", "town", "total_amount"),
    PlanCase("customers", "orders.amount greater than 50", "average", "orders.amount", "customers.name", "shopper", "avg_spend"),
    PlanCase("orders", "customers.city equal to 'Laoag'", "largest", "orders.amount", "orders.status", "order_state", "top_sale"),
    PlanCase("orders", "year 2018 of orders.order_date", "total", "orders.amount", "customers.city", "city_name", "yearly_total"),
    PlanCase("customers", "orders.status not equal to 'open'", "smallest", "orders.amount", "customers.city", "home_city", "low_sale"),
    PlanCase("orders", "orders.amount at least 20", "total", "orders.amount", "orders.status", "status_name", "revenue"),
    PlanCase("customers", "customers.name equal to 'Ana'", "average", "orders.amount", "orders.order_date", "order_day", "mean_amount"),
    PlanCase("orders", "orders.amount less than 100", "largest", "orders.order_id", "customers.city", "place", "last_order"),
    PlanCase("customers", "orders.status equal to 'paid'", "smallest", "orders.order_date", "customers.name", "buyer", "first_order"),
    PlanCase("orders", "customers.city not equal to 'Batac'", "total", "orders.amount", "customers.name", "client", "spend"),
]  # fmt: skip
SWAPPED_AGGREGATES = {"SUM": "AVG", "AVG": "SUM", "MAX": "MIN", "MIN": "MAX"}


def _case_plan(case: PlanCase, shop_schema: SchemaCatalog) -> DialectAwarePlan:
    return DialectAwarePlan(base=LogicalPlan.of(parse_plan_reply(case.reply(), shop_schema)), enriched=(), dialect=PG)


def _drop_filter(sql: str, _case: PlanCase) -> tuple[str, str]:
    kept = [line for line in sql.splitlines() if not line.startswith("WHERE ")]
    return "\n".join(kept), "constraints: missing predicate"


def _swap_aggregate(sql: str, case: PlanCase) -> tuple[str, str]:
    function = re.search(r"\b(SUM|AVG|MAX|MIN)\(", sql)
    assert function is not None
    name = function.group(1)
    column = case.measured.split(".")[1]
    mutated = sql.replace(f"{name}(", f"{SWAPPED_AGGREGATES[name]}(")
    return mutated, f"computation: {name}→{SWAPPED_AGGREGATES[name]} on {column}"


def _drop_join(sql: str, _case: PlanCase) -> tuple[str, str]:
    return re.sub(r"\bJOIN (\w+) ON \S+ = \S+", r"CROSS JOIN \1", sql), "topology: missing join"


def _swap_aliases(sql: str, case: PlanCase) -> tuple[str, str]:
    mutated = (
        sql.replace(f" AS {case.group_alias}", " AS swap_marker")
        .replace(f" AS {case.value_alias}", f" AS {case.group_alias}")
        .replace(" AS swap_marker", f" AS {case.value_alias}")
    )
    return mutated, f"projection: alias {case.group_alias} names a computed value, expected {case.group}"


MUTATORS = {
    "constraints": _drop_filter,
    "computation": _swap_aggregate,
    "topology": _drop_join,
    "projection": _swap_aliases,
}


@pytest.mark.parametrize("case", PLAN_CASES, ids=[c.group_alias for c in PLAN_CASES])
def test_synthesized_pairs_pass(case: PlanCase, shop_schema: SchemaCatalog) -> None:
    plan = _case_plan(case, shop_schema)
    report = audit(synthesize_query(plan), plan)
    assert report.passed, report.details


@pytest.mark.parametrize("invariant", sorted(MUTATORS))
@pytest.mark.parametrize("case", PLAN_CASES, ids=[c.group_alias for c in PLAN_CASES])
def test_targeted_mutation(case: PlanCase, invariant: str, shop_schema: SchemaCatalog) -> None:
    plan = _case_plan(case, shop_schema)
    gold = synthesize_query(plan).text
    mutated, detail = MUTATORS[invariant](gold, case)
    assert mutated != gold

    report = audit(SqlText(mutated, PG), plan)
    assert report.failed() == [invariant]
    assert any(line.startswith(detail) for line in report.details), report.details


def test_swapped_aliases_on_shop_plan(shop_plan: DialectAwarePlan) -> None:
    sql = GOLD_SQL.replace("customers.city,", "customers.city AS total_amount,").replace("AS total_amount FROM", "AS town FROM")
    assert "named total_amount" in shop_plan.base.operators[-1].description
    report = audit(SqlText(sql, PG), shop_plan)
    assert report.failed() == ["projection"]
    assert "projection: alias total_amount names column customers.city, expected a computed value" in report.details
