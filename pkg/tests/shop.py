"""Shared scenarios: the shop plan reply, gold query and broken variants, and a documentation backend."""

from __future__ import annotations

from dialsql.core.model import DialectId, SchemaCatalog
from dialsql.llm.backends import ScriptedBackend
from dialsql.planner.build import order_operators, parse_plan_reply
from dialsql.planner.label import label_operators
from dialsql.planner.model import DialectAwarePlan, StandardizedOperator

QUESTION = "What is the total paid amount per city, largest first?"

PLAN_REPLY = """\
[1] SRC | read orders.customer_id joined with customers.customer_id | orders.customer_id, customers.customer_id
[2] FLT | keep only rows with orders.status equal to 'paid' | orders.status
[3] AGG | total orders.amount per customers.city | orders.amount, customers.city
[4] ORG | output customers.city and the aggregated amount named total_amount, sorted descending by it | customers.city
"""
COUNT_PLAN_REPLY = """\
[1] SRC | read orders | orders.order_id
[2] FLT | keep only rows with orders.status equal to 'paid' | orders.status
[3] AGG | count orders.order_id | orders.order_id
"""
CATEGORY_REPLY = "pagination_row_limiting | sort the grouped rows by the aggregated amount in descending order"

GOLD_SQL = (
    "SELECT customers.city, SUM(orders.amount) AS total_amount FROM orders "
    "JOIN customers ON orders.customer_id = customers.customer_id "
    "WHERE orders.status = 'paid' GROUP BY customers.city ORDER BY total_amount DESC"
)
COUNT_SQL = "SELECT COUNT(*) FROM orders WHERE orders.status = 'paid'"
LIMITED_SQL = GOLD_SQL + " LIMIT 5"
FETCH_SQL = GOLD_SQL + " FETCH FIRST 5 ROWS ONLY"
AVG_SQL = GOLD_SQL.replace("SUM(orders.amount)", "AVG(orders.amount)")

DISTILL_REPLY = (
    "INCORRECT_PATTERN: rows limited with LIMIT n after ORDER BY\n"
    "ROOT_CAUSE: the engine has no LIMIT clause; row limiting is written FETCH FIRST n ROWS ONLY"
)


def fenced(sql: str) -> str:
    return f"Here is the query.\n```sql\n{sql}\n```\n"


def build_shop_plan(schema: SchemaCatalog, dialect: DialectId) -> DialectAwarePlan:
    """The shop plan, labeled and categorized without a model."""
    plan = label_operators(order_operators(parse_plan_reply(PLAN_REPLY, schema)), schema)
    enriched = tuple(
        StandardizedOperator("pagination_row_limiting", "sort rows by the aggregated amount", op.order_index)
        for op in plan.sensitive_operators()
    )
    return DialectAwarePlan(base=plan, enriched=enriched, dialect=dialect)


def _section_title(prompt: str) -> str:
    lines = prompt.splitlines()
    return lines[lines.index("Section:") + 1].strip()


def doc_backend() -> ScriptedBackend:
    """Answers documentation-entry prompts with fields derived from the section title."""
    return ScriptedBackend(
        {
            "kb_function_entry": lambda req: (
                f"SCENARIOS: use {_section_title(req.rendered_prompt)}\n"
                f"SPECIFICATION: documented behavior of {_section_title(req.rendered_prompt)}\n"
                f"IMPLEMENTATION: {_section_title(req.rendered_prompt)}(<column>)"
            ),
            "kb_constraint_entry": lambda req: (
                f"RULE: follow the {_section_title(req.rendered_prompt)} restriction\nSIGNATURES: ORA-00933: *"
            ),
        },
    )
