from __future__ import annotations

from decimal import Decimal

import pytest

from dialsql.core.errors import AdapterUnavailable
from dialsql.core.model import ColumnDef, DialectId, ErrorTrace, FailingSegment, SchemaCatalog, SqlText, TableDef
from dialsql.dialects.compare import cells_equal, compare_result_sets
from dialsql.dialects.embedded import EmbeddedExecutor, execute_embedded, make_executor
from dialsql.dialects.rules import load_catalog, rule_by_id
from dialsql.dialects.signature import (
    ID,
    LIT,
    NUM,
    ErrorSignature,
    escape_glob,
    literal_pattern,
    matches_pattern,
    normalize_signature,
)
from dialsql.dialects.simulate import SimulatedExecutor, simulate

CORE_RULES = {"C1", "C3", "I1", "I2", "I3", "I4", "M1", "M2", "M3", "M4", "M5", "M6", "U1", "U2", "U3", "U4"}

EXAMPLES = [
    pytest.param(rule, dialect, example, id=f"{rule.rule_id}-{dialect.value}")
    for rule in load_catalog()
    for dialect, example in sorted(rule.examples.items())
]

SEED = """
CREATE TABLE users (id INTEGER, username VARCHAR(20), score INTEGER);
INSERT INTO users VALUES (1, 'ana', 10), (2, 'ben', 30), (3, 'cy', 20);
"""


def test_catalog_covers_core_rules() -> None:
    ids = {rule.rule_id for rule in load_catalog()}
    assert CORE_RULES <= ids
    for rule_id in CORE_RULES | {"I5"}:
        rule = rule_by_id(rule_id)
        assert rule is not None
        assert rule.examples, f"{rule_id} has no example pair"


def test_detectors_run_in_rule_id_order() -> None:
    # GROUP_CONCAT (U1, lexical) and an ungrouped sort key (I3, ast) in one query.
    sql = "SELECT city, GROUP_CONCAT(ip) AS ips FROM access_logs GROUP BY city ORDER BY zone"
    outcome = simulate(SqlText(sql, DialectId.ORACLE))
    assert outcome.trace is not None
    assert outcome.trace.rule_id == "I3"


def test_unparseable_query_names_the_rejected_construct() -> None:
    outcome = simulate(SqlText("SELECT (city, GROUP_CONCAT(ip) FROM access_logs", DialectId.ORACLE))
    assert outcome.trace is not None
    assert outcome.trace.rule_id == "U1"


@pytest.mark.parametrize(("rule", "dialect", "example"), EXAMPLES)
def test_anti_example_is_rejected_by_its_rule(rule, dialect, example) -> None:
    outcome = simulate(SqlText(example.anti, dialect))
    assert not outcome.ok
    assert outcome.trace is not None
    assert outcome.trace.rule_id == rule.rule_id


@pytest.mark.parametrize(("rule", "dialect", "example"), EXAMPLES)
def test_gold_example_runs(rule, dialect, example) -> None:
    outcome = simulate(SqlText(example.gold, dialect))
    assert outcome.ok, outcome.trace


def test_oracle_limit_trace() -> None:
    outcome = SimulatedExecutor(DialectId.ORACLE).execute(SqlText("SELECT id FROM users ORDER BY id LIMIT 5", DialectId.ORACLE))
    trace = outcome.trace
    assert trace is not None
    assert trace.vendor_code == "ORA-00933"
    assert trace.failing_segment is not None
    assert trace.failing_segment.text.upper().startswith("LIMIT")


def test_same_query_is_fine_elsewhere() -> None:
    sql = "SELECT id FROM users ORDER BY id LIMIT 5"
    for dialect in (DialectId.SQLITE, DialectId.MYSQL, DialectId.POSTGRESQL, DialectId.DUCKDB):
        assert simulate(SqlText(sql, dialect)).ok


def test_unparseable_query_yields_syntax_error() -> None:
    outcome = simulate(SqlText("SELECT (id FROM users", DialectId.POSTGRESQL))
    assert not outcome.ok
    assert outcome.trace is not None
    assert outcome.trace.rule_id is None


def test_simulator_returns_no_rows() -> None:
    outcome = simulate(SqlText("SELECT id FROM users", DialectId.SQLITE))
    assert outcome.ok
    assert outcome.rows == ()


@pytest.mark.parametrize(
    ("trace", "dialect", "key"),
    [
        (
            ErrorTrace(message="ORA-00904: \"USERNAME\": invalid identifier"),
            DialectId.ORACLE,
            f"ORA-00904: {ID}: invalid identifier",
        ),
        (
            ErrorTrace(message="ERROR: column \"u.name\" does not exist", vendor_code="42703"),
            DialectId.POSTGRESQL,
            f"42703: column {ID} does not exist",
        ),
        (
            ErrorTrace(message="no such column: users.nickname"),
            DialectId.SQLITE,
            f"-: no such column: {ID}",
        ),
        (
            ErrorTrace(message="Conversion failed when converting the varchar value 'abc' to data type int 42"),
            DialectId.SQLSERVER,
            f"-: Conversion failed when converting the varchar value {LIT} to data type int {NUM}",
        ),
    ],
)
def test_signature_normalization(trace: ErrorTrace, dialect: DialectId, key: str) -> None:
    assert normalize_signature(trace, dialect).key == key


def test_signature_normalization_is_idempotent() -> None:
    first = normalize_signature(ErrorTrace(message="ORA-00904: \"X\".\"Y\": invalid identifier"), DialectId.ORACLE)
    again = normalize_signature(first.to_trace(), DialectId.ORACLE)
    assert again == first


def test_signature_of_differently_named_objects_collide() -> None:
    left = normalize_signature(ErrorTrace(message="no such table: orders"), DialectId.SQLITE)
    right = normalize_signature(ErrorTrace(message="no such table: customers"), DialectId.SQLITE)
    assert left.key == right.key


def test_pattern_with_segment() -> None:
    signature = ErrorSignature(vendor_code="ORA-00933", template="SQL command not properly ended", dialect=DialectId.ORACLE)
    assert matches_pattern("ORA-00933: * @ LIMIT*", signature, "limit 5")
    assert not matches_pattern("ORA-00933: * @ LIMIT*", signature, "FROM users u")
    assert matches_pattern("ORA-00933: * @ FROM *", signature, "FROM users u")
    assert matches_pattern("ORA-00933: *", signature)
    assert not matches_pattern("ORA-00923: *", signature)


def test_literal_pattern_matches_only_itself() -> None:
    signature = ErrorSignature(vendor_code=None, template="near [x]: syntax error *", dialect=DialectId.SQLITE)
    pattern = literal_pattern(signature)
    assert pattern == escape_glob(signature.key)
    assert matches_pattern(pattern, signature)
    other = ErrorSignature(vendor_code=None, template="near x: syntax error", dialect=DialectId.SQLITE)
    assert not matches_pattern(pattern, other)


def test_failing_segment_in_trace_dict() -> None:
    trace = ErrorTrace(message="m", failing_segment=FailingSegment(text="LIMIT 5", start=10, end=17))
    assert trace.to_dict()["failing_segment"]["text"] == "LIMIT 5"


@pytest.mark.parametrize("dialect", [DialectId.SQLITE, DialectId.DUCKDB])
def test_embedded_executor_returns_rows(dialect: DialectId) -> None:
    executor = EmbeddedExecutor(dialect, seed_sql=SEED)
    try:
        outcome = executor.execute(SqlText("SELECT username, score FROM users ORDER BY score DESC", dialect))
    finally:
        executor.close()
    assert outcome.ok
    assert outcome.rows == (("ben", 30), ("cy", 20), ("ana", 10))
    assert outcome.columns == ("username", "score")


@pytest.mark.parametrize("dialect", [DialectId.SQLITE, DialectId.DUCKDB])
def test_embedded_executor_reports_errors(dialect: DialectId) -> None:
    outcome = execute_embedded(SqlText("SELECT nickname FROM users", dialect), seed_sql=SEED)
    assert not outcome.ok
    assert outcome.trace is not None
    assert "nickname" in outcome.trace.message


def test_no_embedded_engine_for_server_dialects() -> None:
    with pytest.raises(AdapterUnavailable):
        make_executor("embedded", DialectId.ORACLE)
    assert isinstance(make_executor("simulated", DialectId.ORACLE), SimulatedExecutor)


def test_compare_result_sets() -> None:
    gold = [("a", 1.0), ("b", None)]
    assert compare_result_sets([("b", None), ("a", 1.0000000001)], gold, order_sensitive=False)
    assert not compare_result_sets([("b", None), ("a", 1.0)], gold, order_sensitive=True)
    assert not compare_result_sets([("a", 1.0)], gold, order_sensitive=False)
    assert compare_result_sets([("a ", 1)], [("a", 1.0)], order_sensitive=True)


def test_decimal_cells_compare_as_numbers() -> None:
    assert cells_equal(Decimal("10.50"), 10.5)
    assert cells_equal(Decimal("10.50"), Decimal("10.5"))
    assert not cells_equal(Decimal("10.50"), "10.5")
    assert not cells_equal(True, 1)


def test_duckdb_decimal_sums_match_float_gold() -> None:
    seed = "CREATE TABLE t (a DECIMAL(10, 2)); INSERT INTO t VALUES (4.25), (6.25);"
    outcome = execute_embedded(SqlText("SELECT SUM(a), AVG(a) FROM t", DialectId.DUCKDB), seed_sql=seed)
    assert outcome.rows == ((10.5, 5.25),)
    assert compare_result_sets(outcome.rows or (), [(10.5, 5.25)], order_sensitive=True)


def test_unranked_scalar_lookup_is_allowed() -> None:
    lookup = "SELECT username FROM users WHERE id = (SELECT id FROM users WHERE username = 'bob')"
    for dialect in (DialectId.POSTGRESQL, DialectId.MYSQL):
        assert simulate(SqlText(lookup, dialect)).ok
    ranked = "SELECT username FROM users WHERE id = (SELECT id FROM users ORDER BY score DESC)"
    outcome = simulate(SqlText(ranked, DialectId.POSTGRESQL))
    assert outcome.trace is not None
    assert outcome.trace.rule_id == "I4"


def test_quoted_schema_identifier_is_not_a_literal() -> None:
    columns = (ColumnDef("id", "INT"), ColumnDef("owner", "INT"), ColumnDef("UserId", "INT"))
    schema = SchemaCatalog(tables=(TableDef("users", columns),))
    sql = SqlText('SELECT id FROM users WHERE owner = "UserId"', DialectId.POSTGRESQL)
    assert simulate(sql, schema=schema).ok
    assert SimulatedExecutor(DialectId.POSTGRESQL, schema=schema).execute(sql).ok

    literal = SqlText('SELECT id FROM users WHERE owner = "english"', DialectId.POSTGRESQL)
    outcome = simulate(literal, schema=schema)
    assert outcome.trace is not None
    assert outcome.trace.rule_id == "M4"
    assert simulate(SqlText(literal.text, DialectId.MYSQL)).ok
