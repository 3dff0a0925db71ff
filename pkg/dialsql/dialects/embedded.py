"""Live executors for locally embeddable engines (SQLite via sqlite3, DuckDB)."""

from __future__ import annotations

import logging
import sqlite3
import threading
from decimal import Decimal
from typing import TYPE_CHECKING, Any, Literal

import duckdb

from dialsql.core.errors import AdapterUnavailable
from dialsql.core.model import DialectId, ErrorTrace, ExecutionOutcome, FailingSegment
from dialsql.dialects.simulate import SimulatedExecutor

if TYPE_CHECKING:
    from dialsql.core.model import Row, SchemaCatalog, SqlText
    from dialsql.dialects.simulate import Executor

logger = logging.getLogger(__name__)

EMBEDDED_DIALECTS = frozenset({DialectId.SQLITE, DialectId.DUCKDB})


class EmbeddedExecutor:
    """In-memory engine connection; calls on one executor are serialized."""

    capability: Literal["live", "simulated"] = "live"

    def __init__(self, dialect: DialectId, seed_sql: str | None = None) -> None:
        if dialect not in EMBEDDED_DIALECTS:
            msg = f"No embedded engine for {dialect.value}."
            raise AdapterUnavailable(msg)
        self.dialect = dialect
        self._lock = threading.Lock()
        if dialect == DialectId.SQLITE:
            self._conn: Any = sqlite3.connect(":memory:", check_same_thread=False)
        else:
            self._conn = duckdb.connect(":memory:")
        if seed_sql:
            self.seed(seed_sql)

    def seed(self, script: str) -> None:
        """Run a DDL/DML script, e.g. fixture tables and rows."""
        with self._lock:
            if self.dialect == DialectId.SQLITE:
                self._conn.executescript(script)
            else:
                self._conn.execute(script)
        logger.debug("Seeded %s engine", self.dialect.value)

    def execute(self, sql: SqlText) -> ExecutionOutcome:
        with self._lock:
            try:
                cursor = self._conn.execute(sql.text)
                rows = cursor.fetchall()
                description = cursor.description or []
            except (sqlite3.Error, duckdb.Error) as exc:
                return ExecutionOutcome.error(_trace_from(exc))
        columns = tuple(str(col[0]) for col in description)
        return ExecutionOutcome.success(rows=tuple(_row(r) for r in rows), columns=columns)

    def close(self) -> None:
        with self._lock:
            self._conn.close()


def _row(raw: tuple[Any, ...]) -> Row:
    return tuple(_cell(cell) for cell in raw)


def _cell(value: Any) -> Any:
    if value is None or isinstance(value, (str, int, float, bool)):
        return value
    if isinstance(value, Decimal):
        return float(value)
    return str(value)


def _trace_from(exc: Exception) -> ErrorTrace:
    message = str(exc).strip() or exc.__class__.__name__
    vendor_code = getattr(exc, "sqlite_errorname", None)
    near = _near_token(message)
    return ErrorTrace(
        message=message,
        vendor_code=vendor_code,
        failing_segment=FailingSegment(text=near) if near else None,
    )


def _near_token(message: str) -> str | None:
    marker = 'near "'
    if marker not in message:
        return None
    tail = message.split(marker, 1)[1]
    return tail.split('"', 1)[0] or None


def execute_embedded(sql: SqlText, seed_sql: str | None = None) -> ExecutionOutcome:
    """Run `sql` on a fresh in-memory engine for its dialect."""
    executor = EmbeddedExecutor(sql.dialect, seed_sql=seed_sql)
    try:
        return executor.execute(sql)
    finally:
        executor.close()


def make_executor(
    kind: str,
    dialect: DialectId,
    seed_sql: str | None = None,
    schema: SchemaCatalog | None = None,
) -> Executor:
    """Build a ``"simulated"`` or ``"embedded"`` executor for `dialect`."""
    if kind == "simulated":
        return SimulatedExecutor(dialect, schema=schema)
    if kind == "embedded":
        return EmbeddedExecutor(dialect, seed_sql=seed_sql)
    msg = f"Unknown executor kind {kind!r}; expected 'simulated' or 'embedded'."
    raise ValueError(msg)
