"""Shared domain types: dialects, schemas, tasks, SQL text and execution outcomes."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any, Literal

from dialsql.core.errors import DuplicateObject, PreconditionError

# Cell values produced by engines; the simulator never produces any.
Cell = str | int | float | bool | None
Row = tuple[Cell, ...]

MAX_SAMPLES = 5


class DialectId(StrEnum):
    """Target database systems, serialized as lowercase names."""

    SQLITE = "sqlite"
    MYSQL = "mysql"
    POSTGRESQL = "postgresql"
    SQLSERVER = "sqlserver"
    DUCKDB = "duckdb"
    ORACLE = "oracle"

    @classmethod
    def parse(cls, value: str | DialectId) -> DialectId:
        """Resolve a user-supplied dialect name, case-insensitively."""
        try:
            return cls(str(value).strip().lower())
        except ValueError as exc:
            known = ", ".join(member.value for member in cls)
            msg = f"Unknown dialect {value!r}; expected one of {known}."
            raise PreconditionError(msg) from exc


@dataclass(frozen=True, slots=True)
class ColumnDef:
    """One column with its declared physical type and raw sample values."""

    name: str
    physical_type: str
    samples: tuple[str, ...] = ()


@dataclass(frozen=True, slots=True)
class TableDef:
    name: str
    columns: tuple[ColumnDef, ...]

    def column(self, name: str) -> ColumnDef | None:
        lowered = name.lower()
        return next((col for col in self.columns if col.name.lower() == lowered), None)


@dataclass(frozen=True, slots=True)
class SchemaCatalog:
    """Tables visible to one translation task."""

    tables: tuple[TableDef, ...]

    def __post_init__(self) -> None:
        seen_tables: set[str] = set()
        for tbl in self.tables:
            if not tbl.name.strip():
                msg = "Table names must not be empty."
                raise PreconditionError(msg)
            if tbl.name.lower() in seen_tables:
                msg = f"Table {tbl.name!r} is declared twice."
                raise DuplicateObject(msg)
            seen_tables.add(tbl.name.lower())

            seen_columns: set[str] = set()
            for col in tbl.columns:
                if not col.name.strip() or not col.physical_type.strip():
                    msg = f"Column in {tbl.name!r} needs a name and a type."
                    raise PreconditionError(msg)
                if col.name.lower() in seen_columns:
                    msg = f"Column {tbl.name}.{col.name} is declared twice."
                    raise DuplicateObject(msg)
                seen_columns.add(col.name.lower())

    def table(self, name: str) -> TableDef | None:
        lowered = name.lower()
        return next((tbl for tbl in self.tables if tbl.name.lower() == lowered), None)

    def lookup(self, table: str, column: str) -> ColumnDef | None:
        """Return the column definition for `table.column`, or ``None``."""
        tbl = self.table(table)
        return tbl.column(column) if tbl is not None else None

    def pairs(self) -> list[tuple[str, str]]:
        return [(tbl.name, col.name) for tbl in self.tables for col in tbl.columns]

    def to_dict(self) -> dict[str, Any]:
        return {
            "tables": [
                {
                    "name": tbl.name,
                    "columns": [
                        {"name": col.name, "type": col.physical_type, "samples": list(col.samples)}
                        for col in tbl.columns
                    ],
                }
                for tbl in self.tables
            ],
        }

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> SchemaCatalog:
        tables = document.get("tables")
        if not isinstance(tables, list):
            msg = "Schema document must contain a 'tables' list."
            raise PreconditionError(msg)
        return cls(
            tables=tuple(
                TableDef(
                    name=str(tbl["name"]),
                    columns=tuple(
                        ColumnDef(
                            name=str(col["name"]),
                            physical_type=str(col["type"]),
                            samples=tuple(str(s) for s in col.get("samples", [])[:MAX_SAMPLES]),
                        )
                        for col in tbl.get("columns", [])
                    ),
                )
                for tbl in tables
            ),
        )

    def describe(self) -> str:
        """Render the catalog as prompt text: one line per column with type and samples."""
        lines: list[str] = []
        for tbl in self.tables:
            lines.append(f"TABLE {tbl.name}")
            for col in tbl.columns:
                samples = ", ".join(repr(s) for s in col.samples[:MAX_SAMPLES])
                suffix = f"  samples: {samples}" if samples else ""
                lines.append(f"  {tbl.name}.{col.name} ({col.physical_type}){suffix}")
        return "\n".join(lines)


@dataclass(frozen=True, slots=True)
class TranslationTask:
    """The (question, schema, dialect) triple driving one pipeline run."""

    question: str
    schema: SchemaCatalog
    dialect: DialectId
    gold_elements: tuple[tuple[str, str], ...] = ()

    def task_hash(self) -> str:
        """Stable digest used to name trajectory dumps."""
        payload = json.dumps(
            {
                "question": self.question,
                "schema": self.schema.to_dict(),
                "dialect": self.dialect.value,
                "gold_elements": [list(pair) for pair in self.gold_elements],
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True, slots=True)
class SqlText:
    text: str
    dialect: DialectId

    def __post_init__(self) -> None:
        if not self.text.strip():
            msg = "SQL text must not be empty."
            raise PreconditionError(msg)


@dataclass(frozen=True, slots=True)
class FailingSegment:
    """Offending substring of a query; `start`/`end` are character offsets when known."""

    text: str
    start: int | None = None
    end: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"text": self.text, "start": self.start, "end": self.end}


@dataclass(frozen=True, slots=True)
class ErrorTrace:
    """Raw engine error: message, optional vendor code and failing segment."""

    message: str
    vendor_code: str | None = None
    failing_segment: FailingSegment | None = None
    # Catalog rule that produced a simulated trace; empty for live engines.
    rule_id: str | None = None

    def __post_init__(self) -> None:
        if not self.message.strip():
            msg = "Error trace message must not be empty."
            raise PreconditionError(msg)

    def to_dict(self) -> dict[str, Any]:
        return {
            "vendor_code": self.vendor_code,
            "message": self.message,
            "failing_segment": self.failing_segment.to_dict() if self.failing_segment else None,
            "rule_id": self.rule_id,
        }


@dataclass(frozen=True, slots=True)
class ExecutionOutcome:
    status: Literal["success", "error"]
    rows: tuple[Row, ...] | None = None
    trace: ErrorTrace | None = None
    columns: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if (self.rows is None) == (self.trace is None):
            msg = "Exactly one of rows/trace must be present."
            raise PreconditionError(msg)
        if (self.status == "success") != (self.rows is not None):
            msg = "Rows are present iff status is success."
            raise PreconditionError(msg)

    @classmethod
    def success(cls, rows: tuple[Row, ...] = (), columns: tuple[str, ...] = ()) -> ExecutionOutcome:
        return cls(status="success", rows=rows, columns=columns)

    @classmethod
    def error(cls, trace: ErrorTrace) -> ExecutionOutcome:
        return cls(status="error", trace=trace)

    @property
    def ok(self) -> bool:
        return self.status == "success"

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "columns": list(self.columns),
            "rows": [list(row) for row in self.rows] if self.rows is not None else None,
            "trace": self.trace.to_dict() if self.trace else None,
        }
