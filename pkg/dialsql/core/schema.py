"""Schema ingestion from ANSI DDL and the JSON catalog file format."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Mapping, Sequence

import sqlglot
from sqlglot import exp
from sqlglot.errors import ParseError as SqlglotParseError
from sqlglot.errors import TokenError
from sqlglot.tokens import TokenType

from dialsql.core.errors import DuplicateObject, ParseError
from dialsql.core.model import MAX_SAMPLES, ColumnDef, SchemaCatalog, TableDef

if TYPE_CHECKING:
    from sqlglot.tokens import Token

    from dialsql.core.model import TranslationTask

logger = logging.getLogger(__name__)

# Words that end the type part of a column definition.
CONSTRAINT_WORDS = frozenset(
    {
        "PRIMARY",
        "NOT",
        "NULL",
        "DEFAULT",
        "UNIQUE",
        "REFERENCES",
        "CHECK",
        "CONSTRAINT",
        "COLLATE",
        "AUTO_INCREMENT",
        "AUTOINCREMENT",
        "GENERATED",
        "IDENTITY",
    },
)
# Table-level clauses that are not column definitions.
TABLE_CONSTRAINT_WORDS = frozenset({"PRIMARY", "FOREIGN", "UNIQUE", "CHECK", "CONSTRAINT", "KEY", "INDEX"})


def parse_schema_ddl(
    ddl: str,
    samples: Mapping[str, Sequence[str]] | None = None,
) -> SchemaCatalog:
    """Build a catalog from CREATE TABLE statements.

    Parameters
    ----------
    ddl:
        One or more generic ANSI ``CREATE TABLE`` statements.
    samples:
        Optional sample values keyed by ``"table.column"``; at most five are
        kept per column.

    Returns
    -------
    SchemaCatalog
        Every table and column of the DDL, physical types as written.

    """
    try:
        statements = sqlglot.parse(ddl)
    except SqlglotParseError as exc:
        first = exc.errors[0] if exc.errors else {}
        msg = f"Unparseable DDL: {first.get('description', exc)}"
        raise ParseError(msg, line=first.get("line"), col=first.get("col")) from exc
    except TokenError as exc:
        msg = f"Unparseable DDL: {exc}"
        raise ParseError(msg) from exc

    creates = [
        stmt
        for stmt in statements
        if isinstance(stmt, exp.Create) and str(stmt.args.get("kind", "")).upper() == "TABLE"
    ]
    if not creates:
        msg = "DDL contains no CREATE TABLE statement."
        raise ParseError(msg)

    raw_types = _raw_column_types(ddl)
    sample_map = {key.lower(): list(values) for key, values in (samples or {}).items()}

    tables: list[TableDef] = []
    seen: set[str] = set()
    for create in creates:
        schema_node = create.this
        if not isinstance(schema_node, exp.Schema):
            msg = "CREATE TABLE must declare its columns."
            raise ParseError(msg)
        table_name = schema_node.this.name
        if table_name.lower() in seen:
            msg = f"Table {table_name!r} is declared twice."
            raise DuplicateObject(msg)
        seen.add(table_name.lower())

        columns: list[ColumnDef] = []
        for node in schema_node.expressions:
            if not isinstance(node, exp.ColumnDef):
                continue
            key = f"{table_name}.{node.name}".lower()
            kind = node.args.get("kind")
            physical_type = raw_types.get(key) or (kind.sql() if kind is not None else "")
            if not physical_type:
                msg = f"Column {table_name}.{node.name} has no type."
                raise ParseError(msg)
            columns.append(
                ColumnDef(
                    name=node.name,
                    physical_type=physical_type,
                    samples=tuple(str(v) for v in sample_map.get(key, [])[:MAX_SAMPLES]),
                ),
            )
        tables.append(TableDef(name=table_name, columns=tuple(columns)))

    logger.debug("Parsed %d table(s) from DDL", len(tables))
    return SchemaCatalog(tables=tuple(tables))


def _raw_column_types(ddl: str) -> dict[str, str]:
    """Map ``table.column`` to the type text exactly as written in the DDL."""
    tokens = sqlglot.tokenize(ddl)
    types: dict[str, str] = {}
    idx = 0
    while idx < len(tokens):
        if tokens[idx].token_type != TokenType.CREATE:
            idx += 1
            continue
        # CREATE [..] TABLE [IF NOT EXISTS] name (
        while idx < len(tokens) and tokens[idx].token_type != TokenType.TABLE:
            idx += 1
        while idx < len(tokens) and tokens[idx].token_type != TokenType.L_PAREN:
            idx += 1
        if idx >= len(tokens):
            break
        table_name = tokens[idx - 1].text
        body, idx = _paren_body(tokens, idx)
        for group in _split_top_level(body):
            if not group or _leading_word(group[0]) in TABLE_CONSTRAINT_WORDS:
                continue
            type_tokens = _type_tokens(group[1:])
            if type_tokens:
                text = ddl[type_tokens[0].start : type_tokens[-1].end + 1]
                types[f"{table_name}.{group[0].text}".lower()] = text
    return types


def _paren_body(tokens: list[Token], open_idx: int) -> tuple[list[Token], int]:
    depth = 0
    for idx in range(open_idx, len(tokens)):
        if tokens[idx].token_type == TokenType.L_PAREN:
            depth += 1
        elif tokens[idx].token_type == TokenType.R_PAREN:
            depth -= 1
            if depth == 0:
                return tokens[open_idx + 1 : idx], idx + 1
    return tokens[open_idx + 1 :], len(tokens)


def _split_top_level(tokens: list[Token]) -> list[list[Token]]:
    groups: list[list[Token]] = [[]]
    depth = 0
    for token in tokens:
        if token.token_type == TokenType.L_PAREN:
            depth += 1
        elif token.token_type == TokenType.R_PAREN:
            depth -= 1
        if token.token_type == TokenType.COMMA and depth == 0:
            groups.append([])
            continue
        groups[-1].append(token)
    return groups


def _leading_word(token: Token) -> str:
    # Keyword pairs such as PRIMARY KEY or NOT NULL arrive as one token.
    if token.token_type in {TokenType.STRING, TokenType.NUMBER}:
        return ""
    words = token.text.upper().split()
    return words[0] if words else ""


def _type_tokens(tokens: list[Token]) -> list[Token]:
    taken: list[Token] = []
    depth = 0
    for token in tokens:
        if depth == 0 and _leading_word(token) in CONSTRAINT_WORDS:
            break
        if token.token_type == TokenType.L_PAREN:
            depth += 1
        elif token.token_type == TokenType.R_PAREN:
            depth -= 1
        taken.append(token)
    return taken


def validate_task(task: TranslationTask) -> list[str]:
    """Return one violation description per broken task invariant."""
    violations: list[str] = []
    if not task.question.strip():
        violations.append("question empty")
    for table, column in task.gold_elements:
        if task.schema.lookup(table, column) is None:
            violations.append(f"gold_elements: unknown column {table}.{column}")
    return violations


def load_schema(path: str | Path) -> SchemaCatalog:
    """Load a catalog from a JSON catalog file or a ``.sql`` DDL file."""
    schema_path = Path(path)
    if not schema_path.exists():
        msg = f"Schema file not found: {schema_path}"
        raise FileNotFoundError(msg)

    text = schema_path.read_text(encoding="utf-8")
    if schema_path.suffix.lower() == ".sql":
        return parse_schema_ddl(text)
    return SchemaCatalog.from_dict(json.loads(text))


def dump_schema(catalog: SchemaCatalog, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(catalog.to_dict(), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
