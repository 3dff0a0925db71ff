"""Per-dialect grammar profiles over the shared sqlglot parser."""

from __future__ import annotations

from dataclasses import dataclass

from dialsql.core.model import DialectId


@dataclass(frozen=True, slots=True)
class GrammarProfile:
    """How one dialect is read and how its engine reports syntax errors."""

    dialect: DialectId
    # sqlglot dialect name used for tokenizing and parsing.
    read: str
    identifier_quotes: tuple[str, ...]
    string_quote: str
    # Accepted row-limiting forms among {"limit", "fetch", "top"}.
    row_limit_forms: frozenset[str]
    syntax_vendor_code: str | None
    # Formatted with {near}: the token where parsing failed.
    syntax_message: str
    requires_from: bool = False

    def syntax_error(self, near: str) -> str:
        return self.syntax_message.format(near=near or "end of input")


PROFILES: dict[DialectId, GrammarProfile] = {
    DialectId.SQLITE: GrammarProfile(
        dialect=DialectId.SQLITE,
        read="sqlite",
        identifier_quotes=('"', "`", "["),
        string_quote="'",
        row_limit_forms=frozenset({"limit"}),
        syntax_vendor_code=None,
        syntax_message='near "{near}": syntax error',
    ),
    DialectId.MYSQL: GrammarProfile(
        dialect=DialectId.MYSQL,
        read="mysql",
        identifier_quotes=("`",),
        string_quote="'",
        row_limit_forms=frozenset({"limit"}),
        syntax_vendor_code="1064",
        syntax_message=(
            "ERROR 1064 (42000): You have an error in your SQL syntax; check the manual "
            "that corresponds to your MySQL server version for the right syntax to use near '{near}'"
        ),
    ),
    DialectId.POSTGRESQL: GrammarProfile(
        dialect=DialectId.POSTGRESQL,
        read="postgres",
        identifier_quotes=('"',),
        string_quote="'",
        row_limit_forms=frozenset({"limit", "fetch"}),
        syntax_vendor_code="42601",
        syntax_message='ERROR: syntax error at or near "{near}"',
    ),
    DialectId.SQLSERVER: GrammarProfile(
        dialect=DialectId.SQLSERVER,
        read="tsql",
        identifier_quotes=('"', "["),
        string_quote="'",
        row_limit_forms=frozenset({"top", "fetch"}),
        syntax_vendor_code="102",
        syntax_message="Msg 102, Level 15, State 1: Incorrect syntax near '{near}'.",
    ),
    DialectId.DUCKDB: GrammarProfile(
        dialect=DialectId.DUCKDB,
        read="duckdb",
        identifier_quotes=('"',),
        string_quote="'",
        row_limit_forms=frozenset({"limit", "fetch"}),
        syntax_vendor_code=None,
        syntax_message='Parser Error: syntax error at or near "{near}"',
    ),
    DialectId.ORACLE: GrammarProfile(
        dialect=DialectId.ORACLE,
        read="oracle",
        identifier_quotes=('"',),
        string_quote="'",
        row_limit_forms=frozenset({"fetch"}),
        syntax_vendor_code="ORA-00933",
        syntax_message="ORA-00933: SQL command not properly ended",
        requires_from=True,
    ),
}


def profile_for(dialect: DialectId) -> GrammarProfile:
    return PROFILES[dialect]
