"""Canonical syntax reference: the category taxonomy anchoring all dialect knowledge."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from dialsql.utils.text import slugify

EXPECTED_CATEGORIES = 11
MIN_ATOMIC_POINTS = 40
DATE_TIME_POINTS = 6


@dataclass(frozen=True, slots=True)
class AtomicSyntaxPoint:
    name: str
    ansi_sketch: str

    @property
    def query_text(self) -> str:
        return f"{self.name}: {self.ansi_sketch}"


@dataclass(frozen=True, slots=True)
class CanonicalCategory:
    id: str
    name: str
    atomic_points: tuple[AtomicSyntaxPoint, ...]
    # Alternative labels a model may use for this category.
    aliases: tuple[str, ...] = ()

    @property
    def profile_text(self) -> str:
        points = "; ".join(point.name for point in self.atomic_points)
        return f"{self.name}: {points}"


@dataclass(frozen=True, slots=True)
class CanonicalReference:
    categories: tuple[CanonicalCategory, ...]

    def get(self, category_id: str) -> CanonicalCategory | None:
        return next((cat for cat in self.categories if cat.id == category_id), None)

    def resolve(self, label: str) -> CanonicalCategory | None:
        """Match a free-form label on id, name or alias, ignoring case and punctuation."""
        slug = slugify(label.strip().strip("[]<>"))
        if not slug:
            return None
        for cat in self.categories:
            if slug in {cat.id, slugify(cat.name), *(slugify(alias) for alias in cat.aliases)}:
                return cat
        return None

    def atomic_points(self) -> list[tuple[CanonicalCategory, AtomicSyntaxPoint]]:
        return [(cat, point) for cat in self.categories for point in cat.atomic_points]

    def validate(self) -> list[str]:
        """Describe every broken taxonomy invariant; empty when well-formed."""
        problems: list[str] = []
        if len(self.categories) != EXPECTED_CATEGORIES:
            problems.append(f"expected {EXPECTED_CATEGORIES} categories, found {len(self.categories)}")
        total = sum(len(cat.atomic_points) for cat in self.categories)
        if total < MIN_ATOMIC_POINTS:
            problems.append(f"expected at least {MIN_ATOMIC_POINTS} atomic points, found {total}")
        date_time = self.get("date_time_operations")
        if date_time is None or len(date_time.atomic_points) != DATE_TIME_POINTS:
            problems.append(f"'Date & Time Operations' must hold exactly {DATE_TIME_POINTS} atomic points")
        return problems

    def to_dict(self) -> dict[str, Any]:
        return {
            "categories": [
                {
                    "id": cat.id,
                    "name": cat.name,
                    "aliases": list(cat.aliases),
                    "atomic_points": [
                        {"name": point.name, "ansi_sketch": point.ansi_sketch} for point in cat.atomic_points
                    ],
                }
                for cat in self.categories
            ],
        }

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> CanonicalReference:
        return cls(
            categories=tuple(
                CanonicalCategory(
                    id=cat["id"],
                    name=cat["name"],
                    aliases=tuple(cat.get("aliases", [])),
                    atomic_points=tuple(
                        AtomicSyntaxPoint(name=p["name"], ansi_sketch=p["ansi_sketch"]) for p in cat["atomic_points"]
                    ),
                )
                for cat in document["categories"]
            ),
        )


def _category(name: str, aliases: tuple[str, ...], *points: tuple[str, str]) -> CanonicalCategory:
    return CanonicalCategory(
        id=slugify(name),
        name=name,
        aliases=aliases,
        atomic_points=tuple(AtomicSyntaxPoint(name=n, ansi_sketch=s) for n, s in points),
    )


DEFAULT_REFERENCE = CanonicalReference(
    categories=(
        _category(
            "String Manipulation",
            ("String Processing", "String Functions", "Text Processing"),
            ("Substring Extraction", "SUBSTRING(s FROM start FOR length) slices part of a string"),
            ("String Concatenation", "s1 || s2 joins two or more strings end to end"),
            ("String Aggregation", "concatenate the text values of a group with a separator, ordered"),
            ("Case Conversion", "UPPER(s) and LOWER(s) change letter case"),
            ("Trimming and Padding", "TRIM, LPAD and RPAD remove or add surrounding characters"),
            ("Search and Replace", "POSITION(sub IN s) locates and REPLACE(s, old, new) substitutes text"),
        ),
        _category(
            "Date & Time Operations",
            ("Temporal Manipulation", "Temporal Operations", "Date Time", "Date Functions"),
            ("Date Truncation", "truncate a timestamp to its year, month or day boundary"),
            ("Interval Arithmetic", "add or subtract an INTERVAL of days, months or years to a date"),
            ("Timestamp Extraction", "EXTRACT(YEAR FROM ts) pulls a year, month or day field from a date"),
            ("Date Difference", "the time difference between two dates in days, months or years"),
            ("Date Formatting", "render a date as text in a given pattern such as YYYY-MM"),
            ("Current Date and Time", "CURRENT_DATE and CURRENT_TIMESTAMP return the present moment"),
        ),
        _category(
            "Window Functions",
            ("Analytic Functions",),
            ("Ranking Functions", "ROW_NUMBER, RANK and DENSE_RANK OVER (PARTITION BY ... ORDER BY ...)"),
            ("Running Aggregates", "SUM or AVG OVER an ordered window for cumulative totals"),
            ("Offset Access", "LAG and LEAD read a value from a previous or next row"),
            ("Window Frames", "ROWS or RANGE BETWEEN frame bounds for moving windows"),
        ),
        _category(
            "Type Conversion & Casting",
            ("Type Conversion", "Casting", "Type Casting"),
            ("Explicit Cast", "CAST(x AS type) converts a value to another data type"),
            ("Numeric Parsing of Text", "strip symbols and separators from text and convert it to a number"),
            ("Date Parsing of Text", "convert a text literal to a date using a format pattern"),
            ("Numeric Formatting", "round a number and render it as text with fixed decimals"),
        ),
        _category(
            "Aggregation & Grouping",
            ("Aggregation", "Grouping"),
            ("Basic Aggregates", "COUNT, SUM, AVG, MIN and MAX over grouped rows"),
            ("Distinct Aggregation", "COUNT(DISTINCT x) counts unique values"),
            ("Conditional Aggregation", "COUNT or SUM over CASE WHEN to aggregate matching rows only"),
            ("Grouping Extensions", "ROLLUP, CUBE and GROUPING SETS for subtotals"),
        ),
        _category(
            "Conditional & Null Handling",
            ("Null Handling", "Conditional Logic"),
            ("Case Expressions", "CASE WHEN condition THEN value ELSE value END"),
            ("Null Coalescing", "COALESCE(x, default) replaces missing values"),
            ("Null If", "NULLIF(a, b) yields NULL when two values are equal"),
            ("Boolean Expressions", "boolean predicates and their truth values"),
        ),
        _category(
            "Pagination & Row Limiting",
            ("Row Limiting", "Pagination", "Top N"),
            ("Top-N Rows", "FETCH FIRST n ROWS ONLY keeps the first n rows of an ordered result"),
            ("Offset Pagination", "OFFSET m ROWS FETCH NEXT n ROWS ONLY skips then keeps rows"),
            ("Ties Handling", "FETCH FIRST n ROWS WITH TIES keeps rows tied with the last one"),
        ),
        _category(
            "Identifier & Literal Quoting",
            ("Quoting", "Identifier Quoting"),
            ("Identifier Quoting", "double quotes delimit identifiers with special characters or case"),
            ("String Literal Quoting", "single quotes delimit string literals"),
            ("Table Aliasing", "a correlation name given to a table in the FROM clause"),
        ),
        _category(
            "Joins & Set Operations",
            ("Joins", "Set Operations"),
            ("Inner and Outer Joins", "INNER, LEFT, RIGHT and FULL JOIN ... ON matching keys"),
            ("Cross and Lateral Joins", "CROSS JOIN and LATERAL derived tables"),
            ("Set Operations", "UNION, INTERSECT and EXCEPT combine result sets"),
            ("Semi and Anti Joins", "EXISTS and NOT EXISTS filter by related rows"),
        ),
        _category(
            "Subqueries & CTEs",
            ("Subqueries", "CTEs", "Common Table Expressions"),
            ("Scalar Subqueries", "a subquery returning one row and one column used as a value"),
            ("Derived Tables", "a subquery in FROM used as a named table"),
            ("Common Table Expressions", "WITH name AS (query) defines a reusable named result"),
            ("Correlated Subqueries", "a subquery referencing columns of the outer query"),
        ),
        _category(
            "Regular Expressions & Pattern Matching",
            ("Regular Expressions", "Pattern Matching", "Regex"),
            ("LIKE Patterns", "LIKE with % and _ wildcards matches simple patterns"),
            ("Regular Expression Match", "test whether text matches a regular expression"),
            ("Regular Expression Replace and Extract", "replace or extract the parts of text matching a regex"),
        ),
    ),
)


def default_reference() -> CanonicalReference:
    return DEFAULT_REFERENCE
