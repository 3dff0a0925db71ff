"""Knowledge-base records: function entries, constraint entries and distilled primitives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Literal

import numpy as np

from dialsql.core.errors import PreconditionError
from dialsql.core.model import DialectId
from dialsql.llm.embed import is_unit
from dialsql.utils.text import collapse_space, sha256_hex

Origin = Literal["distilled_from_docs", "consolidated"]
ORIGINS = ("distilled_from_docs", "consolidated")
# Separator between the indexed fields of a function entry.
INDEX_SEPARATOR = " ‖ "


def function_index_text(category: str, scenarios: tuple[str, ...] | list[str], specification: str) -> str:
    return INDEX_SEPARATOR.join([category, "; ".join(scenarios), specification])


def function_entry_id(dialect: DialectId, category: str, implementation: str) -> str:
    key = f"{dialect.value}|{category}|{collapse_space(implementation).lower()}"
    return f"F-{dialect.value}-{sha256_hex(key)[:12]}"


def constraint_entry_id(dialect: DialectId, rule_spec: str) -> str:
    key = f"{dialect.value}|{collapse_space(rule_spec).lower()}"
    return f"R-{dialect.value}-{sha256_hex(key)[:12]}"


def _check_origin(origin: str) -> None:
    if origin not in ORIGINS:
        msg = f"Unknown origin {origin!r}."
        raise PreconditionError(msg)


@dataclass(frozen=True, slots=True)
class FunctionEntry:
    id: str
    dialect: DialectId
    category: str
    scenarios: tuple[str, ...]
    specification: str
    implementation: str
    embedding: tuple[float, ...]
    origin: Origin = "distilled_from_docs"

    def __post_init__(self) -> None:
        if not self.scenarios or not all(s.strip() for s in self.scenarios):
            msg = f"{self.id}: scenarios must be non-empty."
            raise PreconditionError(msg)
        if not self.implementation.strip():
            msg = f"{self.id}: implementation must be non-empty."
            raise PreconditionError(msg)
        if not is_unit(np.asarray(self.embedding, dtype=np.float64)):
            msg = f"{self.id}: embedding is not unit-norm."
            raise PreconditionError(msg)
        _check_origin(self.origin)

    @property
    def index_text(self) -> str:
        return function_index_text(self.category, self.scenarios, self.specification)

    @property
    def dedup_key(self) -> tuple[str, str, str]:
        return (self.dialect.value, self.category, collapse_space(self.implementation).lower())

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "dialect": self.dialect.value,
            "category": self.category,
            "scenarios": list(self.scenarios),
            "specification": self.specification,
            "implementation": self.implementation,
            "embedding": list(self.embedding),
            "origin": self.origin,
        }

    @classmethod
    def from_dict(cls, record: dict[str, Any]) -> FunctionEntry:
        return cls(
            id=record["id"],
            dialect=DialectId.parse(record["dialect"]),
            category=record["category"],
            scenarios=tuple(record["scenarios"]),
            specification=record["specification"],
            implementation=record["implementation"],
            embedding=tuple(float(x) for x in record["embedding"]),
            origin=record["origin"],
        )


@dataclass(frozen=True, slots=True)
class Case:
    erroneous: str
    correct: str

    def __post_init__(self) -> None:
        if not self.erroneous.strip() or not self.correct.strip():
            msg = "Both sides of a case must be non-empty."
            raise PreconditionError(msg)


@dataclass(frozen=True, slots=True)
class ConstraintEntry:
    id: str
    dialect: DialectId
    rule_spec: str
    signature_patterns: tuple[str, ...] = ()
    cases: tuple[Case, ...] = ()
    origin: Origin = "distilled_from_docs"

    def __post_init__(self) -> None:
        if not self.rule_spec.strip():
            msg = f"{self.id}: rule_spec must be non-empty."
            raise PreconditionError(msg)
        _check_origin(self.origin)

    @property
    def dedup_key(self) -> tuple[str, str]:
        return (self.dialect.value, collapse_space(self.rule_spec).lower())

    @property
    def index_text(self) -> str:
        return " ".join([self.rule_spec, *self.signature_patterns])

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "dialect": self.dialect.value,
            "rule_spec": self.rule_spec,
            "signature_patterns": list(self.signature_patterns),
            "cases": [{"erroneous": c.erroneous, "correct": c.correct} for c in self.cases],
            "origin": self.origin,
        }

    @classmethod
    def from_dict(cls, record: dict[str, Any]) -> ConstraintEntry:
        return cls(
            id=record["id"],
            dialect=DialectId.parse(record["dialect"]),
            rule_spec=record["rule_spec"],
            signature_patterns=tuple(record.get("signature_patterns", [])),
            cases=tuple(Case(c["erroneous"], c["correct"]) for c in record.get("cases", [])),
            origin=record["origin"],
        )


@dataclass(frozen=True, slots=True)
class KnowledgePrimitive:
    """Distilled repair: incorrect pattern, corrective exemplar, root cause."""

    incorrect_pattern: str
    corrective_exemplar: str
    root_cause: str
    dialect: DialectId
    # Normalized signature key of the first failing step, when it was an execution error.
    signature: str | None = None
    incorrect_exemplar: str | None = None

    def __post_init__(self) -> None:
        if not (self.incorrect_pattern.strip() and self.corrective_exemplar.strip() and self.root_cause.strip()):
            msg = "Knowledge primitive fields must be non-empty."
            raise PreconditionError(msg)

    @property
    def text(self) -> str:
        return f"{self.incorrect_pattern}\n{self.root_cause}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "incorrect_pattern": self.incorrect_pattern,
            "corrective_exemplar": self.corrective_exemplar,
            "root_cause": self.root_cause,
            "dialect": self.dialect.value,
            "signature": self.signature,
            "incorrect_exemplar": self.incorrect_exemplar,
        }


@dataclass(frozen=True, slots=True)
class Hit:
    entry: FunctionEntry
    score: float
