"""Plan types: macro-operators, logical plans and the dialect-aware enriched plan."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import StrEnum
from typing import Any, Sequence

from dialsql.core.errors import PreconditionError
from dialsql.core.model import DialectId


class MacroOperatorKind(StrEnum):
    SRC = "src"  # base relations and joins
    FLT = "flt"  # predicates pruning tuples
    CAL = "cal"  # row-level derived values
    AGG = "agg"  # grouping and aggregation
    ORG = "org"  # projection, ordering, limits
    AUX = "aux"  # anything else


@dataclass(frozen=True, slots=True)
class OperatorRef:
    table: str
    column: str
    physical_type: str

    @property
    def key(self) -> str:
        return f"{self.table}.{self.column}"

    @property
    def label(self) -> str:
        """``"transactions.amount (TEXT)"``."""
        return f"{self.key} ({self.physical_type})"


@dataclass(frozen=True, slots=True)
class MacroOperator:
    kind: MacroOperatorKind
    description: str
    refs: tuple[OperatorRef, ...] = ()
    sensitive: bool = False
    order_index: int = 0

    def __post_init__(self) -> None:
        if not self.description.strip():
            msg = "Operator description must not be empty."
            raise PreconditionError(msg)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "description": self.description,
            "refs": [{"table": r.table, "column": r.column, "type": r.physical_type} for r in self.refs],
            "sensitive": self.sensitive,
            "order_index": self.order_index,
        }

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> MacroOperator:
        return cls(
            kind=MacroOperatorKind(document["kind"]),
            description=document["description"],
            refs=tuple(OperatorRef(r["table"], r["column"], r["type"]) for r in document.get("refs", [])),
            sensitive=bool(document.get("sensitive", False)),
            order_index=int(document.get("order_index", 0)),
        )


@dataclass(frozen=True, slots=True)
class LogicalPlan:
    """Linear chain of macro-operators; `order_index` equals list position."""

    operators: tuple[MacroOperator, ...]

    @classmethod
    def of(cls, operators: Sequence[MacroOperator]) -> LogicalPlan:
        """Build a plan, renumbering `order_index` to match positions."""
        return cls(operators=tuple(replace(op, order_index=idx) for idx, op in enumerate(operators)))

    def __len__(self) -> int:
        return len(self.operators)

    def of_kind(self, kind: MacroOperatorKind) -> list[MacroOperator]:
        return [op for op in self.operators if op.kind == kind]

    def sensitive_operators(self) -> list[MacroOperator]:
        return [op for op in self.operators if op.sensitive]

    def render(self) -> str:
        """Prompt form: ``[k] KIND | description``, one line per operator."""
        return "\n".join(f"[{op.order_index}] {op.kind.value.upper()} | {op.description}" for op in self.operators)

    def to_dict(self) -> dict[str, Any]:
        return {"operators": [op.to_dict() for op in self.operators]}


@dataclass(frozen=True, slots=True)
class StandardizedOperator:
    category: str
    standard_description: str
    source_index: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "category": self.category,
            "standard_description": self.standard_description,
            "source_index": self.source_index,
        }


@dataclass(frozen=True, slots=True)
class DialectAwarePlan:
    """A labeled plan plus one standardized operator per sensitive operator."""

    base: LogicalPlan
    enriched: tuple[StandardizedOperator, ...]
    dialect: DialectId

    def __post_init__(self) -> None:
        sensitive = {op.order_index for op in self.base.operators if op.sensitive}
        indices = [std.source_index for std in self.enriched]
        if len(indices) != len(sensitive) or set(indices) != sensitive:
            msg = "Enriched operators must map one-to-one onto the sensitive operators."
            raise PreconditionError(msg)

    def render(self) -> str:
        lines = [self.base.render()]
        for std in self.enriched:
            lines.append(f"  <{std.category}> (operator {std.source_index}): {std.standard_description}")
        return "\n".join(lines)

    def to_dict(self) -> dict[str, Any]:
        return {
            "operators": [op.to_dict() for op in self.base.operators],
            "enriched": [std.to_dict() for std in self.enriched],
            "dialect": self.dialect.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> DialectAwarePlan:
        return cls(
            base=LogicalPlan(operators=tuple(MacroOperator.from_dict(op) for op in document["operators"])),
            enriched=tuple(
                StandardizedOperator(
                    category=std["category"],
                    standard_description=std["standard_description"],
                    source_index=int(std["source_index"]),
                )
                for std in document.get("enriched", [])
            ),
            dialect=DialectId.parse(document["dialect"]),
        )
