"""In-memory knowledge base with a single exclusive writer and JSONL persistence."""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable, Literal, TypeVar

from dialsql.core.errors import CorruptRecord, IoError
from dialsql.kb.model import ConstraintEntry, FunctionEntry
from dialsql.kb.reference import CanonicalReference, default_reference

if TYPE_CHECKING:
    from dialsql.core.model import DialectId

logger = logging.getLogger(__name__)

CSR_FILE = "csr.json"
FUNCTIONS_FILE = "f_func.jsonl"
CONSTRAINTS_FILE = "r_rule.jsonl"

T = TypeVar("T")


@dataclass(frozen=True, slots=True)
class CommitEvent:
    kind: Literal["added", "merged"]
    repository: Literal["f_func", "r_rule"]
    entry_id: str

    def to_dict(self) -> dict[str, str]:
        return {"kind": self.kind, "repository": self.repository, "entry_id": self.entry_id}


@dataclass(slots=True)
class KnowledgeBase:
    """Canonical reference plus both repositories; reads are lock-free snapshots."""

    csr: CanonicalReference = field(default_factory=default_reference)
    functions: dict[str, FunctionEntry] = field(default_factory=dict)
    constraints: dict[str, ConstraintEntry] = field(default_factory=dict)
    _writer: threading.RLock = field(default_factory=threading.RLock, repr=False, compare=False)

    def functions_for(self, dialect: DialectId) -> list[FunctionEntry]:
        return sorted((e for e in list(self.functions.values()) if e.dialect == dialect), key=lambda e: e.id)

    def constraints_for(self, dialect: DialectId) -> list[ConstraintEntry]:
        return sorted((e for e in list(self.constraints.values()) if e.dialect == dialect), key=lambda e: e.id)

    def add_function(self, entry: FunctionEntry) -> CommitEvent:
        """Add `entry` unless an entry with the same dedup key exists; existing entries win."""
        with self._writer:
            existing = next((e for e in self.functions.values() if e.dedup_key == entry.dedup_key), None)
            if existing is not None:
                logger.debug("Function entry %s duplicates %s", entry.id, existing.id)
                return CommitEvent(kind="merged", repository="f_func", entry_id=existing.id)
            self.functions = {**self.functions, entry.id: entry}
        return CommitEvent(kind="added", repository="f_func", entry_id=entry.id)

    def add_constraint(self, entry: ConstraintEntry) -> CommitEvent:
        """Add `entry`, or append its new cases and patterns to the duplicate already stored."""
        with self._writer:
            existing = next((e for e in self.constraints.values() if e.dedup_key == entry.dedup_key), None)
            if existing is None:
                self.constraints = {**self.constraints, entry.id: entry}
                return CommitEvent(kind="added", repository="r_rule", entry_id=entry.id)
            merged = replace(
                existing,
                cases=existing.cases + tuple(c for c in entry.cases if c not in existing.cases),
                signature_patterns=existing.signature_patterns
                + tuple(p for p in entry.signature_patterns if p not in existing.signature_patterns),
            )
            self.constraints = {**self.constraints, existing.id: merged}
        logger.debug("Merged constraint entry into %s", existing.id)
        return CommitEvent(kind="merged", repository="r_rule", entry_id=existing.id)

    def counts(self) -> dict[str, dict[str, int]]:
        """Per-dialect entry counts, e.g. ``{"oracle": {"f_func": 7, "r_rule": 8}}``."""
        summary: dict[str, dict[str, int]] = {}
        for entry in self.functions.values():
            summary.setdefault(entry.dialect.value, {"f_func": 0, "r_rule": 0})["f_func"] += 1
        for entry in self.constraints.values():
            summary.setdefault(entry.dialect.value, {"f_func": 0, "r_rule": 0})["r_rule"] += 1
        return dict(sorted(summary.items()))


def persist(kb: KnowledgeBase, directory: str | Path) -> None:
    """Write ``csr.json``, ``f_func.jsonl`` and ``r_rule.jsonl``, entries sorted by id."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        (directory / CSR_FILE).write_text(
            json.dumps(kb.csr.to_dict(), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        _write_jsonl(directory / FUNCTIONS_FILE, [kb.functions[k].to_dict() for k in sorted(kb.functions)])
        _write_jsonl(directory / CONSTRAINTS_FILE, [kb.constraints[k].to_dict() for k in sorted(kb.constraints)])
    except OSError as exc:
        msg = f"Cannot write knowledge base to {directory}: {exc}"
        raise IoError(msg) from exc
    logger.info("Persisted %d function and %d constraint entries to %s", len(kb.functions), len(kb.constraints), directory)


def _write_jsonl(path: Path, records: list[dict[str, Any]]) -> None:
    lines = [json.dumps(record, ensure_ascii=False, sort_keys=True) for record in records]
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")


def load(directory: str | Path) -> KnowledgeBase:
    """Read a knowledge base written by :func:`persist`."""
    directory = Path(directory)
    if not directory.is_dir():
        msg = f"Knowledge base directory {directory} does not exist."
        raise IoError(msg)
    try:
        csr_path = directory / CSR_FILE
        csr = (
            CanonicalReference.from_dict(json.loads(csr_path.read_text(encoding="utf-8")))
            if csr_path.exists()
            else default_reference()
        )
        functions = _read_jsonl(directory / FUNCTIONS_FILE, FunctionEntry.from_dict)
        constraints = _read_jsonl(directory / CONSTRAINTS_FILE, ConstraintEntry.from_dict)
    except OSError as exc:
        msg = f"Cannot read knowledge base from {directory}: {exc}"
        raise IoError(msg) from exc
    except (json.JSONDecodeError, KeyError) as exc:
        msg = f"Cannot read knowledge base from {directory}: {exc}"
        raise IoError(msg) from exc
    return KnowledgeBase(
        csr=csr,
        functions={e.id: e for e in functions},
        constraints={e.id: e for e in constraints},
    )


def _read_jsonl(path: Path, build: Callable[[dict[str, Any]], T]) -> list[T]:
    if not path.exists():
        return []
    entries: list[T] = []
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                entries.append(build(json.loads(line)))
            except Exception as exc:
                raise CorruptRecord(str(path), line_no, str(exc)) from exc
    return entries
