"""Benchmark items: parallel multi-dialect question/gold pairs read from ``items.jsonl``."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from dialsql.core.errors import CorruptRecord, IoError, PreconditionError
from dialsql.core.model import DialectId, TranslationTask
from dialsql.core.schema import load_schema

logger = logging.getLogger(__name__)

ITEMS_FILE = "items.jsonl"


@dataclass(frozen=True, slots=True)
class GoldQuery:
    gold_sql: str
    feature_patterns: tuple[str, ...] = ()


@dataclass(frozen=True, slots=True)
class BenchmarkItem:
    qid: str
    question: str
    schema_ref: Path
    gold: dict[DialectId, GoldQuery]
    gold_elements: tuple[tuple[str, str], ...] = ()
    # SQL script that creates and fills the tables for embedded engines.
    seed_ref: Path | None = None

    def __post_init__(self) -> None:
        if not self.gold:
            msg = f"{self.qid}: at least one dialect must carry a gold query."
            raise PreconditionError(msg)

    @property
    def dialects(self) -> list[DialectId]:
        return sorted(self.gold)

    def task(self, dialect: DialectId) -> TranslationTask:
        return TranslationTask(
            question=self.question,
            schema=load_schema(self.schema_ref),
            dialect=dialect,
            gold_elements=self.gold_elements,
        )

    def seed_sql(self) -> str | None:
        return self.seed_ref.read_text(encoding="utf-8") if self.seed_ref is not None else None

    @classmethod
    def from_dict(cls, record: dict[str, Any], root: Path) -> BenchmarkItem:
        gold = {
            DialectId.parse(name): GoldQuery(
                gold_sql=entry["gold_sql"],
                feature_patterns=tuple(entry.get("feature_patterns", [])),
            )
            for name, entry in record["gold"].items()
        }
        seed = record.get("seed_ref")
        return cls(
            qid=str(record["qid"]),
            question=record["question"],
            schema_ref=root / record["schema_ref"],
            gold=gold,
            gold_elements=tuple((t, c) for t, c in record.get("gold_elements", [])),
            seed_ref=root / seed if seed else None,
        )


@dataclass(frozen=True, slots=True)
class Benchmark:
    root: Path
    items: tuple[BenchmarkItem, ...] = field(default=())

    def dialects(self) -> list[DialectId]:
        return sorted({d for item in self.items for d in item.gold})


def load_benchmark(bench_dir: str | Path) -> Benchmark:
    """Read ``items.jsonl`` under `bench_dir`; schema and seed paths resolve relative to it."""
    root = Path(bench_dir)
    path = root / ITEMS_FILE
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        msg = f"Cannot read benchmark {path}: {exc}"
        raise IoError(msg) from exc

    items: list[BenchmarkItem] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            items.append(BenchmarkItem.from_dict(json.loads(line), root))
        except (ValueError, KeyError, TypeError, PreconditionError) as exc:
            raise CorruptRecord(str(path), line_no, str(exc)) from exc
    logger.info("Loaded %d benchmark item(s) from %s", len(items), path)
    return Benchmark(root=root, items=tuple(items))
