from __future__ import annotations

from pathlib import Path

import pytest
from shop import QUESTION, build_shop_plan

from dialsql.core.model import DialectId, SchemaCatalog, TranslationTask
from dialsql.core.schema import load_schema
from dialsql.kb.seed import seed_knowledge_base
from dialsql.kb.store import KnowledgeBase
from dialsql.planner.model import DialectAwarePlan

FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture
def shop_schema() -> SchemaCatalog:
    return load_schema(FIXTURES / "shop_schema.json")


@pytest.fixture
def oracle_task(shop_schema: SchemaCatalog) -> TranslationTask:
    return TranslationTask(question=QUESTION, schema=shop_schema, dialect=DialectId.ORACLE)


@pytest.fixture(scope="session")
def seeded_kb_template() -> KnowledgeBase:
    return seed_knowledge_base()


@pytest.fixture
def seeded_kb(seeded_kb_template: KnowledgeBase) -> KnowledgeBase:
    """A fresh copy per test; pipeline runs write into it."""
    return KnowledgeBase(
        csr=seeded_kb_template.csr,
        functions=dict(seeded_kb_template.functions),
        constraints=dict(seeded_kb_template.constraints),
    )


@pytest.fixture
def shop_plan(shop_schema: SchemaCatalog) -> DialectAwarePlan:
    return build_shop_plan(shop_schema, DialectId.POSTGRESQL)


@pytest.fixture
def docs_dir() -> Path:
    return FIXTURES / "docs"


@pytest.fixture
def bench_dir() -> Path:
    return FIXTURES / "bench"
