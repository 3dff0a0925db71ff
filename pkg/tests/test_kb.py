from __future__ import annotations

import math
import shutil
from pathlib import Path

import numpy as np
import pytest
from shop import FETCH_SQL, LIMITED_SQL, doc_backend

from dialsql.core.errors import CorruptRecord, EmptyRepository, IoError, PreconditionError, UnsupportedFormat
from dialsql.core.model import DialectId
from dialsql.dialects.signature import ErrorSignature
from dialsql.kb.construct import (
    DEFAULT_TAU_MAP,
    SEED_RULE_PATTERNS,
    build_knowledge_base,
    detect_format,
    has_contrastive_cue,
    map_syntax,
    read_documents,
    tag_documents,
)
from dialsql.kb.model import Case, ConstraintEntry, FunctionEntry, KnowledgePrimitive, constraint_entry_id
from dialsql.kb.reference import default_reference
from dialsql.kb.retrieve import retrieve_functions, retrieve_rules
from dialsql.kb.routing import commit_decision, route_primitive
from dialsql.kb.seed import seed_constraint_entries, seed_function_entries
from dialsql.kb.store import FUNCTIONS_FILE, KnowledgeBase, load, persist
from dialsql.llm.backends import ScriptedBackend
from dialsql.planner.model import DialectAwarePlan, StandardizedOperator

ORACLE = DialectId.ORACLE
LIMIT_SIGNATURE = ErrorSignature(vendor_code="ORA-00933", template="SQL command not properly ended", dialect=ORACLE)
DOC_TITLES = ["LISTAGG", "SUBSTR", "TO_DATE", "EXTRACT", "Row limiting", "NVL", "Table aliases", "DUAL", "ROW_NUMBER"]


def _primitive(dialect: DialectId = DialectId.POSTGRESQL) -> KnowledgePrimitive:
    return KnowledgePrimitive(
        incorrect_pattern="rows limited with LIMIT n after ORDER BY",
        corrective_exemplar=FETCH_SQL,
        root_cause="the engine has no LIMIT clause",
        dialect=dialect,
        signature="ORA-00933: SQL command not properly ended",
        incorrect_exemplar=LIMITED_SQL,
    )


class FixedSimilarity:
    """Embeds the plan as e1 and everything else at a chosen angle to it."""

    dimension = 4

    def __init__(self, plan: DialectAwarePlan, similarity: float) -> None:
        self.plan_text = plan.to_json()
        self.similarity = similarity

    def embed(self, text: str) -> np.ndarray:
        if text == self.plan_text:
            return np.array([1.0, 0.0, 0.0, 0.0])
        return np.array([self.similarity, math.sqrt(1.0 - self.similarity**2), 0.0, 0.0])


class KeywordTargets:
    """Gives every mapping target its own axis; a text naming a routed keyword leans toward that target."""

    def __init__(self, routes: dict[str, tuple[str, float]]) -> None:
        queries = {point.name: point.query_text for _, point in default_reference().atomic_points()}
        queries.update(SEED_RULE_PATTERNS)
        # Axis 0 is shared background no target uses.
        self.axes = {text: idx + 1 for idx, text in enumerate(queries.values())}
        self.dimension = len(self.axes) + 1
        self.routes = {keyword: (self.axes[queries[label]], weight) for keyword, (label, weight) in routes.items()}

    def embed(self, text: str) -> np.ndarray:
        vector = np.zeros(self.dimension)
        if text in self.axes:
            vector[self.axes[text]] = 1.0
            return vector
        lowered = text.lower()
        for keyword, (axis, weight) in self.routes.items():
            if keyword in lowered:
                vector[axis] = weight
                vector[0] = math.sqrt(1.0 - weight**2)
                return vector
        vector[0] = 1.0
        return vector


DOC_ROUTES = {
    "listagg": ("String Aggregation", 0.6),
    "substr": ("Substring Extraction", 0.6),
    "to_date": ("Date Parsing of Text", 0.6),
    "extract": ("Timestamp Extraction", 0.6),
    "row limiting": ("Top-N Rows", 0.6),
    "nvl": ("Null Coalescing", 0.6),
    "table alias": ("table_alias_keyword", 0.6),
    "dual": ("from_clause_required", 0.6),
    "row_number": ("Ranking Functions", 0.6),
    "release notes": ("String Aggregation", 0.3),
}
NOTES_DOC = (
    "Licensing\nThis manual is distributed under its license terms.\n\n"
    "Release notes\nThis release improves string aggregation output.\n"
)


def test_default_reference_is_well_formed() -> None:
    csr = default_reference()
    assert csr.validate() == []
    resolved = csr.resolve("Temporal Manipulation")
    assert resolved is not None
    assert resolved.id == "date_time_operations"
    assert csr.resolve("<pagination_row_limiting>") is csr.get("pagination_row_limiting")
    assert csr.resolve("astrology") is None


def test_seed_entries(seeded_kb: KnowledgeBase) -> None:
    counts = seeded_kb.counts()
    assert counts["oracle"]["f_func"] >= 10
    assert len(seeded_kb.functions) == len(seed_function_entries())
    assert len(seeded_kb.constraints) == len(seed_constraint_entries())
    assert all(entry.origin == "distilled_from_docs" for entry in seeded_kb.functions.values())


def test_function_dedup_keeps_existing(seeded_kb: KnowledgeBase) -> None:
    entry = seeded_kb.functions_for(ORACLE)[0]
    event = seeded_kb.add_function(entry)
    assert (event.kind, event.repository, event.entry_id) == ("merged", "f_func", entry.id)


def test_constraint_merge_appends_cases() -> None:
    kb = KnowledgeBase()
    rule = "Write FETCH FIRST n ROWS ONLY instead of LIMIT n"
    first = ConstraintEntry(id=constraint_entry_id(ORACLE, rule), dialect=ORACLE, rule_spec=rule, signature_patterns=("A",))
    second = ConstraintEntry(
        id="R-other",
        dialect=ORACLE,
        rule_spec=f"  {rule.lower()} ",
        signature_patterns=("A", "B"),
        cases=(Case(LIMITED_SQL, FETCH_SQL),),
    )
    assert kb.add_constraint(first).kind == "added"
    event = kb.add_constraint(second)
    assert (event.kind, event.entry_id) == ("merged", first.id)
    merged = kb.constraints[first.id]
    assert merged.signature_patterns == ("A", "B")
    assert merged.cases == (Case(LIMITED_SQL, FETCH_SQL),)
    assert len(kb.constraints) == 1


def test_entries_validate_their_fields() -> None:
    with pytest.raises(PreconditionError, match="unit-norm"):
        FunctionEntry(
            id="F-x",
            dialect=ORACLE,
            category="string_manipulation",
            scenarios=("a",),
            specification="s",
            implementation="SUBSTR(s, 1, 2)",
            embedding=(0.5, 0.5),
        )
    with pytest.raises(PreconditionError):
        ConstraintEntry(id="R-x", dialect=ORACLE, rule_spec="r", origin="guessed")  # type: ignore[arg-type]


def test_persist_then_load(seeded_kb: KnowledgeBase, tmp_path: Path) -> None:
    persist(seeded_kb, tmp_path / "kb")
    loaded = load(tmp_path / "kb")
    assert loaded.counts() == seeded_kb.counts()
    assert loaded.functions == seeded_kb.functions
    assert loaded.constraints == seeded_kb.constraints
    assert loaded.csr == seeded_kb.csr


def test_corrupt_line_is_reported(seeded_kb: KnowledgeBase, tmp_path: Path) -> None:
    persist(seeded_kb, tmp_path)
    with (tmp_path / FUNCTIONS_FILE).open("a", encoding="utf-8") as handle:
        handle.write("{not json\n")
    with pytest.raises(CorruptRecord):
        load(tmp_path)


def test_load_missing_directory(tmp_path: Path) -> None:
    with pytest.raises(IoError):
        load(tmp_path / "absent")


def test_retrieve_functions(seeded_kb: KnowledgeBase) -> None:
    op = StandardizedOperator("pagination_row_limiting", "keep the first n rows after sorting", 3)
    hits = retrieve_functions(seeded_kb, op, ORACLE, k=3)
    assert len(hits) == 3
    assert hits[0].entry.implementation == "ORDER BY expr FETCH FIRST n ROWS ONLY"
    assert [hit.score for hit in hits] == sorted((hit.score for hit in hits), reverse=True)
    assert all(hit.entry.dialect is ORACLE for hit in hits)


def test_retrieve_functions_is_deterministic(seeded_kb: KnowledgeBase) -> None:
    op = StandardizedOperator("string_manipulation", "aggregate strings per group", 1)
    first = retrieve_functions(seeded_kb, op, ORACLE, k=5)
    assert [hit.entry.id for hit in first] == [hit.entry.id for hit in retrieve_functions(seeded_kb, op, ORACLE, k=5)]


def test_retrieve_functions_errors(seeded_kb: KnowledgeBase) -> None:
    op = StandardizedOperator("string_manipulation", "aggregate strings per group", 1)
    with pytest.raises(EmptyRepository):
        retrieve_functions(KnowledgeBase(), op, ORACLE)
    with pytest.raises(PreconditionError):
        retrieve_functions(seeded_kb, op, ORACLE, k=0)


def test_retrieve_rules_exact_match(seeded_kb: KnowledgeBase) -> None:
    entry = retrieve_rules(seeded_kb, LIMIT_SIGNATURE, "LIMIT 5", ORACLE)
    assert entry is not None
    assert entry.rule_spec.startswith("[C1]")

    join_entry = retrieve_rules(seeded_kb, LIMIT_SIGNATURE, "FROM users u", ORACLE)
    assert join_entry is not None
    assert join_entry.rule_spec.startswith("[M2]")


def test_retrieve_rules_threshold(seeded_kb: KnowledgeBase) -> None:
    odd = ErrorSignature(vendor_code="ORA-12345", template="something unusual happened", dialect=ORACLE)
    assert retrieve_rules(seeded_kb, odd, "", ORACLE, tau_rule=1.01) is None
    assert retrieve_rules(seeded_kb, odd, "", ORACLE, tau_rule=-1.0) is not None
    assert retrieve_rules(KnowledgeBase(), odd, "", ORACLE) is None


@pytest.mark.parametrize(
    ("similarity", "target"),
    [(1.0, "to_F_Func"), (0.75, "to_F_Func"), (0.74, "to_R_Rule"), (0.0, "to_R_Rule")],
)
def test_routing_threshold(shop_plan: DialectAwarePlan, similarity: float, target: str) -> None:
    decision = route_primitive(_primitive(), shop_plan, embedder=FixedSimilarity(shop_plan, similarity))
    assert decision.target == target
    assert decision.similarity == pytest.approx(similarity)
    assert decision.entry.origin == "consolidated"
    assert decision.entry.dialect is DialectId.POSTGRESQL


def test_routed_function_entry(shop_plan: DialectAwarePlan) -> None:
    entry = route_primitive(_primitive(), shop_plan, embedder=FixedSimilarity(shop_plan, 0.9)).entry
    assert isinstance(entry, FunctionEntry)
    assert entry.category == "pagination_row_limiting"
    assert entry.implementation == FETCH_SQL
    assert entry.scenarios == ("the engine has no LIMIT clause",)


def test_routed_constraint_entry(shop_plan: DialectAwarePlan) -> None:
    entry = route_primitive(_primitive(), shop_plan, embedder=FixedSimilarity(shop_plan, 0.2)).entry
    assert isinstance(entry, ConstraintEntry)
    assert entry.rule_spec == "rows limited with LIMIT n after ORDER BY"
    assert entry.signature_patterns == ("ORA-00933: SQL command not properly ended",)
    assert entry.cases == (Case(LIMITED_SQL, FETCH_SQL),)


def test_commit_decision(seeded_kb: KnowledgeBase, shop_plan: DialectAwarePlan) -> None:
    decision = route_primitive(_primitive(), shop_plan, embedder=FixedSimilarity(shop_plan, 0.2))
    before = seeded_kb.counts()["postgresql"]["r_rule"]
    assert commit_decision(seeded_kb, decision).kind == "added"
    assert commit_decision(seeded_kb, decision).kind == "merged"
    assert seeded_kb.counts()["postgresql"]["r_rule"] == before + 1


def test_tag_documents(docs_dir: Path) -> None:
    docs, names = read_documents(docs_dir)
    corpus = tag_documents(docs, ORACLE, names)
    assert [section.title for section in corpus.sections] == DOC_TITLES
    assert corpus.sections[3].text == "EXTRACT returns the year, month or day field of a date."
    assert corpus.sections[0].source == "01_strings.md"
    assert corpus.merged.startswith("<oracle>\nLISTAGG")


def test_unsupported_format(tmp_path: Path) -> None:
    with pytest.raises(UnsupportedFormat):
        detect_format(tmp_path / "manual.pdf")
    (tmp_path / "manual.pdf").write_bytes(b"%PDF")
    with pytest.raises(UnsupportedFormat):
        read_documents(tmp_path)
    with pytest.raises(UnsupportedFormat):
        tag_documents([("rtf", b"{}")], ORACLE)


@pytest.mark.parametrize(
    ("text", "expected"),
    [
        ("Unlike standard SQL, LIMIT is not supported.", True),
        ("Every SELECT must have a FROM clause.", True),
        ("NVL replaces a null value with a default.", False),
    ],
)
def test_contrastive_cues(text: str, expected: bool) -> None:
    assert has_contrastive_cue(text) is expected


def test_build_knowledge_base(docs_dir: Path) -> None:
    kb = KnowledgeBase()
    backend = doc_backend()
    report = build_knowledge_base(kb, docs_dir, ORACLE, backend, tau_map=-1.0)

    assert (report.sections, report.mapped, report.dropped) == (9, 9, 0)
    assert report.functions_added + report.constraints_added == 9
    assert report.constraints_added >= 3
    assert report.skipped == ()
    rules = {entry.rule_spec for entry in kb.constraints.values()}
    assert {"follow the Row limiting restriction", "follow the Table aliases restriction", "follow the DUAL restriction"} <= rules
    assert any("LISTAGG aggregates the values" in prompt for prompt in backend.prompts("kb_function_entry"))

    again = build_knowledge_base(kb, docs_dir, ORACLE, doc_backend(), tau_map=-1.0)
    assert (again.functions_added, again.constraints_added) == (0, 0)


def test_build_at_default_threshold_routes_sections(docs_dir: Path, tmp_path: Path) -> None:
    docs = tmp_path / "docs"
    shutil.copytree(docs_dir, docs)
    (docs / "07_notes.txt").write_text(NOTES_DOC, encoding="utf-8")
    embedder = KeywordTargets(DOC_ROUTES)

    raw, names = read_documents(docs)
    mapping = map_syntax(tag_documents(raw, ORACLE, names), default_reference(), embedder=embedder)
    targets = {item.section.title: (item.target.track, item.target.key) for item in mapping.mapped}
    assert mapping.dropped == 2
    assert "Licensing" not in targets
    assert "Release notes" not in targets
    assert targets["Row limiting"] == ("function", "pagination_row_limiting")
    assert targets["Table aliases"] == ("rule", "table_alias_keyword")
    assert all(item.score >= DEFAULT_TAU_MAP for item in mapping.mapped)

    kb = KnowledgeBase()
    backend = doc_backend()
    report = build_knowledge_base(kb, docs, ORACLE, backend, embedder=embedder)

    assert (report.sections, report.mapped, report.dropped) == (11, 9, 2)
    assert report.functions_added >= 4
    assert report.constraints_added >= 2
    assert report.skipped == ()
    categories = {entry.implementation: entry.category for entry in kb.functions.values()}
    assert categories == {
        "LISTAGG(<column>)": "string_manipulation",
        "SUBSTR(<column>)": "string_manipulation",
        "TO_DATE(<column>)": "type_conversion_casting",
        "EXTRACT(<column>)": "date_time_operations",
        "NVL(<column>)": "conditional_null_handling",
        "ROW_NUMBER(<column>)": "window_functions",
    }
    rules = {entry.rule_spec for entry in kb.constraints.values()}
    assert rules == {
        "follow the Row limiting restriction",
        "follow the Table aliases restriction",
        "follow the DUAL restriction",
    }
    # The contrastive section was mapped to a function point but became a rule.
    rerouted = [p for p in backend.prompts("kb_constraint_entry") if "Unlike standard SQL" in p]
    assert len(rerouted) == 1
    assert "deviation from standard SQL" in rerouted[0]


def test_build_skips_unusable_sections(docs_dir: Path) -> None:
    backend = ScriptedBackend(
        {
            "kb_function_entry": lambda req: "no fields here",
            "kb_constraint_entry": lambda req: "nor here",
            "format_repair": lambda req: "still nothing",
        },
    )
    report = build_knowledge_base(KnowledgeBase(), docs_dir, ORACLE, backend, tau_map=-1.0)
    assert report.functions_added == report.constraints_added == 0
    assert sorted(report.skipped) == sorted(DOC_TITLES)


def test_high_threshold_drops_everything(docs_dir: Path) -> None:
    report = build_knowledge_base(KnowledgeBase(), docs_dir, ORACLE, ScriptedBackend(), tau_map=1.01)
    assert (report.mapped, report.dropped) == (0, 9)
