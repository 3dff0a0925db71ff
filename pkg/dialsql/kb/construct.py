"""Knowledge-base construction from vendor documentation: tag, map, generate."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from typing import TYPE_CHECKING, Literal, Sequence

from dialsql.core.errors import GenerationFormatError, UnsupportedFormat
from dialsql.kb.model import ConstraintEntry, FunctionEntry, constraint_entry_id, function_entry_id, function_index_text
from dialsql.llm.embed import cosine, default_embedder
from dialsql.llm.gateway import ReplyFormatError, ask

if TYPE_CHECKING:
    from dialsql.core.model import DialectId
    from dialsql.kb.reference import CanonicalReference
    from dialsql.kb.store import KnowledgeBase
    from dialsql.llm.embed import EmbeddingProvider
    from dialsql.llm.gateway import ChatBackend

logger = logging.getLogger(__name__)

DocFormat = Literal["html", "json", "md", "sgml", "txt"]
FORMATS: tuple[DocFormat, ...] = ("html", "json", "md", "sgml", "txt")
SUFFIX_FORMATS: dict[str, DocFormat] = {
    ".html": "html",
    ".htm": "html",
    ".json": "json",
    ".md": "md",
    ".markdown": "md",
    ".sgml": "sgml",
    ".sgm": "sgml",
    ".xml": "sgml",
    ".txt": "txt",
}
DEFAULT_TAU_MAP = 0.35

# Phrases signalling a deviation from standard SQL; such sections become constraints.
CONTRASTIVE_CUES = (
    "unlike standard sql", "unlike ansi", "unlike other databases", "differs from standard",
    "not supported", "is not allowed", "must not", "cannot be used", "must be enclosed", "must use",
    "is required", "must have",
)  # fmt: skip

# Generic constraint patterns queried by the rule track.
SEED_RULE_PATTERNS: dict[str, str] = {
    "identifier_quoting": "identifiers containing uppercase letters or special characters must be enclosed in double quotes",
    "table_alias_keyword": "table aliases must or must not use the AS keyword in the FROM clause",
    "derived_table_alias": "every derived table or subquery in FROM must have its own alias",
    "row_limit_syntax": "the row limiting clause LIMIT, TOP or FETCH FIRST rows syntax is restricted",
    "function_arity": "a function accepts only a fixed number of arguments",
    "group_by_order_by": "ORDER BY and select list expressions must appear in the GROUP BY clause",
    "scalar_subquery": "a scalar subquery must return exactly one row and one column",
    "string_literal_quoting": "string literals must be enclosed in single quotes, double quotes denote identifiers",
    "from_clause_required": "every SELECT statement requires a FROM clause, use the DUAL table",
    "nested_aggregates": "aggregate functions cannot be nested inside other aggregate functions",
    "distinct_window": "DISTINCT is not allowed inside window function calls",
}

_MD_HEADING = re.compile(r"^(#{1,2})\s+(.*?)\s*#*\s*$", re.MULTILINE)
_SGML_OPEN = re.compile(r"<(sect\d?|section|refsect\d?|refentry|chapter)\b[^>]*>", re.IGNORECASE)
_SGML_TITLE = re.compile(r"<title>(.*?)</title>", re.IGNORECASE | re.DOTALL)
_TAGS = re.compile(r"<[^>]+>")
_PARAGRAPH_BREAK = re.compile(r"\n\s*\n")
_HEADING_TAGS = frozenset({"h1", "h2", "h3", "h4", "h5", "h6"})


@dataclass(frozen=True, slots=True)
class Section:
    title: str
    text: str
    raw: bytes
    source: str = ""

    @property
    def content(self) -> str:
        return f"{self.title}\n{self.text}".strip()


@dataclass(frozen=True, slots=True)
class TaggedCorpus:
    dialect: DialectId
    sections: tuple[Section, ...]

    @property
    def merged(self) -> str:
        """All sections in one document, each wrapped in dialect tags."""
        tag = self.dialect.value
        return "\n".join(f"<{tag}>\n{section.content}\n</{tag}>" for section in self.sections)


@dataclass(frozen=True, slots=True)
class Target:
    track: Literal["function", "rule"]
    key: str  # category id for functions, seed pattern id for rules
    label: str  # atomic point name or seed pattern text


@dataclass(frozen=True, slots=True)
class MappedSection:
    section: Section
    target: Target
    score: float


@dataclass(frozen=True, slots=True)
class MappingResult:
    mapped: tuple[MappedSection, ...]
    dropped: int


@dataclass(slots=True)
class GenerationResult:
    functions: list[FunctionEntry] = field(default_factory=list)
    constraints: list[ConstraintEntry] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)


@dataclass(frozen=True, slots=True)
class BuildReport:
    sections: int
    mapped: int
    dropped: int
    functions_added: int
    constraints_added: int
    skipped: tuple[str, ...]


def detect_format(path: Path) -> DocFormat:
    try:
        return SUFFIX_FORMATS[path.suffix.lower()]
    except KeyError as exc:
        msg = f"Unsupported documentation format {path.suffix!r} ({path.name})."
        raise UnsupportedFormat(msg) from exc


def _md_sections(data: bytes, source: str) -> list[Section]:
    text = data.decode("utf-8")
    headings = list(_MD_HEADING.finditer(text))
    sections: list[Section] = []
    preamble_end = headings[0].start() if headings else len(text)
    if text[:preamble_end].strip():
        sections.append(_section("", text[:preamble_end], source))
    for idx, match in enumerate(headings):
        end = headings[idx + 1].start() if idx + 1 < len(headings) else len(text)
        body = text[match.end() : end]
        sections.append(_section(match.group(2), body, source, raw=text[match.start() : end]))
    return sections


def _section(title: str, body: str, source: str, raw: str | None = None) -> Section:
    return Section(title=title.strip(), text=body.strip(), raw=(raw if raw is not None else body).encode("utf-8"), source=source)


class _HeadingWalker(HTMLParser):
    """Flattens nested sections: every heading opens a section that runs to the next heading."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.starts: list[tuple[int, int]] = []  # (line, column) of each heading start tag
        self.titles: list[str] = []
        self.bodies: list[list[str]] = []
        self._in_heading = False
        self._skip = 0

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:  # noqa: ARG002
        if tag in {"script", "style"}:
            self._skip += 1
        elif tag in _HEADING_TAGS:
            self.starts.append(self.getpos())
            self.titles.append("")
            self.bodies.append([])
            self._in_heading = True

    def handle_endtag(self, tag: str) -> None:
        if tag in {"script", "style"} and self._skip:
            self._skip -= 1
        elif tag in _HEADING_TAGS:
            self._in_heading = False

    def handle_data(self, data: str) -> None:
        if self._skip or not self.titles:
            return
        if self._in_heading:
            self.titles[-1] += data
        else:
            self.bodies[-1].append(data)


def _html_sections(data: bytes, source: str) -> list[Section]:
    text = data.decode("utf-8")
    walker = _HeadingWalker()
    walker.feed(text)
    walker.close()

    line_offsets = [0]
    for line in text.splitlines(keepends=True):
        line_offsets.append(line_offsets[-1] + len(line))
    offsets = [line_offsets[line - 1] + col for line, col in walker.starts]

    sections: list[Section] = []
    for idx, title in enumerate(walker.titles):
        end = offsets[idx + 1] if idx + 1 < len(offsets) else len(text)
        body = re.sub(r"\s+", " ", " ".join(walker.bodies[idx]))
        sections.append(_section(re.sub(r"\s+", " ", title), body, source, raw=text[offsets[idx] : end]))
    return sections


def _json_sections(data: bytes, source: str) -> list[Section]:
    document = json.loads(data.decode("utf-8"))
    items = document.get("sections", []) if isinstance(document, dict) else document
    sections: list[Section] = []
    for item in items:
        if not isinstance(item, dict):
            continue
        title = str(item.get("title", item.get("heading", "")))
        body = str(item.get("body", item.get("content", "")))
        sections.append(_section(title, body, source, raw=body))
    return sections


def _sgml_sections(data: bytes, source: str) -> list[Section]:
    text = data.decode("utf-8")
    opens = list(_SGML_OPEN.finditer(text))
    sections: list[Section] = []
    for idx, match in enumerate(opens):
        end = opens[idx + 1].start() if idx + 1 < len(opens) else len(text)
        chunk = text[match.start() : end]
        title_match = _SGML_TITLE.search(chunk)
        title = _TAGS.sub("", title_match.group(1)) if title_match else ""
        body = chunk[title_match.end() :] if title_match else chunk
        body = re.sub(r"\s+", " ", _TAGS.sub(" ", body))
        if title.strip() or body.strip():
            sections.append(_section(title, body, source, raw=chunk))
    return sections


def _txt_sections(data: bytes, source: str) -> list[Section]:
    text = data.decode("utf-8")
    sections: list[Section] = []
    for paragraph in _PARAGRAPH_BREAK.split(text):
        if not paragraph.strip():
            continue
        first, _, rest = paragraph.strip().partition("\n")
        sections.append(_section(first, rest, source, raw=paragraph))
    return sections


_SPLITTERS = {
    "md": _md_sections,
    "html": _html_sections,
    "json": _json_sections,
    "sgml": _sgml_sections,
    "txt": _txt_sections,
}


def tag_documents(raw_docs: Sequence[tuple[str, bytes]], dialect: DialectId, sources: Sequence[str] = ()) -> TaggedCorpus:
    """Split raw documents into demarcated sections following each format's heading rules.

    Parameters
    ----------
    raw_docs:
        ``(format, bytes)`` pairs, format one of html, json, md, sgml, txt.
    dialect:
        Dialect whose tags wrap every section.
    sources:
        Optional document names, parallel to `raw_docs`, kept on each section.

    Returns
    -------
    TaggedCorpus
        Sections of all documents in input order.

    """
    sections: list[Section] = []
    for idx, (fmt, data) in enumerate(raw_docs):
        splitter = _SPLITTERS.get(fmt.lower())
        if splitter is None:
            msg = f"Unsupported documentation format {fmt!r}; expected one of {', '.join(FORMATS)}."
            raise UnsupportedFormat(msg)
        sections.extend(splitter(data, sources[idx] if idx < len(sources) else f"doc{idx}"))
    return TaggedCorpus(dialect=dialect, sections=tuple(sections))


def _rule_targets(seed_rules: dict[str, str]) -> list[Target]:
    return [Target(track="rule", key=key, label=text) for key, text in seed_rules.items()]


def map_syntax(
    corpus: TaggedCorpus,
    csr: CanonicalReference,
    seed_rules: dict[str, str] | None = None,
    embedder: EmbeddingProvider | None = None,
    tau_map: float = DEFAULT_TAU_MAP,
) -> MappingResult:
    """Assign each section to its best atomic point or generic rule pattern, dropping weak matches."""
    embedder = embedder or default_embedder()
    targets = [Target(track="function", key=cat.id, label=point.name) for cat, point in csr.atomic_points()]
    queries = [embedder.embed(point.query_text) for _, point in csr.atomic_points()]
    for target in _rule_targets(seed_rules if seed_rules is not None else SEED_RULE_PATTERNS):
        targets.append(target)
        queries.append(embedder.embed(target.label))

    mapped: list[MappedSection] = []
    dropped = 0
    for section in corpus.sections:
        if not section.content.strip():
            dropped += 1
            continue
        vector = embedder.embed(section.content)
        scores = [cosine(vector, query) for query in queries]
        best = max(range(len(scores)), key=lambda idx: (scores[idx], -idx))
        if scores[best] < tau_map:
            dropped += 1
            logger.debug("Dropped section %r (best %.3f)", section.title, scores[best])
            continue
        mapped.append(MappedSection(section=section, target=targets[best], score=scores[best]))
    logger.info("Mapped %d sections, dropped %d", len(mapped), dropped)
    return MappingResult(mapped=tuple(mapped), dropped=dropped)


def has_contrastive_cue(text: str) -> bool:
    lowered = " ".join(text.lower().split())
    return any(cue in lowered for cue in CONTRASTIVE_CUES)


def _field_lines(text: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    for line in text.splitlines():
        name, sep, value = line.partition(":")
        if sep and name.strip().isupper() and " " not in name.strip():
            fields[name.strip()] = value.strip()
    return fields


def _parse_function_reply(text: str) -> tuple[tuple[str, ...], str, str]:
    fields = _field_lines(text)
    scenarios = tuple(s.strip() for s in fields.get("SCENARIOS", "").split(";") if s.strip())
    specification = fields.get("SPECIFICATION", "")
    implementation = fields.get("IMPLEMENTATION", "")
    if not scenarios or not specification or not implementation:
        msg = "reply needs SCENARIOS:, SPECIFICATION: and IMPLEMENTATION: lines"
        raise ReplyFormatError(msg)
    return scenarios, specification, implementation


def _parse_constraint_reply(text: str) -> tuple[str, tuple[str, ...]]:
    fields = _field_lines(text)
    rule = fields.get("RULE", "")
    if not rule:
        msg = "reply needs a RULE: line"
        raise ReplyFormatError(msg)
    patterns = tuple(p.strip() for p in fields.get("SIGNATURES", "").split(";") if p.strip())
    return rule, patterns


def generate_entries(
    mapping: MappingResult,
    llm: ChatBackend,
    dialect: DialectId,
    csr: CanonicalReference,
    embedder: EmbeddingProvider | None = None,
) -> GenerationResult:
    """Turn mapped sections into function and constraint entries; unusable replies skip the section."""
    embedder = embedder or default_embedder()
    result = GenerationResult()
    for item in mapping.mapped:
        section = item.section
        track = item.target.track
        if track == "function" and has_contrastive_cue(section.content):
            logger.info("Section %r rerouted to constraints by contrastive cue", section.title)
            track = "rule"
        try:
            if track == "function":
                result.functions.append(_function_entry(item, llm, dialect, csr, embedder))
            else:
                result.constraints.append(_constraint_entry(item, llm, dialect))
        except GenerationFormatError as exc:
            logger.warning("Skipped section %r: %s", section.title, exc)
            result.skipped.append(section.title or section.source)
    return result


def _function_entry(
    item: MappedSection,
    llm: ChatBackend,
    dialect: DialectId,
    csr: CanonicalReference,
    embedder: EmbeddingProvider,
) -> FunctionEntry:
    category = csr.get(item.target.key)
    scenarios, specification, implementation = ask(
        llm,
        "kb_function_entry",
        {
            "dialect": dialect.value,
            "category": category.name if category else item.target.key,
            "atomic_point": item.target.label,
            "section": item.section.content,
        },
        _parse_function_reply,
        error_cls=GenerationFormatError,
    )
    vector = embedder.embed(function_index_text(item.target.key, scenarios, specification))
    return FunctionEntry(
        id=function_entry_id(dialect, item.target.key, implementation),
        dialect=dialect,
        category=item.target.key,
        scenarios=scenarios,
        specification=specification,
        implementation=implementation,
        embedding=tuple(float(x) for x in vector),
    )


def _constraint_entry(item: MappedSection, llm: ChatBackend, dialect: DialectId) -> ConstraintEntry:
    pattern = item.target.label if item.target.track == "rule" else "deviation from standard SQL"
    rule, patterns = ask(
        llm,
        "kb_constraint_entry",
        {"dialect": dialect.value, "rule_pattern": pattern, "section": item.section.content},
        _parse_constraint_reply,
        error_cls=GenerationFormatError,
    )
    return ConstraintEntry(
        id=constraint_entry_id(dialect, rule),
        dialect=dialect,
        rule_spec=rule,
        signature_patterns=patterns,
    )


def read_documents(docs_dir: str | Path) -> tuple[list[tuple[str, bytes]], list[str]]:
    """Every supported file under `docs_dir`, sorted by relative path."""
    root = Path(docs_dir)
    docs: list[tuple[str, bytes]] = []
    names: list[str] = []
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        docs.append((detect_format(path), path.read_bytes()))
        names.append(path.relative_to(root).as_posix())
    return docs, names


def build_knowledge_base(
    kb: KnowledgeBase,
    docs_dir: str | Path,
    dialect: DialectId,
    llm: ChatBackend,
    embedder: EmbeddingProvider | None = None,
    tau_map: float = DEFAULT_TAU_MAP,
) -> BuildReport:
    """Run tagging, mapping and generation over a documentation directory and commit the entries."""
    docs, names = read_documents(docs_dir)
    corpus = tag_documents(docs, dialect, names)
    mapping = map_syntax(corpus, kb.csr, embedder=embedder, tau_map=tau_map)
    generated = generate_entries(mapping, llm, dialect, kb.csr, embedder)

    functions_added = sum(kb.add_function(entry).kind == "added" for entry in generated.functions)
    constraints_added = sum(kb.add_constraint(entry).kind == "added" for entry in generated.constraints)
    logger.info("Built %d function and %d constraint entries for %s", functions_added, constraints_added, dialect.value)
    return BuildReport(
        sections=len(corpus.sections),
        mapped=len(mapping.mapped),
        dropped=mapping.dropped,
        functions_added=functions_added,
        constraints_added=constraints_added,
        skipped=tuple(generated.skipped),
    )
