"""Error-signature normalization and signature-pattern matching."""

from __future__ import annotations

import re
from dataclasses import dataclass
from fnmatch import fnmatchcase

from dialsql.core.errors import PreconditionError
from dialsql.core.model import DialectId, ErrorTrace

ID = "⟨id⟩"
LIT = "⟨lit⟩"
NUM = "⟨num⟩"

# Vendor code extractors, tried in order; group 1 is the code.
_VENDOR_PATTERNS = (
    re.compile(r"\b(ORA-\d{5})\b"),
    re.compile(r"^\s*ERROR\s+(\d{3,5})\s*\(\w{5}\)"),
    re.compile(r"^\s*Msg\s+(\d+)\b"),
    re.compile(r"^\s*(\d{3,5}):"),
    re.compile(r"\bSQLSTATE\[?\s*([0-9A-Z]{5})\b"),
)
# Prefixes carrying only the vendor code, stripped from the template.
_PREFIXES = (
    re.compile(r"^\s*ORA-\d{5}:\s*"),
    re.compile(r"^\s*ERROR\s+\d{3,5}\s*\(\w{5}\):\s*"),
    re.compile(r"^\s*Msg\s+\d+,\s*Level\s+\d+,\s*State\s+\d+(?:,\s*Line\s+\d+)?:?\s*"),
    re.compile(r"^\s*\d{3,5}:\s*"),
    re.compile(r"^\s*ERROR:\s*"),
)
_DOUBLE_QUOTED = re.compile(r'"[^"]*"')
_BACKTICKED = re.compile(r"`[^`]*`")
_BRACKETED = re.compile(r"\[[^\]]*\]")
_SINGLE_QUOTED = re.compile(r"'(?:[^']|'')*'")
_UNQUOTED_OBJECT = re.compile(r"\b(no such (?:table|column|function)):\s*[\w.]+")
_DOTTED = re.compile(r"\b[A-Za-z_]\w*\.[A-Za-z_]\w*\b")
_NUMBER = re.compile(r"(?<![\w⟩])\d+(?:\.\d+)?(?![\w⟨])")
_SPACES = re.compile(r"\s+")


@dataclass(frozen=True, slots=True)
class ErrorSignature:
    vendor_code: str | None
    template: str
    dialect: DialectId

    @property
    def key(self) -> str:
        """``"<vendor code or ->: <template>"``, the text signature patterns match."""
        return f"{self.vendor_code or '-'}: {self.template}"

    def to_trace(self) -> ErrorTrace:
        return ErrorTrace(message=self.template, vendor_code=self.vendor_code)


def extract_vendor_code(message: str) -> str | None:
    for pattern in _VENDOR_PATTERNS:
        match = pattern.search(message)
        if match:
            return match.group(1)
    return None


def normalize_signature(trace: ErrorTrace, dialect: DialectId) -> ErrorSignature:
    """Replace identifiers, literals and numbers in an error message with placeholders.

    Idempotent: feeding the resulting signature back in yields the same signature.
    """
    if not trace.message.strip():
        msg = "Cannot normalize an empty error message."
        raise PreconditionError(msg)

    vendor_code = trace.vendor_code or extract_vendor_code(trace.message)
    template = trace.message
    for prefix in _PREFIXES:
        template = prefix.sub("", template, count=1)

    template = _DOUBLE_QUOTED.sub(ID, template)
    template = _BACKTICKED.sub(ID, template)
    template = _BRACKETED.sub(ID, template)
    template = _SINGLE_QUOTED.sub(LIT, template)
    template = _UNQUOTED_OBJECT.sub(rf"\1: {ID}", template)
    template = _DOTTED.sub(ID, template)
    template = _NUMBER.sub(NUM, template)
    template = _SPACES.sub(" ", template).strip() or "error"

    return ErrorSignature(vendor_code=vendor_code, template=template, dialect=dialect)


def matches_pattern(pattern: str, signature: ErrorSignature, segment: str = "") -> bool:
    """Glob-match ``"<signature glob>[ @ <segment glob>]"`` against a signature.

    The signature part matches :pyattr:`ErrorSignature.key`; the optional
    segment part matches the failing segment, case-insensitively.
    """
    signature_glob, _, segment_glob = pattern.partition(" @ ")
    if not fnmatchcase(signature.key, signature_glob.strip()):
        return False
    if not segment_glob:
        return True
    return fnmatchcase(segment.strip().upper(), segment_glob.strip().upper())


def escape_glob(text: str) -> str:
    """Quote glob metacharacters so `text` matches only itself."""
    return "".join(f"[{ch}]" if ch in "*?[" else ch for ch in text)


def literal_pattern(signature: ErrorSignature) -> str:
    """A pattern matching exactly this signature, with any failing segment."""
    return escape_glob(signature.key)
