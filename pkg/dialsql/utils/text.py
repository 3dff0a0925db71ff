"""Small text helpers shared by the simulator, planner and audit."""

from __future__ import annotations

import hashlib
import re

_SINGLE_QUOTED = re.compile(r"'(?:[^']|'')*'")
_WHITESPACE = re.compile(r"\s+")
_SLUG_STRIP = re.compile(r"[^a-z0-9]+")


def mask_strings(sql: str) -> str:
    """Blank out single-quoted literals, keeping every character offset intact."""
    return _SINGLE_QUOTED.sub(lambda m: "'" + "_" * (len(m.group(0)) - 2) + "'", sql)


def collapse_space(text: str) -> str:
    return _WHITESPACE.sub(" ", text).strip()


def slugify(text: str) -> str:
    """``"Date & Time Operations"`` -> ``"date_time_operations"``."""
    return _SLUG_STRIP.sub("_", text.lower()).strip("_")


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def find_span(haystack: str, needle: str) -> tuple[int, int] | None:
    """Case-insensitive, whitespace-tolerant location of `needle`; end is exclusive."""
    if not needle:
        return None
    pattern = r"\s+".join(re.escape(part) for part in needle.split())
    match = re.search(pattern, haystack, flags=re.IGNORECASE)
    return (match.start(), match.end()) if match else None
