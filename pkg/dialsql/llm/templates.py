"""Prompt templates: one text file per prompt with ``{name}`` placeholders."""

from __future__ import annotations

import re
from functools import lru_cache
from pathlib import Path
from typing import Mapping

from dialsql.core.errors import UnboundPlaceholder, UnknownTemplate

TEMPLATES_DIR = Path(__file__).resolve().parent / "templates"
PLACEHOLDER = re.compile(r"\{(\w+)\}")


@lru_cache(maxsize=64)
def _read_template(path: Path) -> str:
    return path.read_text(encoding="utf-8")


def load_template(template_id: str, templates_dir: Path | None = None) -> str:
    path = (templates_dir or TEMPLATES_DIR) / f"{template_id}.txt"
    if not path.exists():
        msg = f"No prompt template named {template_id!r} in {path.parent}"
        raise UnknownTemplate(msg)
    return _read_template(path)


def placeholders(text: str) -> list[str]:
    return sorted(set(PLACEHOLDER.findall(text)))


def render(
    template_id: str,
    bindings: Mapping[str, str],
    templates_dir: Path | None = None,
) -> str:
    """Substitute every ``{name}`` placeholder of a template.

    Raises ``UnboundPlaceholder`` listing every name without a binding.
    """
    return render_text(load_template(template_id, templates_dir), bindings)


def render_text(text: str, bindings: Mapping[str, str]) -> str:
    missing = [name for name in placeholders(text) if name not in bindings]
    if missing:
        raise UnboundPlaceholder(missing)
    # Single pass, so bound values containing braces are never re-expanded.
    return PLACEHOLDER.sub(lambda match: str(bindings[match.group(1)]), text)
