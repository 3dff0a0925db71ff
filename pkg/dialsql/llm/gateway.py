"""Chat request/reply carriers, the backend protocol, and structured-reply retries."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Mapping, Protocol, TypeVar

from dialsql.core.errors import DialError, PreconditionError
from dialsql.llm.templates import render

if TYPE_CHECKING:
    from pathlib import Path

logger = logging.getLogger(__name__)

T = TypeVar("T")

# Repair attempts after the first reply fails to parse.
FORMAT_RETRIES = 2


@dataclass(frozen=True, slots=True)
class ChatRequest:
    template_id: str
    rendered_prompt: str
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if not self.rendered_prompt.strip():
            msg = "rendered_prompt must not be empty."
            raise PreconditionError(msg)


@dataclass(frozen=True, slots=True)
class ChatReply:
    text: str
    backend_id: str
    latency_ms: float = 0.0


class ChatBackend(Protocol):
    """Anything that turns a chat request into a reply."""

    backend_id: str

    def complete(self, req: ChatRequest) -> ChatReply: ...


class ReplyFormatError(DialError):
    """Raised by reply parsers; converted to the caller's error type after retries.

    `final_error` overrides that type when the last failure has a more specific cause.
    """

    def __init__(self, message: str, *, final_error: type[DialError] | None = None) -> None:
        super().__init__(message)
        self.final_error = final_error


def ask(
    llm: ChatBackend,
    template_id: str,
    bindings: Mapping[str, str],
    parse: Callable[[str], T],
    *,
    error_cls: type[DialError],
    retries: int = FORMAT_RETRIES,
    templates_dir: Path | None = None,
) -> T:
    """Render a prompt, send it, and parse the reply, repairing the format on failure.

    Parameters
    ----------
    llm:
        Chat backend.
    template_id:
        Prompt template to render.
    bindings:
        Placeholder values for the template.
    parse:
        Reply parser; raises ``ReplyFormatError`` on a malformed reply.
    error_cls:
        Error raised once every repair attempt failed.
    retries:
        Number of ``format_repair`` follow-ups.
    templates_dir:
        Optional template directory override.

    Returns
    -------
    T
        The parsed reply.

    """
    prompt = render(template_id, bindings, templates_dir=templates_dir)
    reply = llm.complete(ChatRequest(template_id=template_id, rendered_prompt=prompt))
    for attempt in range(retries + 1):
        try:
            return parse(reply.text)
        except ReplyFormatError as exc:
            if attempt == retries:
                msg = f"{template_id}: reply unusable after {retries} repair(s): {exc}"
                raise (exc.final_error or error_cls)(msg) from exc
            logger.warning("%s reply malformed (%s); requesting repair", template_id, exc)
            repair_prompt = render(
                "format_repair",
                {"original_prompt": prompt, "reply": reply.text, "problem": str(exc)},
                templates_dir=templates_dir,
            )
            reply = llm.complete(ChatRequest(template_id="format_repair", rendered_prompt=repair_prompt))

    msg = f"{template_id}: no reply parsed"
    raise error_cls(msg)


def ask_text(
    llm: ChatBackend,
    template_id: str,
    bindings: Mapping[str, str],
    *,
    templates_dir: Path | None = None,
) -> str:
    """Render, send and return the raw reply text."""
    prompt = render(template_id, bindings, templates_dir=templates_dir)
    return llm.complete(ChatRequest(template_id=template_id, rendered_prompt=prompt)).text
