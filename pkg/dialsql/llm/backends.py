"""Chat backends: remote HTTP, replay, record, scripted, and transcript capture."""

from __future__ import annotations

import logging
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Mapping, Sequence

import requests

from dialsql.core.errors import BackendUnavailable, FixtureMiss, MalformedReply
from dialsql.llm.fixtures import fixture_key
from dialsql.llm.gateway import ChatReply, ChatRequest

if TYPE_CHECKING:
    from dialsql.llm.fixtures import FixtureStore
    from dialsql.llm.gateway import ChatBackend

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 120.0

ScriptedReply = str | Callable[[ChatRequest], str]


class HttpBackend:
    """OpenAI-compatible ``/chat/completions`` client."""

    backend_id = "http"

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout: float = DEFAULT_TIMEOUT_S,
        session: requests.Session | None = None,
    ) -> None:
        self.url = f"{endpoint.rstrip('/')}/chat/completions"
        self.model = model
        self.timeout = timeout
        self.session = session or requests.Session()
        self.headers = {"Content-Type": "application/json"}
        if api_key:
            self.headers["Authorization"] = f"Bearer {api_key}"

    def complete(self, req: ChatRequest) -> ChatReply:
        logger.info("chat call template=%s model=%s", req.template_id, self.model)
        payload = {
            "model": self.model,
            "temperature": req.temperature,
            "messages": [{"role": "user", "content": req.rendered_prompt}],
        }
        started = time.perf_counter()
        try:
            response = self.session.post(self.url, json=payload, headers=self.headers, timeout=self.timeout)
            response.raise_for_status()
        except requests.RequestException as exc:
            msg = f"Chat endpoint {self.url} failed: {exc}"
            raise BackendUnavailable(msg) from exc
        latency_ms = (time.perf_counter() - started) * 1000.0

        try:
            text = response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            msg = f"Chat endpoint returned an unexpected payload: {response.text[:200]!r}"
            raise MalformedReply(msg) from exc
        if not isinstance(text, str):
            msg = "Chat endpoint returned a non-text message."
            raise MalformedReply(msg)
        return ChatReply(text=text, backend_id=self.backend_id, latency_ms=latency_ms)


class ReplayBackend:
    """Answers from recorded fixtures only; a miss is an error, never a guess."""

    backend_id = "replay"

    def __init__(self, store: FixtureStore) -> None:
        self.store = store

    def complete(self, req: ChatRequest) -> ChatReply:
        fixture = self.store.read(req.template_id, req.rendered_prompt)
        if fixture is None:
            raise FixtureMiss(fixture_key(req.template_id, req.rendered_prompt))
        return ChatReply(text=fixture.reply, backend_id=self.backend_id, latency_ms=0.0)


class RecordingBackend:
    """Forwards to another backend and records every exchange."""

    backend_id = "record"

    def __init__(self, inner: ChatBackend, store: FixtureStore) -> None:
        self.inner = inner
        self.store = store

    def complete(self, req: ChatRequest) -> ChatReply:
        reply = self.inner.complete(req)
        self.store.write(req.template_id, req.rendered_prompt, reply.text)
        return reply


class ScriptedBackend:
    """Per-template FIFO of canned replies (or reply functions) for tests and demos.

    A template with a single remaining callable keeps answering with it.
    """

    backend_id = "scripted"

    def __init__(self, replies: Mapping[str, Sequence[ScriptedReply] | ScriptedReply] | None = None) -> None:
        self._queues: dict[str, deque[ScriptedReply]] = defaultdict(deque)
        self._lock = threading.Lock()
        self.requests: list[ChatRequest] = []
        for template_id, scripted in (replies or {}).items():
            self.add(template_id, scripted)

    def add(self, template_id: str, scripted: Sequence[ScriptedReply] | ScriptedReply) -> None:
        items = [scripted] if isinstance(scripted, str) or callable(scripted) else list(scripted)
        with self._lock:
            self._queues[template_id].extend(items)

    def complete(self, req: ChatRequest) -> ChatReply:
        with self._lock:
            self.requests.append(req)
            queue = self._queues.get(req.template_id)
            if not queue:
                raise FixtureMiss(fixture_key(req.template_id, req.rendered_prompt))
            scripted = queue[0] if len(queue) == 1 and callable(queue[0]) else queue.popleft()
        text = scripted(req) if callable(scripted) else scripted
        return ChatReply(text=text, backend_id=self.backend_id, latency_ms=0.0)

    def prompts(self, template_id: str) -> list[str]:
        return [req.rendered_prompt for req in self.requests if req.template_id == template_id]


@dataclass(frozen=True, slots=True)
class Exchange:
    template_id: str
    prompt: str
    reply: str


class TranscriptBackend:
    """Wraps a backend and keeps every exchange of one pipeline run, in order."""

    def __init__(self, inner: ChatBackend) -> None:
        self.inner = inner
        self.backend_id = inner.backend_id
        self.exchanges: list[Exchange] = []

    def complete(self, req: ChatRequest) -> ChatReply:
        reply = self.inner.complete(req)
        self.exchanges.append(Exchange(req.template_id, req.rendered_prompt, reply.text))
        return reply
