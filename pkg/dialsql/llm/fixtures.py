"""On-disk store of recorded chat exchanges, keyed by template id and prompt hash."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path

from dialsql.core.errors import CorruptRecord

logger = logging.getLogger(__name__)

FIXTURE_SUFFIX = ".fixture"


def fixture_key(template_id: str, rendered_prompt: str) -> str:
    """Replay key: the template id plus a stable hash of the rendered prompt."""
    digest = hashlib.sha256(rendered_prompt.encode("utf-8")).hexdigest()
    return f"{template_id}:{digest}"


def _key_filename(key: str) -> str:
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:32] + FIXTURE_SUFFIX


def _encode_block(text: str) -> bytes:
    payload = text.encode("utf-8")
    return str(len(payload)).encode("ascii") + b"\n" + payload + b"\n"


def _decode_blocks(data: bytes, path: Path) -> list[str]:
    blocks: list[str] = []
    pos = 0
    while pos < len(data):
        newline = data.find(b"\n", pos)
        if newline < 0:
            raise CorruptRecord(str(path), len(blocks) + 1, "missing length prefix")
        try:
            size = int(data[pos:newline].decode("ascii"))
        except ValueError as exc:
            raise CorruptRecord(str(path), len(blocks) + 1, "bad length prefix") from exc
        start = newline + 1
        end = start + size
        if end > len(data):
            raise CorruptRecord(str(path), len(blocks) + 1, "truncated block")
        blocks.append(data[start:end].decode("utf-8"))
        pos = end + 1
    return blocks


@dataclass(frozen=True, slots=True)
class Fixture:
    template_id: str
    rendered_prompt: str
    reply: str


class FixtureStore:
    """Directory of fixture files, one per key.

    Each file holds two length-prefixed UTF-8 blocks: the request as JSON and
    the reply text. Reads are lock-free; writes are serialized.
    """

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self._lock = threading.Lock()

    def path_for(self, key: str) -> Path:
        return self.directory / _key_filename(key)

    def read(self, template_id: str, rendered_prompt: str) -> Fixture | None:
        key = fixture_key(template_id, rendered_prompt)
        path = self.path_for(key)
        if not path.exists():
            return None
        blocks = _decode_blocks(path.read_bytes(), path)
        if len(blocks) != 2:  # noqa: PLR2004
            raise CorruptRecord(str(path), 1, f"expected 2 blocks, found {len(blocks)}")
        request = json.loads(blocks[0])
        return Fixture(
            template_id=request["template_id"],
            rendered_prompt=request["rendered_prompt"],
            reply=blocks[1],
        )

    def write(self, template_id: str, rendered_prompt: str, reply: str) -> Path:
        key = fixture_key(template_id, rendered_prompt)
        request = json.dumps(
            {"template_id": template_id, "rendered_prompt": rendered_prompt},
            sort_keys=True,
            ensure_ascii=False,
        )
        data = _encode_block(request) + _encode_block(reply)
        path = self.path_for(key)
        with self._lock:
            self.directory.mkdir(parents=True, exist_ok=True)
            fd, tmp_name = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            Path(tmp_name).replace(path)
        logger.debug("Recorded fixture %s -> %s", key, path.name)
        return path

    def __len__(self) -> int:
        if not self.directory.exists():
            return 0
        return sum(1 for _ in self.directory.glob(f"*{FIXTURE_SUFFIX}"))
