"""Runtime settings: defaults, then ./dial.toml, then command-line flags, then environment."""

from __future__ import annotations

import logging
import os
import tomllib
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from dialsql.core.errors import PreconditionError
from dialsql.core.model import DialectId

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).resolve().parents[2]
ASSETS_DIR = PROJECT_ROOT / "assets"
DEFAULT_KB_DIR = ASSETS_DIR / "kb"
DEFAULT_CONFIG_FILE = Path("dial.toml")

LLM_MODES = ("http", "replay", "record")

# Environment variable -> settings field.
ENV_KEYS = {
    "DIAL_LLM_MODE": "llm_mode",
    "DIAL_LLM_ENDPOINT": "llm_endpoint",
    "DIAL_LLM_API_KEY": "llm_api_key",
    "DIAL_LLM_MODEL": "llm_model",
    "DIAL_LLM_FIXTURES": "fixtures_dir",
    "DIAL_KB_DIR": "kb_dir",
    "DIAL_LOG_LEVEL": "log_level",
}
PATH_FIELDS = frozenset({"kb_dir", "bench_dir", "out_dir", "fixtures_dir", "docs_dir"})
INT_FIELDS = frozenset({"max_syntax_iters", "max_semantic_iters", "top_k", "jobs"})
FLOAT_FIELDS = frozenset({"tau_map", "tau_rule", "routing_threshold"})
BOOL_FIELDS = frozenset({"deterministic", "redact", "use_planning", "use_kb", "use_correction"})


@dataclass(slots=True)
class Settings:
    """Resolved configuration shared by the CLI and the pipeline factory."""

    kb_dir: Path = DEFAULT_KB_DIR
    bench_dir: Path | None = None
    out_dir: Path | None = None
    docs_dir: Path | None = None
    dialect: DialectId | None = None
    executor: str = "simulated"
    llm_mode: str = "http"
    llm_endpoint: str = "http://localhost:8000/v1"
    llm_api_key: str | None = None
    llm_model: str = "default"
    fixtures_dir: Path | None = None
    max_syntax_iters: int = 5
    max_semantic_iters: int = 3
    deterministic: bool = True
    redact: bool = False
    use_planning: bool = True
    use_kb: bool = True
    use_correction: bool = True
    tau_map: float = 0.35
    tau_rule: float = 0.5
    # Deviates from the 0.75 default only when overridden explicitly.
    routing_threshold: float = 0.75
    top_k: int = 3
    jobs: int = os.cpu_count() or 1
    log_level: str = "WARNING"

    def __post_init__(self) -> None:
        if self.llm_mode not in LLM_MODES:
            msg = f"llm_mode must be one of {', '.join(LLM_MODES)}, got {self.llm_mode!r}."
            raise PreconditionError(msg)
        if self.max_syntax_iters < 1 or self.max_semantic_iters < 1:
            msg = "Iteration budgets must be at least 1."
            raise PreconditionError(msg)
        if self.top_k < 1:
            msg = "top_k must be at least 1."
            raise PreconditionError(msg)


def load_settings(
    config_path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> Settings:
    """Resolve settings from every source.

    Parameters
    ----------
    config_path:
        Optional TOML file; defaults to ``./dial.toml`` when present.
    overrides:
        Values from command-line flags. ``None`` values are ignored.
    environ:
        Environment mapping, ``os.environ`` when omitted.

    Returns
    -------
    Settings
        Settings with every path resolved to an absolute path.

    """
    values: dict[str, Any] = {}

    path = Path(config_path) if config_path is not None else DEFAULT_CONFIG_FILE
    if path.exists():
        with path.open("rb") as handle:
            values.update(tomllib.load(handle))
        logger.debug("Loaded settings file %s", path)
    elif config_path is not None:
        msg = f"Config file not found: {path}"
        raise FileNotFoundError(msg)

    values.update({key: value for key, value in (overrides or {}).items() if value is not None})

    env = os.environ if environ is None else environ
    for env_key, field_name in ENV_KEYS.items():
        if env.get(env_key):
            values[field_name] = env[env_key]

    known = {f.name for f in fields(Settings)}
    unknown = sorted(set(values) - known)
    if unknown:
        logger.warning("Ignoring unknown setting(s): %s", ", ".join(unknown))

    return Settings(**{key: _coerce(key, value) for key, value in values.items() if key in known})


def _coerce(key: str, value: Any) -> Any:
    if value is None:
        return None
    if key in PATH_FIELDS:
        return Path(value).expanduser().resolve()
    if key == "dialect":
        return DialectId.parse(value)
    if key in INT_FIELDS:
        return int(value)
    if key in FLOAT_FIELDS:
        return float(value)
    if key in BOOL_FIELDS and isinstance(value, str):
        return value.strip().lower() in {"1", "true", "yes", "on"}
    if key == "llm_mode":
        return str(value).lower()
    return value
