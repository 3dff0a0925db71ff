"""Repair trajectories: the ordered record of one pipeline run and its JSON dump."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Literal

from dialsql.core.errors import IoError, PreconditionError
from dialsql.utils.text import sha256_hex

if TYPE_CHECKING:
    from pathlib import Path

    from dialsql.audit.audit import AuditReport
    from dialsql.core.model import ExecutionOutcome, SqlText, TranslationTask
    from dialsql.llm.backends import Exchange

logger = logging.getLogger(__name__)

Stage = Literal["init", "rule_fix", "deep_fix", "semantic_fix"]

STAGES: tuple[Stage, ...] = ("init", "rule_fix", "deep_fix", "semantic_fix")
FIX_STAGES = frozenset({"rule_fix", "deep_fix", "semantic_fix"})
# Stage rank; rule_fix and deep_fix interleave freely.
_RANK = {"init": 0, "rule_fix": 1, "deep_fix": 1, "semantic_fix": 2}


@dataclass(frozen=True, slots=True)
class RepairStep:
    stage: Stage
    sql: SqlText
    outcome: ExecutionOutcome
    audit: AuditReport | None = None
    applied_rule: str | None = None

    @property
    def passed(self) -> bool:
        return self.outcome.ok and self.audit is not None and self.audit.passed

    def to_dict(self) -> dict[str, Any]:
        return {
            "stage": self.stage,
            "sql": self.sql.text,
            "dialect": self.sql.dialect.value,
            "outcome": self.outcome.to_dict(),
            "audit": self.audit.to_dict() if self.audit is not None else None,
            "applied_rule": self.applied_rule,
        }


@dataclass(slots=True)
class RepairTrajectory:
    """Steps of one run in stage order; `final` is set only once a step fully passes."""

    steps: list[RepairStep] = field(default_factory=list)
    final: SqlText | None = None
    exchanges: list[Exchange] = field(default_factory=list)

    def record(self, step: RepairStep) -> RepairStep:
        if not self.steps and step.stage != "init":
            msg = f"The first step must be init, got {step.stage}."
            raise PreconditionError(msg)
        if self.steps and step.stage == "init":
            msg = "init may only be the first step."
            raise PreconditionError(msg)
        if self.steps and _RANK[step.stage] < _RANK[self.steps[-1].stage]:
            msg = f"{step.stage} cannot follow {self.steps[-1].stage}."
            raise PreconditionError(msg)
        self.steps.append(step)
        logger.debug("step %d %s ok=%s", len(self.steps), step.stage, step.outcome.ok)
        return step

    def finalize(self) -> None:
        """Set `final` from the last step when it executes and passed its audit."""
        last = self.steps[-1] if self.steps else None
        self.final = last.sql if last is not None and last.passed else None

    @property
    def last(self) -> RepairStep | None:
        return self.steps[-1] if self.steps else None

    @property
    def current_sql(self) -> SqlText | None:
        return self.steps[-1].sql if self.steps else None

    def fix_steps(self) -> list[RepairStep]:
        return [step for step in self.steps if step.stage in FIX_STAGES]

    def stages(self) -> list[str]:
        return [step.stage for step in self.steps]

    def to_dict(self, redact: bool = False) -> dict[str, Any]:
        def hide(text: str) -> str:
            return f"sha256:{sha256_hex(text)}" if redact else text

        return {
            "steps": [step.to_dict() for step in self.steps],
            "final": self.final.text if self.final is not None else None,
            "exchanges": [
                {"template_id": ex.template_id, "prompt": hide(ex.prompt), "reply": hide(ex.reply)}
                for ex in self.exchanges
            ],
        }


def dump_trajectory(
    trajectory: RepairTrajectory,
    task: TranslationTask,
    out_dir: Path,
    redact: bool = False,
) -> Path:
    """Write ``<task hash>.json`` under `out_dir`; output is byte-stable for equal runs."""
    path = out_dir / f"{task.task_hash()}.json"
    document = {
        "task": {"question": task.question, "dialect": task.dialect.value, "hash": task.task_hash()},
        "trajectory": trajectory.to_dict(redact=redact),
    }
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    except OSError as exc:
        msg = f"Cannot write trajectory to {path}: {exc}"
        raise IoError(msg) from exc
    logger.info("Trajectory written to %s", path)
    return path
