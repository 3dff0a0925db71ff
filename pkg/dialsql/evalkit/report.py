"""Report emission: ``report.json`` for machines, ``report.md`` for people."""

from __future__ import annotations

import json
import logging
from typing import TYPE_CHECKING

from dialsql.core.errors import IoError

if TYPE_CHECKING:
    from pathlib import Path

    from dialsql.evalkit.metrics import MetricsReport
    from dialsql.evalkit.runner import ItemResult

logger = logging.getLogger(__name__)

REPORT_JSON = "report.json"
REPORT_MD = "report.md"


def _percent(value: float | None) -> str:
    return "n/a" if value is None else f"{value * 100:.2f}"


def render_markdown(report: MetricsReport, method: str = "dialsql") -> str:
    """One row per method; Exec/Acc/DFC column groups per dialect, then the overall scores."""
    dialects = sorted(report.per_dialect)
    header = ["Method"]
    for name in dialects:
        header += [f"{name} Exec", f"{name} Acc", f"{name} DFC"]
    header += ["Overall Exec", "Overall Acc"]
    row = [method]
    for name in dialects:
        scores = report.per_dialect[name]
        row += [_percent(scores.exec), _percent(scores.acc), _percent(scores.dfc)]
    row += [_percent(report.overall.get("exec")), _percent(report.overall.get("acc"))]

    lines = [
        "# Evaluation report",
        "",
        "| " + " | ".join(header) + " |",
        "|" + "|".join(" --- " for _ in header) + "|",
        "| " + " | ".join(row) + " |",
        "",
        f"Items: {report.counts.get('items', 0)}, evaluated on every dialect: {report.counts.get('common_items', 0)}, "
        f"runs: {report.counts.get('runs', 0)}.",
        "",
    ]
    return "\n".join(lines)


def write_report(report: MetricsReport, results: list[ItemResult], out_dir: Path) -> tuple[Path, Path]:
    document = {
        **report.to_dict(),
        "items": [
            {
                "qid": r.qid,
                "dialect": r.dialect.value,
                "sql": r.sql,
                "exec": r.outcome.ok,
                "acc": r.accuracy_case.correct,
                "dfc": r.dfc,
                "passed": r.passed,
                "failure": r.failure,
            }
            for r in results
        ],
    }
    json_path, md_path = out_dir / REPORT_JSON, out_dir / REPORT_MD
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        json_path.write_text(json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
        md_path.write_text(render_markdown(report), encoding="utf-8")
    except OSError as exc:
        msg = f"Cannot write report to {out_dir}: {exc}"
        raise IoError(msg) from exc
    logger.info("Report written to %s", out_dir)
    return json_path, md_path
