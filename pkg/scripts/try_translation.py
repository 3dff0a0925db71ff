from __future__ import annotations

import argparse
import json
import sys
import uuid
from pathlib import Path
from typing import Any

from dialsql.aide.pipeline import PipelineDeps, PipelineOptions, run_pipeline
from dialsql.cli import build_backend, echo, open_knowledge_base
from dialsql.core.config import load_settings
from dialsql.core.errors import DialError
from dialsql.core.model import DialectId, SchemaCatalog, TranslationTask
from dialsql.dialects.embedded import make_executor

REQUIRED_KEYS = ("question", "dialect", "schema")
TEMPLATE = {
    "question": "What is the total paid amount per city?",
    "dialect": "oracle",
    "schema": {"tables": [{"name": "orders", "columns": [{"name": "amount", "type": "DECIMAL(10,2)"}]}]},
}


def parse_args() -> argparse.Namespace:
    """Parse CLI arguments."""
    parser = argparse.ArgumentParser(
        description=(
            "Create a temporary task file, wait for it to be filled with a question, dialect and schema, "
            "then translate it and print the repair trajectory as JSON."
        ),
    )
    parser.add_argument(
        "-d",
        "--directory",
        default=".",
        help="Directory where the temporary task file will be created.",
    )
    parser.add_argument("--config", type=Path, help="Settings file (default ./dial.toml when present).")
    return parser.parse_args()


def create_temp_task_file(directory: Path) -> Path:
    """Create a uniquely named task file pre-filled with an example."""
    directory.mkdir(parents=True, exist_ok=True)
    temp_path = directory / f"task-{uuid.uuid4().hex}.json"
    temp_path.write_text(json.dumps(TEMPLATE, indent=2) + "\n", encoding="utf-8")
    return temp_path


def wait_for_user_to_fill(path: Path) -> None:
    echo(f"Edit the task in: {path}")
    echo("Save the file, then return here.")
    input("Press Enter to continue once the file is ready...")


def cleanup_file(path: Path) -> None:
    try:
        path.unlink()
    except FileNotFoundError:
        return


def load_task(path: Path) -> TranslationTask:
    """Read and validate the task document."""
    raw_contents = path.read_text(encoding="utf-8").strip()
    if not raw_contents:
        msg = "The task file is empty."
        raise ValueError(msg)

    try:
        document: dict[str, Any] = json.loads(raw_contents)
    except json.JSONDecodeError as exc:
        msg = f"Unable to parse JSON: {exc}"
        raise ValueError(msg) from exc

    missing = [key for key in REQUIRED_KEYS if key not in document]
    if missing:
        msg = f"Task is missing {', '.join(missing)}."
        raise ValueError(msg)

    return TranslationTask(
        question=str(document["question"]),
        schema=SchemaCatalog.from_dict(document["schema"]),
        dialect=DialectId.parse(document["dialect"]),
    )


def main() -> None:
    """Entry point for the task-file driven trial."""
    args = parse_args()
    directory = Path(args.directory).expanduser().resolve()
    temp_path = create_temp_task_file(directory)

    echo(f"Created temporary task file at: {temp_path}")

    try:
        wait_for_user_to_fill(temp_path)
        task = load_task(temp_path)
    except KeyboardInterrupt:
        echo()
        echo("Aborted by user.")
        sys.exit(1)
    except (ValueError, DialError) as exc:
        echo(f"Invalid task: {exc}", stream=sys.stderr)
        sys.exit(1)
    finally:
        cleanup_file(temp_path)

    settings = load_settings(args.config)
    deps = PipelineDeps(
        llm=build_backend(settings),
        kb=open_knowledge_base(settings.kb_dir),
        executor=make_executor(settings.executor, task.dialect, schema=task.schema),
    )
    try:
        result = run_pipeline(task, deps, PipelineOptions.from_settings(settings))
    except DialError as exc:
        echo(f"Error: {exc}", stream=sys.stderr)
        sys.exit(1)

    echo()
    echo(json.dumps(result.trajectory.to_dict(), indent=2, ensure_ascii=False))


if __name__ == "__main__":
    main()
