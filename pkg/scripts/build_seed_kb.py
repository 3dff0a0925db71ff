"""Persist the curated seed knowledge base so `dial` can start from files on disk."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from dialsql.cli import echo
from dialsql.core.config import DEFAULT_KB_DIR
from dialsql.core.errors import DialError
from dialsql.kb.seed import seed_knowledge_base
from dialsql.kb.store import persist


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Write the seed function and constraint entries to a directory.")
    parser.add_argument("-o", "--out", type=Path, default=DEFAULT_KB_DIR, help="Target knowledge base directory.")
    return parser.parse_args()


def main() -> None:
    args = parse_args()
    try:
        kb = seed_knowledge_base()
        persist(kb, args.out)
    except DialError as exc:
        echo(f"Error: {exc}", stream=sys.stderr)
        sys.exit(1)

    echo(f"Seed knowledge base written to {args.out}")
    for dialect, counts in kb.counts().items():
        echo(f"  {dialect}: {counts['f_func']} function entries, {counts['r_rule']} constraint entries")


if __name__ == "__main__":
    main()
