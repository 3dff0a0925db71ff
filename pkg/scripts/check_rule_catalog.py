"""Run every catalog example pair through the simulator and print which ones behave.

An anti-pattern must be rejected by its own rule; the gold rewrite must be accepted.
"""

from __future__ import annotations

import sys

from dialsql.cli import echo
from dialsql.core.model import SqlText
from dialsql.dialects.rules import load_catalog
from dialsql.dialects.simulate import simulate


def main() -> None:
    failures = 0
    for rule in load_catalog():
        for dialect, example in sorted(rule.examples.items()):
            anti = simulate(SqlText(example.anti, dialect))
            gold = simulate(SqlText(example.gold, dialect))
            rejected = not anti.ok and anti.trace is not None and anti.trace.rule_id == rule.rule_id
            ok = rejected and gold.ok
            failures += not ok
            got = "ok" if anti.ok else anti.trace.rule_id if anti.trace else "?"
            echo(f"{'PASS' if ok else 'FAIL'} {rule.rule_id:<3} {dialect.value:<10} anti->{got} gold->{'ok' if gold.ok else 'error'}")

    if failures:
        echo(f"{failures} example pair(s) misbehave", stream=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
