"""Result-set comparison for execution accuracy."""

from __future__ import annotations

import math
import numbers
from decimal import Decimal
from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from dialsql.core.model import Cell

REL_TOLERANCE = 1e-6


def cells_equal(left: Cell | Decimal, right: Cell | Decimal) -> bool:
    """NULL equals NULL, numbers within relative tolerance, text after trailing trim."""
    if left is None or right is None:
        return left is None and right is None
    if _is_number(left) and _is_number(right):
        return math.isclose(float(left), float(right), rel_tol=REL_TOLERANCE)
    return str(left).rstrip() == str(right).rstrip()


def _is_number(value: object) -> bool:
    return isinstance(value, (numbers.Real, Decimal)) and not isinstance(value, bool)


def rows_equal(left: Sequence[Cell], right: Sequence[Cell]) -> bool:
    return len(left) == len(right) and all(cells_equal(a, b) for a, b in zip(left, right))


def compare_result_sets(
    got: Sequence[Sequence[Cell]],
    gold: Sequence[Sequence[Cell]],
    order_sensitive: bool,
) -> bool:
    """Compare two row tables elementwise, or as multisets when order does not matter."""
    if len(got) != len(gold):
        return False
    if order_sensitive:
        return all(rows_equal(a, b) for a, b in zip(got, gold))

    # Tolerant cells rule out hashing, so match rows greedily.
    remaining = list(gold)
    for row in got:
        for idx, candidate in enumerate(remaining):
            if rows_equal(row, candidate):
                del remaining[idx]
                break
        else:
            return False
    return True
