"""Semirings and collision rules used by associative arrays."""
from __future__ import annotations

import enum
import math
import operator
from dataclasses import dataclass
from typing import Any, Callable


@dataclass(frozen=True)
class Semiring:
    name: str
    zero: Any
    one: Any
    add: Callable[[Any, Any], Any]
    mul: Callable[[Any, Any], Any]

    def __repr__(self) -> str:
        return f"Semiring({self.name})"


PLUS_TIMES = Semiring("plus.times", 0, 1, operator.add, operator.mul)
MIN_PLUS = Semiring("min.plus", math.inf, 0, min, operator.add)
MAX_PLUS = Semiring("max.plus", -math.inf, 0, max, operator.add)
MAX_MIN = Semiring("max.min", -math.inf, math.inf, max, min)

SEMIRINGS = {s.name: s for s in (PLUS_TIMES, MIN_PLUS, MAX_PLUS, MAX_MIN)}


class CollisionRule(enum.Enum):
    """How two values landing on one (row, col) are merged."""

    MIN = "min"
    MAX = "max"
    FIRST = "first"
    SUM = "sum"

    def combine(self, old, new):
        if self is CollisionRule.MIN:
            return new if new < old else old
        if self is CollisionRule.MAX:
            return new if new > old else old
        if self is CollisionRule.FIRST:
            return old
        return old + new

    @classmethod
    def coerce(cls, rule: "CollisionRule | str") -> "CollisionRule":
        return rule if isinstance(rule, cls) else cls(rule)
