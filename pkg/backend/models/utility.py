"""Two-level (vital, comfort) utilities compared lexicographically."""

import math
from dataclasses import dataclass
from enum import IntEnum
from functools import total_ordering
from typing import Iterable


class Ordering(IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


@total_ordering
@dataclass(frozen=True)
class UtilityPair:
    """Vital and comfort utility; any vital gain outweighs any comfort gain."""

    vital: float = 0.0
    comfort: float = 0.0

    def __post_init__(self):
        for name in ("vital", "comfort"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} utility must be finite and non-negative, got {value}")

    def __add__(self, other: "UtilityPair") -> "UtilityPair":
        return utility_add(self, other)

    def __lt__(self, other: "UtilityPair") -> bool:
        if not isinstance(other, UtilityPair):
            return NotImplemented
        return utility_cmp(self, other) is Ordering.LESS

    def as_tuple(self):
        return (self.vital, self.comfort)


ZERO = UtilityPair(0.0, 0.0)


def utility_cmp(a: UtilityPair, b: UtilityPair) -> Ordering:
    if a.vital != b.vital:
        return Ordering.GREATER if a.vital > b.vital else Ordering.LESS
    if a.comfort != b.comfort:
        return Ordering.GREATER if a.comfort > b.comfort else Ordering.LESS
    return Ordering.EQUAL


def utility_add(a: UtilityPair, b: UtilityPair) -> UtilityPair:
    return UtilityPair(a.vital + b.vital, a.comfort + b.comfort)


def utility_sum(pairs: Iterable[UtilityPair]) -> UtilityPair:
    total = ZERO
    for pair in pairs:
        total = utility_add(total, pair)
    return total
