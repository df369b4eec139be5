"""Spanning-set counts and the spanning entropy they define."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from numbers import Real
from typing import Sequence

from ..symbolic import ShiftSpec, SubsetSpec, ball_cylinder_length, count_admissible_words
from .critical import Extrapolation, extrapolate

__all__ = ["SpanningReport", "min_spanning_count", "spanning_entropy"]


def min_spanning_count(shift: ShiftSpec, n: int, eps: Real,
                       subset: SubsetSpec | None = None) -> int:
    """Smallest ``(n, eps)``-spanning set, closed balls.

    Each closed ball is exactly one cylinder of length ``D_closed(n, eps)``
    and distinct cylinders of that length are disjoint, so the minimum is the
    number of admissible words of that length.
    """
    D = ball_cylinder_length(n, eps, shift.alphabet_size, "closed")
    return count_admissible_words(shift, D, subset)


@dataclass
class SpanningRow:
    eps: float
    n: list[int]
    rates: list[float]
    value: float
    argmax_n: int


@dataclass
class SpanningReport:
    rows: list[SpanningRow]
    extrapolation: Extrapolation | None

    def to_dict(self) -> dict:
        return asdict(self)


def spanning_entropy(shift: ShiftSpec, eps_schedule: Sequence[Real],
                     n_schedule: Sequence[int], subset: SubsetSpec | None = None) -> SpanningReport:
    """``(1/n) ln r_n`` on a grid; per ``eps`` the limsup surrogate is the
    maximum over the tail half of ``n_schedule``, then a linear
    ``eps -> 0`` extrapolation."""
    n_schedule = sorted(n_schedule)
    rows = []
    for e in eps_schedule:
        rates = []
        for n in n_schedule:
            r = min_spanning_count(shift, n, e, subset)
            rates.append(math.log(r) / n if r > 0 else -math.inf)
        tail = list(zip(n_schedule, rates))[len(rates) // 2:]
        n_best, v = max(tail, key=lambda t: t[1])
        rows.append(SpanningRow(float(e), n_schedule, rates, v, n_best))
    return SpanningReport(rows, extrapolate([r.eps for r in rows], [r.value for r in rows]))
