"""Katok-type critical exponents: covers that only need to carry most of a
measure."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from numbers import Real
from typing import Sequence

from ..cover.partial import PartialCoverSolver
from ..measures import MeasureSpec
from .critical import CriticalEstimate, _estimate_from_bracket, bisect_log_cost

__all__ = ["InfeasibleError", "KatokTable", "katok_critical", "katok_entropy"]


class InfeasibleError(RuntimeError):
    """No cover reaches the requested mass."""


def katok_critical(mu: MeasureSpec, delta: Real, eps: Real, n_min: int, n_max: int,
                   tol: float = 1e-3, kind: str = "open", gap_tol: float = 1e-3,
                   solver: PartialCoverSolver | None = None) -> CriticalEstimate:
    """Root of the partial-cover cost: cheapest ``sum exp(-n_i s)`` over
    families of balls covering ``mu``-mass strictly above ``1 - delta``.

    The bisection runs on the Lagrangian upper bound (exact on small
    instances); the largest relative duality gap met along the way is
    reported as ``diagnostics["max_gap"]``.

    Raises
    ------
    ValueError
        ``delta`` outside ``(0, 1)``.
    InfeasibleError
        The measure's support cannot reach the mass.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    solver = solver or PartialCoverSolver(mu, eps, n_min, n_max, kind, gap_tol=gap_tol)
    gaps, exact = [], []

    def log_cost(s):
        r = solver.solve(s, delta)
        if not r.feasible:
            raise InfeasibleError(f"covered mass cannot exceed 1 - delta = {1 - float(delta):g}")
        gaps.append(r.gap)
        exact.append(r.exact)
        return r.log_upper

    s_hi = math.log(mu.alphabet_size) + float(eps) + 1.0
    out = _estimate_from_bracket("katok", *bisect_log_cost(log_cost, s_hi, tol), eps,
                                 n_min, n_max, solver.d_max, float(delta))
    out.diagnostics = {
        "max_gap": max(gaps, default=0.0),
        "exact_solves": sum(exact),
        "lattice_classes": solver.lattice.size,
    }
    return out


@dataclass
class KatokTable:
    """Critical exponents along a decreasing ``delta`` schedule."""

    rows: list[CriticalEstimate]
    value: float
    monotone: bool
    violations: list[tuple[float, float, float]]

    def to_dict(self) -> dict:
        return asdict(self)


def katok_entropy(mu: MeasureSpec, eps: Real, delta_schedule: Sequence[Real], n_min: int,
                  n_max: int, tol: float = 1e-3, kind: str = "open",
                  gap_tol: float = 1e-3) -> KatokTable:
    """``Lambda_eps(mu, delta)`` for each ``delta`` and the value at the
    smallest one.

    The exponent should not decrease as ``delta`` does; pairs breaking that
    by more than the bisection tolerance plus the duality gap are listed in
    ``violations`` and clear ``monotone`` (they are reported, not hidden).
    """
    deltas = sorted((float(d) for d in delta_schedule), reverse=True)
    if not deltas:
        raise ValueError("empty delta schedule")
    solver = PartialCoverSolver(mu, eps, n_min, n_max, kind, gap_tol=gap_tol)
    rows = [katok_critical(mu, d, eps, n_min, n_max, tol, kind, gap_tol, solver) for d in deltas]
    bad = []
    for a, b in zip(rows, rows[1:]):
        slack = tol + max(a.diagnostics["max_gap"], b.diagnostics["max_gap"])
        if b.s_star < a.s_star - slack:
            bad.append((b.delta, b.s_star, a.s_star))
    return KatokTable(rows, rows[-1].s_star, not bad, bad)
