"""Critical exponents of cover costs and the entropy limits built on them.

At a finite truncation the cost ``s -> sum exp(-n_i s)`` of an optimal
cover is continuous and non-increasing, so the jump of the infinite-scale
quantity from infinity to zero is replaced by the root of ``cost(s) = 1``.
The offset this introduces is ``O(1/n_min)``; an ``n_min`` schedule makes it
visible.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from numbers import Real
from typing import Callable, Sequence

import numpy as np

from ..cover import CoverProblem, QuotientTree, integral_cover_cost
from ..symbolic import ShiftSpec, SubsetSpec, ball_cylinder_length

__all__ = [
    "CriticalEstimate",
    "Extrapolation",
    "EntropyTable",
    "bisect_log_cost",
    "critical_exponent",
    "extrapolate",
    "neutralized_bowen_entropy",
]


@dataclass
class CriticalEstimate:
    """Root of ``cost(s) = 1`` with its bracket and truncation parameters.

    ``log_cost_at_bracket`` holds ``ln cost`` at the two bracket ends, so a
    converged estimate has ``log_cost_at_bracket[0] > 0 >= log_cost_at_bracket[1]``.
    ``degenerate`` names the reason when no bracket exists (empty set, or a
    single ball already costing at most one).
    """

    quantity: str
    s_star: float
    bracket: tuple[float, float]
    eps: float
    n_min: int
    n_max: int
    d_max: int
    log_cost_at_bracket: tuple[float, float]
    converged: bool
    delta: float | None = None
    degenerate: str | None = None
    evaluations: int = 0
    schedule_trace: list[tuple[int, float]] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def cost_at_bracket(self) -> tuple[float, float]:
        return tuple(math.exp(min(c, 709.0)) for c in self.log_cost_at_bracket)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Extrapolation:
    """Least-squares line ``value = intercept + slope * eps``."""

    intercept: float
    slope: float
    residuals: list[float]
    points: int

    @property
    def max_residual(self) -> float:
        return max((abs(r) for r in self.residuals), default=0.0)


def extrapolate(eps: Sequence[float], values: Sequence[float]) -> Extrapolation | None:
    """Linear fit in ``eps``; the intercept is the ``eps -> 0`` estimate.

    Returns ``None`` for fewer than two points.
    """
    x = np.asarray(eps, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(x) < 2:
        return None
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    return Extrapolation(float(intercept), float(slope), [float(r) for r in resid], len(x))


def bisect_log_cost(log_cost: Callable[[float], float], s_hi: float, tol: float,
                    max_doublings: int = 40, max_iter: int = 200):
    """Bisection of a non-increasing ``log_cost`` on its sign change.

    Starts from ``[0, s_hi]`` and doubles the upper end until the log cost
    is ``<= 0`` there.  Returns ``(lo, hi, f_lo, f_hi, converged, evals)``;
    ``f_lo <= 0`` signals that ``cost(0) <= 1`` (no bracket).
    """
    evals = 0

    def f(s):
        nonlocal evals
        evals += 1
        return log_cost(s)

    lo, f_lo = 0.0, f(0.0)
    if f_lo <= 0:
        return 0.0, 0.0, f_lo, f_lo, True, evals
    hi, f_hi = s_hi, f(s_hi)
    k = 0
    while f_hi > 0:
        if k == max_doublings:
            return lo, hi, f_lo, f_hi, False, evals
        lo, f_lo = hi, f_hi
        hi *= 2
        f_hi = f(hi)
        k += 1
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm > 0:
            lo, f_lo = mid, fm
        else:
            hi, f_hi = mid, fm
    return lo, hi, f_lo, f_hi, hi - lo <= tol, evals


def _estimate_from_bracket(quantity, lo, hi, f_lo, f_hi, converged, evals, eps, n_min,
                           n_max, d_max, delta=None) -> CriticalEstimate:
    if f_lo == -math.inf:
        return CriticalEstimate(quantity, 0.0, (0.0, 0.0), float(eps), n_min, n_max, d_max,
                                (f_lo, f_lo), False, delta, "empty set: cost is 0 for every s",
                                evals)
    if f_lo <= 0 and lo == hi == 0.0:
        return CriticalEstimate(quantity, 0.0, (0.0, 0.0), float(eps), n_min, n_max, d_max,
                                (f_lo, f_lo), True, delta, "cost(0) <= 1", evals)
    return CriticalEstimate(quantity, 0.5 * (lo + hi), (lo, hi), float(eps), n_min, n_max,
                            d_max, (f_lo, f_hi), converged, delta, None, evals)


def critical_exponent(shift: ShiftSpec, subset: SubsetSpec | None, eps: Real, n_min: int,
                      n_max: int, tol: float = 1e-3, kind: str = "open",
                      precision: str = "double",
                      n_min_schedule: Sequence[int] = ()) -> CriticalEstimate:
    """Finite-scale critical exponent of the neutralized Bowen cover cost.

    Parameters
    ----------
    shift, subset
        The system and the set ``Z`` to cover (``None`` means the whole space).
    eps
        Radius rate; balls of order ``n`` have radius ``exp(-n * eps)``.
    n_min, n_max
        Range of admissible ball orders.
    tol
        Width of the final bracket.
    n_min_schedule
        Extra lower cut-offs; each gets its own root, reported in
        ``schedule_trace`` together with the main one.

    Returns
    -------
    CriticalEstimate
        ``degenerate`` is set for the empty set (cost identically 0).
    """
    subset = SubsetSpec.whole() if subset is None else subset
    p = CoverProblem(shift, subset, eps, n_min, n_max, kind=kind)
    tree = QuotientTree.build(shift, subset, p.d_max)

    def log_cost(s):
        return integral_cover_cost(p.with_s(s), precision, tree)[0]

    s_hi = math.log(shift.alphabet_size) + float(eps) + 1.0
    out = _estimate_from_bracket("bowen", *bisect_log_cost(log_cost, s_hi, tol), eps,
                                 n_min, n_max, p.d_max)
    trace = []
    for m in sorted(set(n_min_schedule) | {n_min}):
        if m == n_min:
            trace.append((m, out.s_star))
        elif m <= n_max:
            trace.append((m, critical_exponent(shift, subset, eps, m, n_max, tol, kind,
                                               precision).s_star))
    out.schedule_trace = trace
    return out


@dataclass
class EntropyTable:
    """Per-``eps`` estimates and their ``eps -> 0`` extrapolation."""

    quantity: str
    rows: list[CriticalEstimate]
    extrapolation: Extrapolation | None
    monotone: bool
    tol: float

    @property
    def eps(self) -> list[float]:
        return [r.eps for r in self.rows]

    @property
    def values(self) -> list[float]:
        return [r.s_star for r in self.rows]

    def to_dict(self) -> dict:
        return asdict(self)


def _monotone_in_eps(eps: Sequence[float], values: Sequence[float], tol: float) -> bool:
    """Values must not increase as ``eps`` decreases (beyond ``tol``)."""
    pairs = sorted(zip(eps, values))
    return all(b[1] >= a[1] - tol for a, b in zip(pairs, pairs[1:]))


def neutralized_bowen_entropy(shift: ShiftSpec, subset: SubsetSpec | None,
                              eps_schedule: Sequence[Real], n_min: int, n_max: int,
                              tol: float = 1e-3, kind: str = "open",
                              precision: str = "double") -> EntropyTable:
    """Critical exponents along a decreasing ``eps`` schedule plus a linear
    extrapolation to ``eps = 0``.

    The extrapolated intercept is an estimate; residuals of the fit are kept
    for inspection.  With a single ``eps`` no extrapolation is made.
    """
    eps_schedule = list(eps_schedule)
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise ValueError("eps schedule must be strictly decreasing")
    rows = [critical_exponent(shift, subset, e, n_min, n_max, tol, kind, precision)
            for e in eps_schedule]
    ext = extrapolate([r.eps for r in rows], [r.s_star for r in rows])
    mono = _monotone_in_eps([r.eps for r in rows], [r.s_star for r in rows], 2 * tol)
    return EntropyTable("bowen", rows, ext, mono, tol)


def realized_depths(n_schedule: Sequence[int], eps: Real, N: int, kind: str) -> list[int]:
    return [ball_cylinder_length(n, eps, N, kind) for n in n_schedule]
