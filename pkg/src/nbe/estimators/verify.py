"""Finite-scale checks of the inequalities linking the entropy quantities."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from numbers import Real
from typing import Sequence

from ..cover import (
    CoverProblem,
    DegenerateCoverError,
    fractional_cover_cost,
    frostman_measure,
    integral_cover_cost,
)
from ..measures import MeasureSpec
from ..symbolic import ShiftSpec, SubsetSpec
from .critical import critical_exponent
from .katok import katok_entropy
from .local import brin_katok_entropy, default_n_schedule

__all__ = [
    "BKKatokReport",
    "SandwichReport",
    "cover_sandwich_check",
    "sandwich_threshold",
    "variational_sandwich",
    "verify_bk_katok",
]

DEFAULT_DELTAS = (0.1, 0.01, 0.001)


@dataclass
class BKKatokReport:
    """``BK(eps/2) <= Katok(eps)`` at finite scale; ``slack = katok - bk_half``."""

    eps: float
    bk_half: float
    katok: float
    slack: float
    holds: bool
    tol: float
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def verify_bk_katok(mu: MeasureSpec, eps: Real, n_min: int = 50, n_max: int = 400,
                    delta_schedule: Sequence[Real] = DEFAULT_DELTAS, tol: float = 0.02,
                    kind: str = "open", bisect_tol: float = 1e-3,
                    n_schedule: Sequence[int] | None = None) -> BKKatokReport:
    """Compare the Brin-Katok surrogate at ``eps/2`` with the Katok exponent
    at ``eps`` on the same order range.

    The Brin-Katok side uses exact per-order expectations; the Katok side is
    :func:`katok_entropy` at the smallest ``delta``.  A failure is returned
    with its numbers, never suppressed.
    """
    n_schedule = n_schedule or default_n_schedule(n_min, n_max)
    bk = brin_katok_entropy(mu, float(eps) / 2, "exact", n_schedule=n_schedule, kind=kind)
    kt = katok_entropy(mu, eps, delta_schedule, n_min, n_max, bisect_tol, kind)
    slack = kt.value - bk.estimate
    return BKKatokReport(float(eps), bk.estimate, kt.value, slack, slack >= -tol, tol, {
        "n_min": n_min, "n_max": n_max, "deltas": [float(d) for d in delta_schedule],
        "n_schedule": list(n_schedule), "katok_monotone": kt.monotone,
        "max_gap": max(r.diagnostics["max_gap"] for r in kt.rows), "kind": kind,
    })


def sandwich_threshold(eps: float, theta: float) -> int:
    """Smallest ``n_min`` such that for every ``n >= n_min``:
    ``exp(n eps / 2) > 5``, ``n**2 < exp(n theta)`` and
    ``sum_{m >= n_min} 1/m**2 < 1``.

    ``n**2 exp(-n theta)`` decreases once ``n > 2/theta``, so the middle
    condition holds for all larger ``n`` from the first ``n > 2/theta`` where
    it holds.
    """
    if eps <= 0 or theta <= 0:
        raise ValueError("eps and theta must be positive")
    n0 = max(2, math.floor(2 * math.log(5) / eps) + 1)
    last_bad, n = 0, 1
    while n <= 2 / theta or n * n >= math.exp(min(n * theta, 700.0)):
        if n * n >= math.exp(min(n * theta, 700.0)):
            last_bad = n
        n += 1
    return max(n0, last_bad + 1)


def cover_sandwich_check(shift: ShiftSpec, subset: SubsetSpec | None, eps: float, s: float,
                 theta: float, n_min: int, n_max: int, precision: str = "double") -> dict:
    """The three costs ``M(eps/2, s + theta) <= W(eps, s) <= M(eps, s)`` on one
    truncation, as log costs, with a ``holds`` flag (relative slack 1e-9)."""
    subset = SubsetSpec.whole() if subset is None else subset
    p = CoverProblem(shift, subset, eps, n_min, n_max, s)
    q = CoverProblem(shift, subset, eps / 2, n_min, n_max, s + theta)
    left = integral_cover_cost(q, precision)[0]
    mid = fractional_cover_cost(p, precision=precision)[0]
    right = integral_cover_cost(p, precision)[0]
    slack = 1e-9
    holds = left <= mid + slack and mid <= right + slack
    return {"eps": eps, "s": s, "theta": theta, "n_min": n_min, "n_max": n_max,
            "log_half": left, "log_weighted": mid, "log_integral": right, "holds": holds,
            "threshold": sandwich_threshold(eps, theta)}


@dataclass
class SandwichReport:
    """Finite-scale two-sided check around the Bowen critical exponent.

    ``bk_frostman`` is the Brin-Katok surrogate at ``2 eps`` of the Frostman
    measure built at exponent ``s_frostman`` (just below ``s_star``);
    ``katok`` is the Katok exponent at ``eps`` of the supplied measure (or
    ``None`` if none applies).
    """

    eps: float
    s_star: float
    s_frostman: float | None
    frostman_total: float | None
    bk_frostman: float | None
    bk_ci: tuple[float, float] | None
    katok: float | None
    lower_holds: bool | None
    upper_holds: bool | None
    tol: float
    feasible: bool = True
    notes: list[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.feasible and self.lower_holds is not False and self.upper_holds is not False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["holds"] = self.holds
        return d


def default_measure(shift: ShiftSpec, K: SubsetSpec) -> MeasureSpec | None:
    """A natural measure carried by ``K``: uniform Bernoulli on a full shift,
    the Parry measure of an SFT (sub)system; ``None`` for cylinder unions."""
    if K.kind == "whole":
        return MeasureSpec.uniform(shift.alphabet_size) if shift.kind == "full" \
            else MeasureSpec.parry(shift)
    if K.kind == "sft":
        return MeasureSpec.parry(ShiftSpec.sft(K.sub_transitions))
    return None


def variational_sandwich(shift: ShiftSpec, K: SubsetSpec | None, eps: float, n_min: int = 50,
                         n_max: int = 400, measure: MeasureSpec | None = None,
                         samples: int = 200, seed: int = 0, tol: float = 0.05,
                         delta: float = 0.001, bisect_tol: float = 1e-3,
                         kind: str = "open") -> SandwichReport:
    """Check ``Katok_mu(eps) <= s*(eps) <= BK_nu(2 eps)`` at finite scale.

    ``s*`` is the Bowen critical exponent of ``K``.  ``nu`` is the Frostman
    measure of the cover problem at radius rate ``2 eps`` and exponent
    ``s`` equal to the lower end of the bracket of ``s*`` (where the cost at
    ``eps`` still exceeds one); its Brin-Katok surrogate at ``2 eps`` is
    averaged over ``samples`` centres drawn from ``nu``.  ``mu`` (default:
    :func:`default_measure`) supplies the Katok side.
    """
    K = SubsetSpec.whole() if K is None else K
    est = critical_exponent(shift, K, eps, n_min, n_max, bisect_tol, kind)
    prov = {"n_min": n_min, "n_max": n_max, "d_max": est.d_max, "samples": samples,
            "seed": seed, "delta": delta, "kind": kind}
    report = SandwichReport(float(eps), est.s_star, None, None, None, None, None, None, None,
                            tol, provenance=prov)
    if est.degenerate:
        report.notes.append(f"critical exponent degenerate: {est.degenerate}")
    s_fr = est.bracket[0]
    try:
        c, nu = frostman_measure(CoverProblem(shift, K, 2 * eps, n_min, n_max, s_fr, kind))
    except DegenerateCoverError as exc:
        report.feasible = False
        report.notes.append(str(exc))
        return report
    report.s_frostman, report.frostman_total = s_fr, c
    n_sched = default_n_schedule(n_min, n_max)
    cache: dict = {}

    def log_prefix(x, D):
        if x not in cache:
            cache.clear()
            cache[x] = nu.path_log_masses(x)
        return float(cache[x][D])

    bk = brin_katok_entropy(None, 2 * eps, "monte-carlo", samples, seed, n_sched, kind,
                            sampler=lambda rng: nu.sample(rng), log_prefix=log_prefix,
                            alphabet_size=shift.alphabet_size)
    report.bk_frostman, report.bk_ci = bk.estimate, bk.ci
    report.lower_holds = est.s_star <= bk.estimate + tol
    mu = measure if measure is not None else default_measure(shift, K)
    if mu is None:
        report.notes.append("no measure carried by K supplied; Katok side skipped")
    else:
        kt = katok_entropy(mu, eps, [delta], n_min, n_max, bisect_tol, kind)
        report.katok = kt.value
        report.upper_holds = kt.value <= est.s_star + tol
        prov["katok_max_gap"] = kt.rows[-1].diagnostics["max_gap"]
    return report
