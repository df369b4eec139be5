"""Partial covers: cheapest families of neutralized balls carrying more than
``1 - delta`` of a measure.

The large-depth solver is Lagrangian.  For a multiplier ``lam`` every node
independently chooses to seal, recurse or stay uncovered so as to minimise
``cost - lam * covered_mass``; a bisection on ``lam`` finds the threshold
where the covered mass first exceeds ``1 - delta``.  The policies just below
and just above the threshold are spliced node by node into a feasible cover
(upper bound), and ``min_policy + lam * (1 - delta)`` is a lower bound.  Nodes
with equal depth, last symbol and mass behave identically, so the
computation runs over those classes, layer by layer.

Small instances whose bounds do not meet are re-solved exactly with a
Pareto (mass, cost) dynamic programme on the explicit tree.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real

import mpmath
import numpy as np
from numba import njit

from ..measures import MeasureSpec, _log, cylinder_mass_exact
from ..symbolic import BALL_KINDS, order_table, ball_cylinder_length

__all__ = [
    "MassLattice",
    "PartialCoverResult",
    "PartialCoverSolver",
    "exact_partial_cover",
    "DualityGapWarning",
]

SEAL, RECURSE, UNCOVER = 2, 1, 0

#: Covered mass must exceed ``1 - delta`` by this much in floating point.
MASS_GUARD = 1e-12

#: The multiplier search stops once the spliced cover is within this relative
#: distance of the Lagrangian lower bound.
EARLY_STOP_GAP = 1e-8


class DualityGapWarning(RuntimeWarning):
    pass


class MassLattice:
    """Nodes of positive mass down to ``d_max``, grouped per depth by
    (last symbol, log mass), stored flat: classes of depth ``d`` occupy
    ``offset[d]:offset[d+1]`` and ``child[i, b]`` is the global index of the
    ``b``-child of class ``i`` (``-1`` for a null cylinder).

    Log masses are keyed after rounding to ``quantum``; nodes whose masses
    differ by less than that share a class.
    """

    def __init__(self, mu: MeasureSpec, d_max: int, quantum: float = 1e-9,
                 max_classes: int = 5_000_000):
        N = mu.alphabet_size
        self.mu, self.d_max, self.N = mu, d_max, N
        markov = mu.kind == "markov"
        log_init = [_log(p) for p in mu.initial()]
        log_trans = [[_log(mu.transition(a, b)) for b in range(N)] for a in range(N)]
        logmass, state, child = [0.0], [-1], []
        offset = [0, 1]
        for d in range(d_max):
            index: dict = {}
            base = offset[-1]
            for i in range(offset[d], offset[d + 1]):
                row = [-1] * N
                q = state[i]
                for b in range(N):
                    f = log_init[b] if d == 0 else log_trans[q if markov else 0][b]
                    if f == -math.inf:
                        continue
                    lm = logmass[i] + f
                    key = (b if markov else -1, round(lm / quantum))
                    j = index.get(key)
                    if j is None:
                        j = index[key] = base + len(index)
                        logmass.append(lm)
                        state.append(b)
                    row[b] = j
                child.append(row)
            offset.append(base + len(index))
            if offset[-1] > max_classes:
                raise MemoryError(f"mass lattice exceeds {max_classes} classes at depth {d + 1}")
        for i in range(offset[d_max], offset[d_max + 1]):
            child.append([-1] * N)
        self.offset = np.array(offset, dtype=np.int64)
        self.logmass = np.array(logmass)
        self.child = np.array(child, dtype=np.int64).reshape(len(logmass), N)
        # masses below ~1e-308 underflow to 0; they are negligible against the
        # mass constraint while the seal decision still uses the log mass
        self.mass = np.exp(self.logmass)

    @property
    def size(self) -> int:
        return len(self.logmass)


@njit(cache=True)
def _policy_pass(offset, child, logmass, mass, seals, log_lam):
    n = len(logmass)
    V = np.zeros(n)
    C = np.zeros(n)
    M = np.zeros(n)
    dec = np.zeros(n, dtype=np.int8)
    d_max = len(offset) - 2
    for d in range(d_max, -1, -1):
        for i in range(offset[d], offset[d + 1]):
            x = log_lam + logmass[i]
            seal_v = seals[d] - np.exp(min(x, 700.0))
            if d == d_max:
                rec_v, rec_c, rec_m = np.inf, 0.0, 0.0
            else:
                rec_v, rec_c, rec_m = 0.0, 0.0, 0.0
                for b in range(child.shape[1]):
                    j = child[i, b]
                    if j >= 0:
                        rec_v += V[j]
                        rec_c += C[j]
                        rec_m += M[j]
            if seal_v <= rec_v and seal_v <= 0.0:
                dec[i] = SEAL
                V[i], C[i], M[i] = seal_v, seals[d], mass[i]
            elif rec_v <= 0.0:
                dec[i] = RECURSE
                V[i], C[i], M[i] = rec_v, rec_c, rec_m
    return V, C, M, dec


@dataclass
class PartialCoverResult:
    log_upper: float
    log_lower: float
    covered_mass: float
    exact: bool
    feasible: bool = True
    log_lambda: float = math.nan

    @property
    def gap(self) -> float:
        """Relative duality gap ``(upper - lower) / upper``."""
        if self.log_upper == -math.inf:
            return 0.0
        if self.log_lower == -math.inf:
            return 1.0
        return -math.expm1(self.log_lower - self.log_upper)

    @property
    def log_cost(self) -> float:
        return self.log_upper


class PartialCoverSolver:
    """Partial-cover costs for one (measure, rate, order range, ball kind)."""

    def __init__(self, mu: MeasureSpec, eps: Real, n_min: int, n_max: int,
                 kind: str = "open", gap_tol: float = 1e-3, exact_nodes: int = 4096,
                 lambda_iters: int = 80):
        if kind not in BALL_KINDS:
            raise ValueError(f"ball kind must be one of {BALL_KINDS}")
        if not 1 <= n_min <= n_max:
            raise ValueError("need 1 <= n_min <= n_max")
        self.mu, self.eps, self.kind = mu, eps, kind
        self.n_min, self.n_max = n_min, n_max
        self.N = mu.alphabet_size
        self.d_max = ball_cylinder_length(n_max, eps, self.N, kind)
        self.orders = order_table(eps, self.N, n_min, n_max, kind)
        self.seal_order = {d: max(ns) for d, ns in self.orders.items()}
        self.gap_tol, self.exact_nodes, self.lambda_iters = gap_tol, exact_nodes, lambda_iters
        self.lattice = MassLattice(mu, self.d_max)
        self._explicit_size = sum(self.N ** d for d in range(self.d_max + 1))

    def _seals(self, s: float) -> np.ndarray:
        out = np.full(self.d_max + 1, np.inf)
        for d, n in self.seal_order.items():
            out[d] = math.exp(-(n - self.n_min) * s)
        return out

    def _policy(self, seals: np.ndarray, log_lam: float):
        L = self.lattice
        return _policy_pass(L.offset, L.child, L.logmass, L.mass, seals, float(log_lam))

    def _splice(self, lo, hi, need: float) -> tuple[float, float]:
        """Feasible cover mixing the two threshold policies subtree by subtree.

        Walks down one path.  At a node where the high policy recurses, the
        children start under the low policy and whole child subtrees are
        switched to the high policy until the next switch would overshoot;
        the walk then continues into that child.
        """
        child = self.lattice.child
        _, C_lo, M_lo, _ = lo
        _, C_hi, M_hi, dec_hi = hi
        v = 0
        cost_off = mass_off = 0.0
        while True:
            if M_lo[v] > need:
                return cost_off + C_lo[v], mass_off + M_lo[v]
            if dec_hi[v] != RECURSE:
                return cost_off + C_hi[v], mass_off + M_hi[v]
            kids = [ch for ch in child[v] if ch >= 0]
            cost = sum(C_lo[ch] for ch in kids)
            mass = sum(M_lo[ch] for ch in kids)
            if mass > need:
                return cost_off + cost, mass_off + mass
            nxt = -1
            for ch in kids:
                gain = M_hi[ch] - M_lo[ch]
                if gain <= 0:
                    continue
                if mass + gain <= need:
                    mass += gain
                    cost += C_hi[ch] - C_lo[ch]
                else:
                    nxt = ch
                    break
            if nxt < 0:
                return cost_off + C_hi[v], mass_off + M_hi[v]
            cost_off += cost - C_lo[nxt]
            mass_off += mass - M_lo[nxt]
            need -= mass - M_lo[nxt]
            v = nxt

    def lagrangian(self, s: float, delta: float) -> PartialCoverResult:
        """Lagrangian bounds only (no exact fallback)."""
        target = 1.0 - float(delta)
        # strict inequality with a guard against summation error in the masses
        need = target + MASS_GUARD
        seals = self._seals(s)
        offset = self.n_min * s
        lam_lo = -(self.n_max - self.n_min) * s - 60.0
        lam_hi = 760.0 - float(self.lattice.logmass.min())
        best_lb = -math.inf

        def run(ll):
            nonlocal best_lb
            pol = self._policy(seals, ll)
            if abs(ll) < 700:
                best_lb = max(best_lb, pol[0][0] + math.exp(ll) * target)
            return pol

        hi_pol = run(lam_hi)
        if not hi_pol[2][0] > need:
            return PartialCoverResult(math.inf, math.inf, float(hi_pol[2][0]), False, feasible=False)
        lo_pol = run(lam_lo)
        if lo_pol[2][0] > need:
            hi_pol, lam_hi = lo_pol, lam_lo
        else:
            for it in range(self.lambda_iters):
                mid = 0.5 * (lam_lo + lam_hi)
                pol = run(mid)
                if pol[2][0] > need:
                    hi_pol, lam_hi = pol, mid
                else:
                    lo_pol, lam_lo = pol, mid
                if lam_hi - lam_lo < 1e-13 * max(1.0, abs(lam_hi)):
                    break
                if it >= 8 and it % 4 == 0 and best_lb > 0:
                    # stop once the spliced cover is already tight
                    ub, mass = self._splice(lo_pol, hi_pol, need)
                    if mass > target + 0.5 * MASS_GUARD and ub <= best_lb * (1 + EARLY_STOP_GAP):
                        break
        # the splice aims at ``need`` and overshoots it by a last cylinder that
        # may be far below rounding, so its result is checked against ``target``
        ub, mass = self._splice(lo_pol, hi_pol, need)
        if not mass > target + 0.5 * MASS_GUARD:
            ub, mass = float(hi_pol[1][0]), float(hi_pol[2][0])
        log_ub = math.log(ub) - offset if ub > 0 else -math.inf
        log_lb = (math.log(best_lb) - offset) if best_lb > 0 else -math.inf
        log_lb = min(log_lb, log_ub)
        return PartialCoverResult(log_ub, log_lb, float(mass), False, log_lambda=lam_hi)

    def solve(self, s: float, delta: Real) -> PartialCoverResult:
        """Cheapest cover of mass ``> 1 - delta`` at exponent ``s``."""
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        res = self.lagrangian(s, delta)
        if res.feasible and res.gap > 1e-9 and self._explicit_size <= self.exact_nodes:
            log_exact, mass = exact_partial_cover(self.mu, self.eps, self.n_min, self.n_max,
                                                  s, delta, self.kind)
            return PartialCoverResult(log_exact, log_exact, float(mass), True,
                                      log_lambda=res.log_lambda)
        if res.feasible and res.gap > self.gap_tol:
            warnings.warn(f"partial-cover duality gap {res.gap:.3g} exceeds {self.gap_tol:g} "
                          f"at s={s:.6g}, delta={float(delta):g}", DualityGapWarning, stacklevel=2)
        return res


def exact_partial_cover(mu: MeasureSpec, eps: Real, n_min: int, n_max: int, s: float,
                        delta: Real, kind: str = "open", max_nodes: int = 1 << 14):
    """Exact optimum by Pareto (mass, cost) fronts over the explicit tree.

    Masses are exact fractions when ``mu`` has rational entries.  Returns
    ``(log_cost, covered_mass)``.
    """
    N = mu.alphabet_size
    d_max = ball_cylinder_length(n_max, eps, N, kind)
    if sum(N ** d for d in range(d_max + 1)) > max_nodes:
        raise RuntimeError(f"explicit tree down to depth {d_max} is too large")
    orders = order_table(eps, N, n_min, n_max, kind)
    exact = mu.is_exact
    target = 1 - (Fraction(delta) if exact else float(delta))

    def mass(w: bytes):
        if exact:
            return cylinder_mass_exact(mu, w)
        return math.exp(_log_mass_float(mu, w))

    with mpmath.workprec(160):
        s_mp = mpmath.mpf(s)
        seal = {d: mpmath.exp(-max(ns) * s_mp) for d, ns in orders.items()}

        def pareto(points):
            points = sorted(points, key=lambda t: (t[1], -t[0]))
            out, best_mass = [], None
            for m, c in points:
                if best_mass is None or m > best_mass:
                    out.append((m, c))
                    best_mass = m
            return out

        def front(w: bytes):
            m = mass(w)
            if m == 0:
                return [(0, mpmath.mpf(0))]
            opts = [(0 * m, mpmath.mpf(0))]
            d = len(w)
            if d in seal:
                opts.append((m, seal[d]))
            if d < d_max:
                acc = [(0 * m, mpmath.mpf(0))]
                for b in range(N):
                    sub = front(w + bytes((b,)))
                    acc = pareto([(a0 + b0, a1 + b1) for a0, a1 in acc for b0, b1 in sub])
                opts.extend(acc)
            return pareto(opts)

        feasible = [(c, m) for m, c in front(b"") if m > target]
        if not feasible:
            return math.inf, 0
        c, m = min(feasible, key=lambda t: t[0])
        return (float(mpmath.log(c)) if c > 0 else -math.inf), m


def _log_mass_float(mu: MeasureSpec, w: bytes) -> float:
    from ..measures import log_cylinder_mass
    return log_cylinder_mass(mu, w)
