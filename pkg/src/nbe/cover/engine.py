"""Minimal-cost covers by neutralized balls, their LP relaxation and the
Frostman measure obtained as the max-flow dual on the prefix tree.

Costs are handled in two arithmetics: double precision in log space (the
default) and ``mpmath`` software floats (``precision="high"``, 160 bits by
default) for exact-comparison work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import mpmath
import numpy as np

from ..symbolic import as_word
from .tree import CoverProblem, QuotientTree, Target

__all__ = [
    "HIGH_PRECISION_BITS",
    "BallChoice",
    "CoverSolution",
    "DegenerateCoverError",
    "IntegralityDefect",
    "TreeMeasure",
    "FrostmanAudit",
    "seal_cost",
    "log_seal_costs",
    "integral_cover_cost",
    "fractional_cover_cost",
    "frostman_measure",
]

HIGH_PRECISION_BITS = 160


class DegenerateCoverError(ValueError):
    """Zero cover cost: there is nothing to put a measure on."""


class IntegralityDefect(AssertionError):
    """The LP relaxation disagreed with the integral optimum on an indicator target."""


def _logsumexp(xs) -> float:
    m = max(xs)
    if m == -math.inf:
        return -math.inf
    return m + math.log(math.fsum(math.exp(x - m) for x in xs))


def seal_cost(depth: int, p: CoverProblem) -> float | None:
    """Cheapest ``exp(-n*s)`` over orders realising ``depth``; ``None`` in a gap."""
    n = p.seal_order.get(depth)
    return None if n is None else math.exp(-n * p.s)


def log_seal_costs(p: CoverProblem) -> list[float]:
    """``-n(D)*s`` per depth ``D <= d_max``, ``+inf`` where unavailable."""
    return [(-p.seal_order[d] * p.s) if d in p.seal_order else math.inf
            for d in range(p.d_max + 1)]


def _mp_seal_costs(p: CoverProblem) -> list:
    s = mpmath.mpf(p.s)
    return [mpmath.exp(-p.seal_order[d] * s) if d in p.seal_order else mpmath.inf
            for d in range(p.d_max + 1)]


@dataclass(frozen=True)
class BallChoice:
    """``count`` balls of one node class: cylinders of length ``depth``,
    order ``order``, each with coefficient ``weight``."""

    depth: int
    order: int
    weight: float
    count: int
    node: tuple


@dataclass
class CoverSolution:
    balls: list[BallChoice]
    log_cost: float
    integral: bool
    s: float
    cost_mp: object = None

    @property
    def cost(self) -> float:
        return math.exp(self.log_cost) if self.log_cost < 709 else math.inf

    def recomputed_log_cost(self) -> float:
        terms = [math.log(b.count) + math.log(b.weight) - b.order * self.s
                 for b in self.balls if b.weight > 0]
        return _logsumexp(terms) if terms else -math.inf

    def ball_count(self) -> int:
        return sum(b.count for b in self.balls)


def _tree_for(p: CoverProblem, target: Target = None) -> QuotientTree:
    return QuotientTree.build(p.shift, p.subset if target is None else target, p.d_max)


def _integral_values(p: CoverProblem, tree: QuotientTree, precision: str):
    """Per-class optimal cost and seal decision (seal preferred on ties)."""
    n = len(tree)
    sealed = [False] * n
    if precision == "high":
        seals = _mp_seal_costs(p)
        cost = [None] * n
        for v in tree.bottom_up:
            d = tree.depth[v]
            if d == p.d_max:
                cost[v], sealed[v] = seals[d], True
            elif not tree.children[v]:
                cost[v] = mpmath.mpf(0)
            else:
                sub = mpmath.fsum(cost[c] for _, c in tree.children[v])
                if seals[d] <= sub:
                    cost[v], sealed[v] = seals[d], True
                else:
                    cost[v] = sub
        return cost, sealed
    seals = log_seal_costs(p)
    cost = [0.0] * n
    for v in tree.bottom_up:
        d = tree.depth[v]
        if d == p.d_max:
            cost[v], sealed[v] = seals[d], True
        elif not tree.children[v]:
            cost[v] = -math.inf
        else:
            sub = _logsumexp([cost[c] for _, c in tree.children[v]])
            if seals[d] <= sub:
                cost[v], sealed[v] = seals[d], True
            else:
                cost[v] = sub
    return cost, sealed


def _reach_counts(tree: QuotientTree, stop) -> list[int]:
    """Number of actual nodes of each class reached before a stopping class."""
    reach = [0] * len(tree)
    reach[tree.root] = 1
    for v in tree.top_down:
        if reach[v] and not stop(v):
            for _, c in tree.children[v]:
                reach[c] += reach[v]
    return reach


def integral_cover_cost(p: CoverProblem, precision: str = "double",
                        tree: QuotientTree | None = None) -> tuple[float, CoverSolution]:
    """Exact minimum of ``sum exp(-n_i s)`` over covers of ``p.subset``.

    Returns ``(log_cost, solution)``; the cost itself is ``exp(log_cost)``,
    ``-inf`` for the empty set.  With ``precision="high"`` the solution also
    carries the cost as an ``mpmath`` float in ``cost_mp``.
    """
    tree = tree or _tree_for(p)
    if precision == "high":
        with mpmath.workprec(HIGH_PRECISION_BITS):
            cost, sealed = _integral_values(p, tree, "high")
            root = cost[tree.root]
            log_cost = float(mpmath.log(root)) if root > 0 else -math.inf
    else:
        cost, sealed = _integral_values(p, tree, "double")
        root = None
        log_cost = cost[tree.root]
    reach = _reach_counts(tree, lambda v: sealed[v])
    balls = [BallChoice(tree.depth[v], p.seal_order[tree.depth[v]], 1.0, reach[v], tree.keys[v])
             for v in tree.top_down if reach[v] and sealed[v]]
    return log_cost, CoverSolution(balls, log_cost, True, p.s, root)


def _requirement_grid(tree: QuotientTree) -> list[float]:
    return sorted({0.0, *tree.weights})


def fractional_cover_cost(p: CoverProblem, target: Target = None, precision: str = "double",
                          check: bool = True) -> tuple[float, CoverSolution]:
    """Optimum of the LP relaxation: weights ``c_i > 0`` with
    ``sum c_i * 1_{B_i} >= f`` pointwise.

    ``target`` is ``None`` (indicator of ``p.subset``), another subset, or a
    mapping from disjoint cylinders to non-negative weights.  Each class
    carries the optimal cost as a piecewise-linear function of the coverage
    already supplied by its ancestors, sampled on the grid of distinct
    target values (the breakpoints).  For indicator targets the result is
    compared with :func:`integral_cover_cost`; disagreement raises
    :class:`IntegralityDefect`.
    """
    tree = _tree_for(p, target)
    grid = _requirement_grid(tree)
    K = len(grid)
    bits = HIGH_PRECISION_BITS if precision == "high" else 64
    with mpmath.workprec(bits):
        R = [mpmath.mpf(r) for r in grid]
        seals = _mp_seal_costs(p)
        G: list = [None] * len(tree)
        H_of: list = [None] * len(tree)
        for v in tree.bottom_up:
            d = tree.depth[v]
            seal = seals[d]
            if d == p.d_max:
                a = mpmath.mpf(tree.weight[v])
                G[v] = [seal * max(a - r, 0) for r in R]
                continue
            H = [mpmath.mpf(0)] * K
            for _, c in tree.children[v]:
                H = [h + g for h, g in zip(H, G[c])]
            H_of[v] = H
            if seal == mpmath.inf:
                G[v] = H
            else:
                G[v] = [min(seal * (R[j] - R[i]) + H[j] for j in range(i, K)) for i in range(K)]
        total = G[tree.root][0]

        # top-down recovery of the coefficients
        reach: dict[tuple[int, int], int] = {(tree.root, 0): 1}
        chosen: dict[tuple[int, float], int] = {}
        for v in tree.top_down:
            for i in range(K):
                cnt = reach.get((v, i))
                if not cnt:
                    continue
                d = tree.depth[v]
                if d == p.d_max:
                    c = max(tree.weight[v] - grid[i], 0.0)
                    if c > 0:
                        chosen[(v, c)] = chosen.get((v, c), 0) + cnt
                    continue
                H, seal = H_of[v], seals[d]
                if seal == mpmath.inf:
                    j = i
                else:
                    vals = [seal * (R[j] - R[i]) + H[j] for j in range(i, K)]
                    best = min(vals)
                    j = i + max(k for k, x in enumerate(vals) if x == best)
                if j > i:
                    key = (v, grid[j] - grid[i])
                    chosen[key] = chosen.get(key, 0) + cnt
                for _, ch in tree.children[v]:
                    reach[(ch, j)] = reach.get((ch, j), 0) + cnt
        log_cost = float(mpmath.log(total)) if total > 0 else -math.inf
    balls = [BallChoice(tree.depth[v], p.seal_order[tree.depth[v]], c, cnt, tree.keys[v])
             for (v, c), cnt in sorted(chosen.items(), key=lambda kv: (tree.depth[kv[0][0]], kv[0][0], kv[0][1]))]
    integral = all(b.weight == 1.0 for b in balls)
    sol = CoverSolution(balls, log_cost, integral, p.s, total)
    if check and set(tree.weights) <= {1.0}:
        ref, _ = integral_cover_cost(p, precision, tree=_tree_for(p, target))
        if not _close_log(ref, log_cost, 1e-9):
            raise IntegralityDefect(
                f"LP optimum {log_cost!r} differs from integral optimum {ref!r} (log scale)")
    return log_cost, sol


def _close_log(a: float, b: float, rel: float) -> bool:
    if a == b:
        return True
    if math.isinf(a) or math.isinf(b):
        return False
    return abs(a - b) <= rel * max(1.0, abs(a))


@dataclass
class FrostmanAudit:
    nodes_checked: int
    max_ratio: float
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass
class TreeMeasure:
    """Probability measure on the target, defined by conditional splits on
    the quotient tree down to ``d_max``.

    ``log_cond[v][k]`` is the log of the share of class ``v``'s mass passed
    to its ``k``-th child entry; ``log_total`` is the log of the flow value
    ``c`` before normalisation.
    """

    tree: QuotientTree
    problem: CoverProblem
    log_cond: list
    log_total: float
    cond_mp: list | None = None
    total_mp: object = None

    @property
    def d_max(self) -> int:
        return self.tree.d_max

    def log_mass(self, w) -> float:
        """Normalised ``ln mu([w])``; ``-inf`` outside the target."""
        w = as_word(w)
        if len(w) > self.d_max:
            raise ValueError(f"measure is defined on cylinders of length <= {self.d_max}")
        v, total = self.tree.root, 0.0
        for b in w:
            for k, (sym, c) in enumerate(self.tree.children[v]):
                if sym == b:
                    total += self.log_cond[v][k]
                    v = c
                    break
            else:
                return -math.inf
        return total

    def mass_mp(self, w):
        """Normalised mass as an ``mpmath`` float (high-precision builds only)."""
        if self.cond_mp is None:
            raise ValueError("measure was built in double precision")
        v, m = self.tree.root, mpmath.mpf(1)
        for b in as_word(w):
            for k, (sym, c) in enumerate(self.tree.children[v]):
                if sym == b:
                    m *= self.cond_mp[v][k]
                    v = c
                    break
            else:
                return mpmath.mpf(0)
        return m

    def path_log_masses(self, w) -> np.ndarray:
        """``ln mu([w_0..w_{k-1}])`` for ``k = 0..len(w)`` in one pass."""
        w = as_word(w)
        out = np.full(len(w) + 1, -np.inf)
        out[0] = 0.0
        v, total = self.tree.root, 0.0
        for i, b in enumerate(w):
            for k, (sym, c) in enumerate(self.tree.children[v]):
                if sym == b:
                    total += self.log_cond[v][k]
                    v = c
                    break
            else:
                return out
            out[i + 1] = total
        return out

    def sample(self, rng: np.random.Generator, length: int | None = None) -> bytes:
        length = self.d_max if length is None else min(length, self.d_max)
        v, out = self.tree.root, bytearray()
        for _ in range(length):
            kids = self.tree.children[v]
            if not kids:
                break
            probs = np.exp(np.array(self.log_cond[v]))
            k = int(rng.choice(len(kids), p=probs / probs.sum()))
            out.append(kids[k][0])
            v = kids[k][1]
        return bytes(out)

    def nodes(self, depth: int) -> Iterator[tuple[bytes, float]]:
        """Every target node down to ``depth`` with its normalised log mass."""
        stack = [(b"", self.tree.root, 0.0)]
        while stack:
            w, v, lm = stack.pop()
            yield w, lm
            if len(w) < depth:
                for k, (b, c) in enumerate(self.tree.children[v]):
                    stack.append((w + bytes((b,)), c, lm + self.log_cond[v][k]))

    def audit(self, depth: int | None = None, samples: int = 0, seed: int = 0,
              rel_tol: float = 1e-12) -> FrostmanAudit:
        """Check ``mu(ball) <= exp(-n s) / c`` for every realising order.

        Exhaustive over all nodes down to ``depth`` (default
        ``min(d_max, 8)``), plus ``samples`` random paths to ``d_max``.
        """
        p = self.problem
        depth = min(self.d_max, 8) if depth is None else min(depth, self.d_max)
        limit = {d: -max(ns) * p.s - self.log_total for d, ns in p.orders.items()}
        checked, worst, bad = 0, -math.inf, []

        def check(w: bytes, lm: float):
            nonlocal checked, worst
            bound = limit.get(len(w))
            if bound is None or lm == -math.inf:
                return
            checked += 1
            ratio = lm - bound
            worst = max(worst, ratio)
            if ratio > math.log1p(rel_tol):
                bad.append((w, lm, bound))

        for w, lm in self.nodes(depth):
            check(w, lm)
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            w = self.sample(rng)
            lms = self.path_log_masses(w)
            for k in range(depth + 1, len(w) + 1):
                check(w[:k], float(lms[k]))
        return FrostmanAudit(checked, math.exp(worst) if worst > -math.inf else 0.0, bad)


def frostman_measure(p: CoverProblem, precision: str = "double") -> tuple[float, TreeMeasure]:
    """Largest flow from the root to the target leaves under node capacities
    ``seal_cost(depth)``, and the normalised measure it induces.

    Returns ``(c, mu)`` with ``c`` the flow value, equal to the integral
    cover cost (max-flow = min-cut on a tree).  Every ball of order
    ``n`` in ``[n_min, n_max]`` then has ``mu(ball) <= exp(-n s) / c``.
    Raises :class:`DegenerateCoverError` when ``c == 0``.
    """
    tree = _tree_for(p)
    cond_mp = total_mp = None
    if precision == "high":
        with mpmath.workprec(HIGH_PRECISION_BITS):
            cap, _ = _integral_values(p, tree, "high")
            total_mp = cap[tree.root]
            if total_mp == 0:
                raise DegenerateCoverError("zero cover cost: empty target")
            cond_mp = []
            for v in range(len(tree)):
                kids = tree.children[v]
                sub = mpmath.fsum(cap[c] for _, c in kids) if kids else mpmath.mpf(0)
                cond_mp.append([cap[c] / sub for _, c in kids])
            log_cap = [float(mpmath.log(x)) if x > 0 else -math.inf for x in cap]
    else:
        log_cap, _ = _integral_values(p, tree, "double")
    log_total = log_cap[tree.root]
    if log_total == -math.inf:
        raise DegenerateCoverError("zero cover cost: empty target")
    log_cond = []
    for v in range(len(tree)):
        kids = tree.children[v]
        if not kids:
            log_cond.append([])
            continue
        sub = _logsumexp([log_cap[c] for _, c in kids])
        log_cond.append([log_cap[c] - sub for _, c in kids])
    mu = TreeMeasure(tree, p, log_cond, log_total, cond_mp, total_mp)
    return math.exp(log_total) if log_total < 709 else math.inf, mu
