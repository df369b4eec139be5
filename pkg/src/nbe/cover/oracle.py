"""Independent small-scale oracles for the tree solvers.

Nothing here uses the quotient tree: nodes are materialised as actual
words, and the optimisation is either exhaustive or handed to a generic LP
solver.
"""

from __future__ import annotations

import math
from typing import Mapping

import mpmath
import numpy as np
from scipy.optimize import linprog

from ..symbolic import SubsetSpec, as_word, count_admissible_words
from .engine import HIGH_PRECISION_BITS
from .tree import CoverProblem, Target

__all__ = [
    "GuardExceeded",
    "brute_force_cover",
    "cover_profiles",
    "explicit_nodes",
    "lp_cover",
    "lp_flow",
    "random_instance",
]

MAX_NODES = 10_000


class GuardExceeded(RuntimeError):
    """Instance too large for an exhaustive method."""


def _node_guard(p: CoverProblem, max_nodes: int) -> None:
    total = sum(count_admissible_words(p.shift, d) for d in range(p.d_max + 1))
    if total > max_nodes:
        raise GuardExceeded(f"tree has {total} nodes down to depth {p.d_max} (limit {max_nodes})")


def explicit_nodes(p: CoverProblem, subset: SubsetSpec | None = None) -> list[bytes]:
    """All words of length <= d_max whose cylinder meets the subset, breadth first."""
    subset = p.subset if subset is None else subset
    N = p.shift.alphabet_size
    if not subset.intersects(p.shift, b""):
        return []
    layer, out = [b""], [b""]
    for _ in range(p.d_max):
        layer = [w + bytes((b,)) for w in layer for b in range(N)
                 if subset.intersects(p.shift, w + bytes((b,)))]
        out.extend(layer)
    return out


def _prune_dominated(profiles: set[tuple]) -> set[tuple]:
    items = sorted(profiles, key=sum)
    kept: list[tuple] = []
    for a in items:
        if not any(all(x <= y for x, y in zip(k, a)) for k in kept):
            kept.append(a)
    return set(kept)


def cover_profiles(p: CoverProblem, max_nodes: int = MAX_NODES) -> set[tuple]:
    """Order-count profiles ``(k_{n_min}, ..., k_{n_max})`` of every antichain cover.

    Covers with equal profiles have equal cost for every ``s``, and a
    profile dominated coordinatewise by another is never cheaper for
    ``s >= 0``; both are merged away without losing the optimum.
    """
    _node_guard(p, max_nodes)
    width = p.n_max - p.n_min + 1
    zero = (0,) * width
    orders = p.orders
    N = p.shift.alphabet_size

    def unit(n: int) -> tuple:
        v = [0] * width
        v[n - p.n_min] = 1
        return tuple(v)

    def rec(w: bytes) -> set[tuple]:
        opts = {unit(n) for n in orders.get(len(w), ())}
        if len(w) < p.d_max:
            kids = [w + bytes((b,)) for b in range(N) if p.subset.intersects(p.shift, w + bytes((b,)))]
            acc = {zero}
            for k in kids:
                sub = rec(k)
                acc = _prune_dominated({tuple(x + y for x, y in zip(a, b)) for a in acc for b in sub})
            if kids:
                opts |= acc
        return _prune_dominated(opts)

    if not p.subset.intersects(p.shift, b""):
        return {zero}
    return rec(b"")


def brute_force_cover(p: CoverProblem, max_nodes: int = MAX_NODES,
                      profiles: set[tuple] | None = None):
    """Exact optimal cover cost by exhaustive search; returns an ``mpmath`` float.

    Refuses (:class:`GuardExceeded`) when the tree down to ``d_max`` has more
    than ``max_nodes`` nodes.
    """
    profiles = cover_profiles(p, max_nodes) if profiles is None else profiles
    with mpmath.workprec(HIGH_PRECISION_BITS):
        s = mpmath.mpf(p.s)
        weights = [mpmath.exp(-n * s) for n in range(p.n_min, p.n_max + 1)]
        best = min(mpmath.fsum(k * w for k, w in zip(prof, weights)) for prof in profiles)
        return +best


def _leaf_weights(p: CoverProblem, target: Target) -> dict[bytes, float]:
    if target is None or isinstance(target, SubsetSpec):
        subset = p.subset if target is None else target
        return {w: 1.0 for w in explicit_nodes(p, subset) if len(w) == p.d_max}
    weights = {as_word(k): float(v) for k, v in target.items() if v > 0}
    leaves = [w for w in explicit_nodes(p, SubsetSpec.whole()) if len(w) == p.d_max]
    out = {}
    for leaf in leaves:
        for w, a in weights.items():
            if leaf[: len(w)] == w:
                out[leaf] = a
    return out


def _incidence(p: CoverProblem, target: Target):
    f = _leaf_weights(p, target)
    leaves = sorted(f)
    nodes = sorted({leaf[:d] for leaf in leaves for d in p.seal_order if d <= p.d_max},
                   key=lambda w: (len(w), w))
    col = {w: j for j, w in enumerate(nodes)}
    A = np.zeros((len(leaves), len(nodes)))
    for i, leaf in enumerate(leaves):
        for d in p.seal_order:
            A[i, col[leaf[:d]]] = 1.0
    cost = np.array([math.exp(-p.seal_order[len(w)] * p.s) for w in nodes])
    rhs = np.array([f[leaf] for leaf in leaves])
    return A, cost, rhs, nodes, leaves


def lp_cover(p: CoverProblem, target: Target = None, max_nodes: int = MAX_NODES) -> float:
    """Fractional cover optimum from a generic LP over the materialised tree."""
    _node_guard(p, max_nodes)
    A, cost, rhs, nodes, leaves = _incidence(p, target)
    if not leaves:
        return 0.0
    res = linprog(cost, A_ub=-A, b_ub=-rhs, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return float(res.fun)


def lp_flow(p: CoverProblem, target: Target = None, max_nodes: int = MAX_NODES) -> float:
    """Dual LP: most target-weighted leaf mass with ``mass(node) <= seal cost``."""
    _node_guard(p, max_nodes)
    A, cost, rhs, nodes, leaves = _incidence(p, target)
    if not leaves:
        return 0.0
    res = linprog(-rhs, A_ub=A.T, b_ub=cost, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return float(-res.fun)


def random_instance(rng: np.random.Generator, max_depth: int = 5, N: int = 2) -> CoverProblem:
    """A random cover problem on the full ``N``-shift with ``d_max <= max_depth``.

    The subset is a union of one to four random cylinders no deeper than
    ``d_max``; ``s`` is uniform on ``[0, 2]``.
    """
    from ..symbolic import ShiftSpec, ball_cylinder_length

    shift = ShiftSpec.full(N)
    while True:
        eps = float(rng.choice([0.2, 0.3, 0.5, 0.7, 0.9, 1.2, 1.5]))
        n_min = int(rng.integers(1, 4))
        n_max = n_min + int(rng.integers(0, 3))
        d_max = ball_cylinder_length(n_max, eps, N)
        if d_max <= max_depth:
            break
    words = set()
    for _ in range(int(rng.integers(1, 5))):
        length = int(rng.integers(0, d_max + 1))
        words.add(bytes(int(b) for b in rng.integers(0, N, size=length)))
    subset = SubsetSpec.cylinder_union(sorted(words))
    return CoverProblem(shift, subset, eps, n_min, n_max, float(rng.uniform(0, 2)))
