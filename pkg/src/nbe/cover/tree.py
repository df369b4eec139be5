"""Quotiented prefix tree of a cover problem.

Cover costs below a node depend only on the node's depth, the SFT state
(its last symbol) and whether it sits on the boundary of the target set.
Nodes entirely inside the target with the same (depth, state, weight) share
one class; nodes on the boundary are the finitely many proper prefixes of
the target's defining words and are kept individually.  The tree is never
materialised node by node.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from numbers import Real
from typing import Mapping, Union

from ..symbolic import (
    BALL_KINDS,
    ShiftSpec,
    SubsetSpec,
    as_word,
    ball_cylinder_length,
    order_table,
    word_str,
)

__all__ = [
    "ConfigurationError",
    "CoverProblem",
    "QuotientTree",
    "Target",
]

#: A cover target: the indicator of a subset, or non-negative weights on a
#: prefix-free family of cylinders (zero elsewhere).
Target = Union[SubsetSpec, Mapping[bytes, float], None]


class ConfigurationError(ValueError):
    """A cover problem whose truncation cannot represent its target."""


@dataclass(frozen=True)
class CoverProblem:
    """Covers of ``subset`` by neutralized balls of rate ``eps`` with orders
    in ``[n_min, n_max]`` and cost ``sum exp(-n_i * s)``."""

    shift: ShiftSpec
    subset: SubsetSpec
    eps: Real
    n_min: int
    n_max: int
    s: float = 0.0
    kind: str = "open"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError("need 1 <= n_min <= n_max")
        if self.s < 0:
            raise ValueError("exponent s must be >= 0")
        if self.kind not in BALL_KINDS:
            raise ValueError(f"ball kind must be one of {BALL_KINDS}")
        self.subset.validate(self.shift)
        if self.subset.max_word_length() > self.d_max:
            raise ConfigurationError(
                f"subset cylinder of length {self.subset.max_word_length()} is deeper "
                f"than the truncation depth {self.d_max}")

    @cached_property
    def d_max(self) -> int:
        return ball_cylinder_length(self.n_max, self.eps, self.shift.alphabet_size, self.kind)

    @cached_property
    def orders(self) -> dict[int, list[int]]:
        """depth -> orders realising it."""
        return order_table(self.eps, self.shift.alphabet_size, self.n_min, self.n_max, self.kind)

    @cached_property
    def seal_order(self) -> dict[int, int]:
        """depth -> cheapest realising order (the largest one, as s >= 0)."""
        return {d: max(ns) for d, ns in self.orders.items()}

    def with_s(self, s: float) -> "CoverProblem":
        return replace(self, s=s)

    def describe(self) -> dict:
        return {
            "alphabet": self.shift.alphabet_size,
            "eps": float(self.eps),
            "n_min": self.n_min,
            "n_max": self.n_max,
            "d_max": self.d_max,
            "s": self.s,
            "kind": self.kind,
        }


@dataclass
class QuotientTree:
    """Node classes of the prefix tree, children listed per symbol.

    ``children[v]`` holds ``(symbol, child_class)`` pairs, one per actual
    child node, so a full-shift class lists the same child class ``N`` times.
    ``weight[v]`` is the target value on an inside class and ``None`` on a
    boundary (trie) class.
    """

    shift: ShiftSpec
    d_max: int
    keys: list = field(default_factory=list)
    depth: list = field(default_factory=list)
    weight: list = field(default_factory=list)
    children: list = field(default_factory=list)
    index: dict = field(default_factory=dict)

    @property
    def root(self) -> int:
        return 0

    def __len__(self) -> int:
        return len(self.keys)

    @cached_property
    def bottom_up(self) -> list[int]:
        return sorted(range(len(self.keys)), key=lambda v: -self.depth[v])

    @cached_property
    def top_down(self) -> list[int]:
        return sorted(range(len(self.keys)), key=lambda v: self.depth[v])

    @cached_property
    def weights(self) -> list[float]:
        """Distinct positive target values, ascending."""
        return sorted({w for w in self.weight if w is not None})

    def child(self, v: int, symbol: int) -> int | None:
        for b, c in self.children[v]:
            if b == symbol:
                return c
        return None

    def walk(self, w: bytes) -> list[int]:
        """Classes visited along ``w`` (root first); stops early outside the target."""
        path = [self.root]
        for b in as_word(w):
            c = self.child(path[-1], b)
            if c is None:
                break
            path.append(c)
        return path

    @classmethod
    def build(cls, shift: ShiftSpec, target: Target, d_max: int) -> "QuotientTree":
        target = SubsetSpec.whole() if target is None else target
        tree = cls(shift, d_max)
        if isinstance(target, SubsetSpec):
            target.validate(shift)
            t, alive = target.transition_view(shift)
            if target.kind == "cylinders":
                weights = {w: 1.0 for w in target.normalized_cylinders()}
                free = target.kind == "cylinders" and shift.kind == "full"
            else:
                weights = None
                free = shift.kind == "full" and target.kind == "whole"
        else:
            t, alive = SubsetSpec.whole().transition_view(shift)
            weights = {}
            for w, a in target.items():
                w = as_word(w)
                if a < 0:
                    raise ValueError("target weights must be non-negative")
                shift.check_word(w)
                if a > 0:
                    weights[w] = float(a)
            words = sorted(weights)
            for i, u in enumerate(words):
                for v in words[i + 1:]:
                    if v[: len(u)] == u:
                        raise ValueError(
                            f"weight cylinders must be disjoint: {word_str(u)} contains {word_str(v)}")
            free = shift.kind == "full"
        if weights is not None and any(len(w) > d_max for w in weights):
            raise ConfigurationError("target cylinder deeper than the truncation depth")
        tree._grow(t, alive, weights, free)
        return tree

    def _add(self, key, depth: int, weight) -> int:
        idx = self.index.get(key)
        if idx is None:
            idx = len(self.keys)
            self.index[key] = idx
            self.keys.append(key)
            self.depth.append(depth)
            self.weight.append(weight)
            self.children.append(None)
        return idx

    def _grow(self, t, alive, weights, free: bool) -> None:
        N = self.shift.alphabet_size
        prefixes: set[bytes] = set()
        if weights is not None:
            for w in weights:
                prefixes.update(w[:k] for k in range(len(w)))
        if weights is None:
            root = self._add(("in", 0, -1, 1.0), 0, 1.0)
        elif b"" in weights:
            root = self._add(("in", 0, -1, weights[b""]), 0, weights[b""])
        else:
            root = self._add(("trie", b""), 0, None)
        stack = [root]
        while stack:
            v = stack.pop()
            if self.children[v] is not None:
                continue
            key, d = self.keys[v], self.depth[v]
            kids: list[tuple[int, int]] = []
            if d < self.d_max:
                if key[0] == "in":
                    _, _, q, a = key
                    for b in range(N):
                        if b not in alive or (q >= 0 and not t[q][b]):
                            continue
                        state = -1 if free else b
                        kids.append((b, self._add(("in", d + 1, state, a), d + 1, a)))
                else:
                    word = key[1]
                    for b in range(N):
                        if b not in alive or (word and not t[word[-1]][b]):
                            continue
                        nw = word + bytes((b,))
                        if nw in weights:
                            a = weights[nw]
                            state = -1 if free else b
                            kids.append((b, self._add(("in", d + 1, state, a), d + 1, a)))
                        elif nw in prefixes:
                            kids.append((b, self._add(("trie", nw), d + 1, None)))
            self.children[v] = kids
            stack.extend(c for _, c in kids if self.children[c] is None)
