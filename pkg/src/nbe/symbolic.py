"""Alphabets, words, cylinders and the one-sided shift metric.

Points of a shift space are one-sided sequences over ``{0, ..., N-1}`` with
the metric ``d(x, y) = N ** -min{k : x_k != y_k}``.  Under that metric a
neutralized Bowen ball ``B_n(x, exp(-n*eps))`` is exactly a cylinder, whose
length is given by :func:`ball_cylinder_length`.  Everything else in the
package is built on that correspondence.

Words are stored as ``bytes``; a cylinder is a word with an implicit free
tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Real
from typing import Iterable, Iterator, Sequence

import mpmath
import numpy as np

__all__ = [
    "BALL_KINDS",
    "BOUNDARY_GUARD",
    "InsufficientLengthError",
    "ShiftSpec",
    "SubsetSpec",
    "NeutralizedBall",
    "as_word",
    "word_str",
    "bowen_distance",
    "bowen_distance_exponent",
    "ball_cylinder_length",
    "ball_length_info",
    "ball_membership",
    "neutralized_ball",
    "count_admissible_words",
    "enumerate_words",
]

BALL_KINDS = ("open", "closed")

#: Relative width of the band around an integer inside which ``n*eps/ln N``
#: is re-evaluated in extended precision and the result flagged as a
#: boundary case.
BOUNDARY_GUARD = 1e-12


class InsufficientLengthError(ValueError):
    """Raised when finite words are too short to decide a metric question."""


def as_word(symbols: bytes | str | Iterable[int]) -> bytes:
    """Coerce ``symbols`` to a word.

    Strings are read digit by digit (``"0102"``), so they only work for
    alphabets of size at most 10.
    """
    if isinstance(symbols, bytes):
        return symbols
    if isinstance(symbols, str):
        return bytes(int(ch) for ch in symbols)
    return bytes(int(s) for s in symbols)


def word_str(w: bytes) -> str:
    if all(b < 10 for b in w):
        return "".join(str(b) for b in w)
    return ".".join(str(b) for b in w)


def _check_kind(kind: str) -> None:
    if kind not in BALL_KINDS:
        raise ValueError(f"ball kind must be one of {BALL_KINDS}, got {kind!r}")


def _matrix_tuple(matrix) -> tuple[tuple[int, ...], ...]:
    arr = np.asarray(matrix)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("transition matrix must be square")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("transition matrix must be 0/1")
    return tuple(tuple(int(v) for v in row) for row in arr)


def _prune_sinks(matrix: tuple[tuple[int, ...], ...]) -> frozenset[int]:
    """Vertices that start an infinite forward path."""
    alive = set(range(len(matrix)))
    changed = True
    while changed:
        changed = False
        for a in sorted(alive):
            if not any(matrix[a][b] for b in alive):
                alive.discard(a)
                changed = True
    return frozenset(alive)


@dataclass(frozen=True)
class ShiftSpec:
    """A one-sided full shift or 1-step subshift of finite type.

    ``transitions[a][b] == 1`` allows ``b`` to follow ``a``.  For a full
    shift ``transitions`` is ``None``.
    """

    alphabet_size: int
    transitions: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if self.alphabet_size < 2:
            raise ValueError("alphabet size must be at least 2")
        if self.transitions is not None:
            t = _matrix_tuple(self.transitions)
            object.__setattr__(self, "transitions", t)
            if len(t) != self.alphabet_size:
                raise ValueError("transition matrix size does not match the alphabet")
            arr = np.array(t)
            if not arr.any(axis=1).all() or not arr.any(axis=0).all():
                raise ValueError("every row and column of an SFT matrix needs a 1")

    @classmethod
    def full(cls, n: int) -> "ShiftSpec":
        return cls(n)

    @classmethod
    def sft(cls, matrix) -> "ShiftSpec":
        arr = np.asarray(matrix)
        return cls(int(arr.shape[0]), _matrix_tuple(arr))

    @classmethod
    def golden_mean(cls) -> "ShiftSpec":
        """Binary sequences without two consecutive 1s."""
        return cls.sft([[1, 1], [1, 0]])

    @property
    def kind(self) -> str:
        return "full" if self.transitions is None else "sft"

    @property
    def matrix(self) -> np.ndarray:
        if self.transitions is None:
            return np.ones((self.alphabet_size, self.alphabet_size), dtype=np.int64)
        return np.array(self.transitions, dtype=np.int64)

    def allowed(self, a: int, b: int) -> bool:
        return self.transitions is None or bool(self.transitions[a][b])

    def is_admissible(self, w: bytes) -> bool:
        if any(b >= self.alphabet_size for b in w):
            return False
        return all(self.allowed(a, b) for a, b in zip(w, w[1:]))

    def check_word(self, w: bytes) -> None:
        if any(b >= self.alphabet_size for b in w):
            raise ValueError(f"word {word_str(w)} has a symbol outside the alphabet")
        if not self.is_admissible(w):
            raise ValueError(f"word {word_str(w)} is not admissible")

    def spectral_radius(self) -> float:
        return float(max(abs(np.linalg.eigvals(self.matrix.astype(float)))))


@dataclass(frozen=True)
class SubsetSpec:
    """A subset of the shift space: everything, a finite union of cylinders,
    or an SFT subsystem given by a sub-matrix of the ambient transitions.

    The empty set is represented as an SFT subsystem with no surviving
    vertex; use :meth:`empty`.
    """

    kind: str
    cylinders: tuple[bytes, ...] = ()
    sub_transitions: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if self.kind not in ("whole", "cylinders", "sft"):
            raise ValueError(f"unknown subset kind {self.kind!r}")
        if self.kind == "cylinders":
            words = tuple(dict.fromkeys(as_word(w) for w in self.cylinders))
            if not words:
                raise ValueError("a cylinder union needs at least one cylinder")
            object.__setattr__(self, "cylinders", words)
        if self.kind == "sft":
            if self.sub_transitions is None:
                raise ValueError("an SFT subsystem needs sub_transitions")
            object.__setattr__(self, "sub_transitions", _matrix_tuple(self.sub_transitions))

    @classmethod
    def whole(cls) -> "SubsetSpec":
        return cls("whole")

    @classmethod
    def cylinder_union(cls, words: Iterable) -> "SubsetSpec":
        return cls("cylinders", tuple(as_word(w) for w in words))

    @classmethod
    def sft_subsystem(cls, matrix) -> "SubsetSpec":
        return cls("sft", sub_transitions=_matrix_tuple(matrix))

    @classmethod
    def empty(cls, alphabet_size: int) -> "SubsetSpec":
        return cls("sft", sub_transitions=tuple((0,) * alphabet_size for _ in range(alphabet_size)))

    def validate(self, shift: ShiftSpec) -> None:
        N = shift.alphabet_size
        if self.kind == "cylinders":
            for w in self.cylinders:
                shift.check_word(w)
        elif self.kind == "sft":
            t = self.sub_transitions
            if len(t) != N:
                raise ValueError("subsystem matrix size does not match the alphabet")
            for a in range(N):
                for b in range(N):
                    if t[a][b] and not shift.allowed(a, b):
                        raise ValueError("subsystem matrix must be entrywise <= the ambient matrix")

    def normalized_cylinders(self) -> tuple[bytes, ...]:
        """Prefix-free form of a cylinder union (same set, disjoint cylinders)."""
        words = sorted(self.cylinders, key=lambda w: (len(w), w))
        kept: list[bytes] = []
        for w in words:
            if not any(w[: len(k)] == k for k in kept):
                kept.append(w)
        return tuple(sorted(kept))

    def transition_view(self, shift: ShiftSpec) -> tuple[tuple[tuple[int, ...], ...], frozenset[int]]:
        """Transitions and live vertices governing free extensions inside the set."""
        if self.kind == "sft":
            t = self.sub_transitions
        else:
            t = tuple(tuple(shift.matrix[a]) for a in range(shift.alphabet_size))
            t = tuple(tuple(int(v) for v in row) for row in t)
        return t, _prune_sinks(t)

    def is_empty(self, shift: ShiftSpec) -> bool:
        if self.kind == "sft":
            return not self.transition_view(shift)[1]
        return False

    def max_word_length(self) -> int:
        return max((len(w) for w in self.cylinders), default=0)

    def intersects(self, shift: ShiftSpec, w: bytes) -> bool:
        """Whether the cylinder ``[w]`` meets the set."""
        w = as_word(w)
        if not shift.is_admissible(w):
            return False
        if self.kind == "whole":
            return True
        if self.kind == "cylinders":
            return any(w[: len(c)] == c or c[: len(w)] == w for c in self.cylinders)
        t, alive = self.transition_view(shift)
        if not w:
            return bool(alive)
        if any(b not in alive for b in w):
            return False
        return all(t[a][b] for a, b in zip(w, w[1:]))

    def contains_cylinder(self, shift: ShiftSpec, w: bytes) -> bool:
        """Whether every admissible point of ``[w]`` lies in the set."""
        w = as_word(w)
        if self.kind == "whole":
            return True
        if self.kind == "cylinders":
            return any(w[: len(c)] == c for c in self.cylinders)
        return False


@dataclass(frozen=True)
class NeutralizedBall:
    """``B_n(center, exp(-n*rate))`` realised as the cylinder of its first
    ``realized_length`` symbols."""

    order: int
    rate: float
    center: bytes
    kind: str
    realized_length: int
    boundary: bool = field(default=False, compare=False)

    @property
    def cylinder(self) -> bytes:
        return self.center[: self.realized_length]


def _frac(x: Real) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@lru_cache(maxsize=65536)
def _floor_ceil(n: int, eps: Real, N: int) -> tuple[int, int, bool]:
    q = float(n * eps) / math.log(N)
    r = round(q)
    if abs(q - r) > BOUNDARY_GUARD * max(1.0, abs(q)):
        return math.floor(q), math.ceil(q), False
    # ln N is transcendental and n*eps rational, so the quotient is never an
    # integer; 60 digits settles which side it falls on.
    e = _frac(eps)
    with mpmath.workdps(60):
        qq = mpmath.mpf(n * e.numerator) / mpmath.mpf(e.denominator) / mpmath.log(N)
        return int(mpmath.floor(qq)), int(mpmath.ceil(qq)), True


def ball_length_info(n: int, eps: Real, N: int, kind: str = "open") -> tuple[int, bool]:
    """Cylinder length realising a neutralized ball, plus the boundary flag."""
    if n < 1:
        raise ValueError("order n must be >= 1")
    if not eps > 0:
        raise ValueError("rate eps must be positive")
    if N < 2:
        raise ValueError("alphabet size must be >= 2")
    _check_kind(kind)
    fl, ce, boundary = _floor_ceil(int(n), eps, int(N))
    if kind == "open":
        return n + fl, boundary
    return n - 1 + ce, boundary


def ball_cylinder_length(n: int, eps: Real, N: int, kind: str = "open") -> int:
    """Length ``D`` with ``B_n(x, exp(-n*eps)) == [x_0 ... x_{D-1}]``.

    Open balls give ``D = n + floor(n*eps/ln N)``, closed balls
    ``D = n - 1 + ceil(n*eps/ln N)``.
    """
    return ball_length_info(n, eps, N, kind)[0]


def bowen_distance_exponent(x: bytes, y: bytes, n: int) -> int | None:
    """Exponent ``m`` with ``d_n(x, y) = N ** -m``; ``None`` means distance 0.

    Only the first ``min(len(x), len(y))`` coordinates are compared; words
    agreeing on all of them are at distance 0.
    """
    if n < 1:
        raise ValueError("order n must be >= 1")
    L = min(len(x), len(y))
    if L < n:
        raise InsufficientLengthError(
            f"words of length {len(x)} and {len(y)} cannot decide d_{n}")
    for k in range(L):
        if x[k] != y[k]:
            # window start j sees the disagreement at offset k - j; the
            # largest distance comes from j = min(k, n - 1)
            return max(0, k - n + 1)
    return None


def bowen_distance(x, y, n: int, N: int) -> float:
    """Bowen metric ``d_n(x, y) = max_{j<n} d(T^j x, T^j y)`` for the shift."""
    m = bowen_distance_exponent(as_word(x), as_word(y), n)
    return 0.0 if m is None else float(N) ** -m


def ball_membership(center, y, n: int, eps: Real, N: int, kind: str = "open") -> bool:
    """Whether ``y`` lies in the neutralized ball of order ``n`` around ``center``.

    Decided from the metric itself; words shorter than the realised
    cylinder length raise :class:`InsufficientLengthError`.
    """
    _check_kind(kind)
    center, y = as_word(center), as_word(y)
    D = ball_cylinder_length(n, eps, N, kind)
    if min(len(center), len(y)) < D:
        raise InsufficientLengthError(f"membership at order {n} needs words of length >= {D}")
    d = bowen_distance(center, y, n, N)
    radius = math.exp(-n * float(eps))
    return d < radius if kind == "open" else d <= radius


def neutralized_ball(center, n: int, eps: Real, N: int, kind: str = "open") -> NeutralizedBall:
    center = as_word(center)
    D, boundary = ball_length_info(n, eps, N, kind)
    if len(center) < D:
        raise InsufficientLengthError(f"center must have length >= {D}")
    return NeutralizedBall(n, float(eps), center, kind, D, boundary)


def _int_matmul(a: list[list[int]], b: list[list[int]]) -> list[list[int]]:
    n = len(a)
    return [[sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n)] for i in range(n)]


def _int_matpow(m: list[list[int]], p: int) -> list[list[int]]:
    n = len(m)
    result = [[int(i == j) for j in range(n)] for i in range(n)]
    base = [row[:] for row in m]
    while p:
        if p & 1:
            result = _int_matmul(result, base)
        base = _int_matmul(base, base)
        p >>= 1
    return result


def _path_counts(t, alive: frozenset[int], steps: int) -> list[list[int]]:
    """``A**steps`` restricted to live vertices, with exact integers."""
    n = len(t)
    m = [[int(t[a][b] and a in alive and b in alive) for b in range(n)] for a in range(n)]
    return _int_matpow(m, steps)


def count_admissible_words(shift: ShiftSpec, D: int, subset: SubsetSpec | None = None) -> int:
    """Number of admissible length-``D`` words whose cylinder meets ``subset``.

    Uses integer transfer-matrix powers, so ``D`` in the thousands is fine.
    """
    if D < 0:
        raise ValueError("D must be >= 0")
    subset = subset or SubsetSpec.whole()
    if subset.kind in ("whole", "sft"):
        t, alive = subset.transition_view(shift)
        if not alive:
            return 0
        if D == 0:
            return 1
        if shift.kind == "full" and subset.kind == "whole":
            return shift.alphabet_size ** D
        P = _path_counts(t, alive, D - 1)
        return sum(P[a][b] for a in alive for b in alive)
    t, alive = subset.transition_view(shift)
    words = subset.normalized_cylinders()
    total = 0
    short_prefixes = set()
    for c in words:
        if len(c) >= D:
            short_prefixes.add(c[:D])
        elif not c:
            return count_admissible_words(shift, D)
        else:
            P = _path_counts(t, alive, D - len(c))
            total += sum(P[c[-1]][b] for b in alive)
    return total + len(short_prefixes)


def enumerate_words(shift: ShiftSpec, D: int, transitions=None) -> Iterator[bytes]:
    """All admissible words of length ``D`` in lexicographic order (small ``D`` only)."""
    t = transitions if transitions is not None else shift.transitions
    N = shift.alphabet_size

    def rec(prefix: bytes) -> Iterator[bytes]:
        if len(prefix) == D:
            yield prefix
            return
        for b in range(N):
            if prefix and t is not None and not t[prefix[-1]][b]:
                continue
            yield from rec(prefix + bytes((b,)))

    yield from rec(b"")


def golden_ratio() -> float:
    return (1 + math.sqrt(5)) / 2


def order_table(eps: Real, N: int, n_min: int, n_max: int, kind: str = "open") -> dict[int, list[int]]:
    """Map depth -> orders ``n`` in ``[n_min, n_max]`` realising that depth."""
    table: dict[int, list[int]] = {}
    for n in range(n_min, n_max + 1):
        table.setdefault(ball_cylinder_length(n, eps, N, kind), []).append(n)
    return table


def parse_words(items: Sequence) -> list[bytes]:
    return [as_word(w) for w in items]
