"""Bernoulli and Markov measures with exact cylinder masses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Sequence

import numpy as np

from .symbolic import ShiftSpec, as_word, word_str

__all__ = [
    "MeasureSpec",
    "log_cylinder_mass",
    "cylinder_mass_exact",
    "sample_word",
    "entropy_rate",
    "initial_entropy",
]

_TOL = 1e-12


def _log(p: Real) -> float:
    """Natural log; exact-rational entries go through numerator/denominator
    so ``log(1/3) == -log(3)`` bit for bit."""
    if p == 0:
        return -math.inf
    if isinstance(p, Fraction):
        return math.log(p.numerator) - math.log(p.denominator)
    return math.log(p)


def _xlogx(p: Real) -> float:
    return 0.0 if p == 0 else float(p) * _log(p)


def _as_entries(values) -> tuple:
    out = []
    for v in values:
        if isinstance(v, (Fraction, int)) or isinstance(v, str):
            out.append(Fraction(v))
        else:
            out.append(float(v))
    return tuple(out)


@dataclass(frozen=True)
class MeasureSpec:
    """A Bernoulli measure (``probs``) or a stationary Markov measure
    (``stationary`` and row-stochastic ``matrix``).

    Entries may be ``Fraction`` for the exact-rational mode or floats.
    """

    kind: str
    probs: tuple = ()
    stationary: tuple = ()
    matrix: tuple = ()

    def __post_init__(self):
        if self.kind == "bernoulli":
            p = _as_entries(self.probs)
            object.__setattr__(self, "probs", p)
            if len(p) < 2:
                raise ValueError("a Bernoulli measure needs at least 2 symbols")
            if any(v < 0 for v in p) or abs(float(sum(p)) - 1) > _TOL:
                raise ValueError("Bernoulli probabilities must be >= 0 and sum to 1")
        elif self.kind == "markov":
            P = tuple(_as_entries(row) for row in self.matrix)
            pi = _as_entries(self.stationary)
            object.__setattr__(self, "matrix", P)
            object.__setattr__(self, "stationary", pi)
            n = len(P)
            if n < 2 or any(len(r) != n for r in P) or len(pi) != n:
                raise ValueError("Markov matrix must be square and match the stationary vector")
            if any(v < 0 for r in P for v in r) or any(v < 0 for v in pi):
                raise ValueError("Markov entries must be >= 0")
            for r in P:
                if abs(float(sum(r)) - 1) > _TOL:
                    raise ValueError("Markov matrix must be row-stochastic")
            if abs(float(sum(pi)) - 1) > _TOL:
                raise ValueError("stationary vector must sum to 1")
            for j in range(n):
                if abs(float(sum(pi[i] * P[i][j] for i in range(n)) - pi[j])) > _TOL:
                    raise ValueError("stationary vector is not invariant under the matrix")
        else:
            raise ValueError(f"unknown measure kind {self.kind!r}")

    @classmethod
    def bernoulli(cls, probs: Sequence) -> "MeasureSpec":
        return cls("bernoulli", probs=tuple(probs))

    @classmethod
    def uniform(cls, N: int, exact: bool = True) -> "MeasureSpec":
        p = Fraction(1, N) if exact else 1.0 / N
        return cls("bernoulli", probs=(p,) * N)

    @classmethod
    def markov(cls, matrix, stationary=None) -> "MeasureSpec":
        rows = [list(r) for r in matrix]
        if stationary is None:
            stationary = _stationary(rows)
        return cls("markov", stationary=tuple(stationary), matrix=tuple(tuple(r) for r in rows))

    @classmethod
    def parry(cls, shift: ShiftSpec) -> "MeasureSpec":
        """Measure of maximal entropy of an irreducible SFT."""
        if shift.kind == "full":
            return cls.uniform(shift.alphabet_size, exact=False)
        A = shift.matrix.astype(float)
        w, vr = np.linalg.eig(A)
        k = int(np.argmax(w.real))
        lam = float(w[k].real)
        r = np.abs(vr[:, k].real)
        wl, vl = np.linalg.eig(A.T)
        l = np.abs(vl[:, int(np.argmax(wl.real))].real)
        P = A * r[None, :] / (lam * r[:, None])
        P = P / P.sum(axis=1, keepdims=True)
        pi = l * r / float(l @ r)
        return cls("markov", stationary=tuple(float(v) for v in pi),
                   matrix=tuple(tuple(float(v) for v in row) for row in P))

    @property
    def alphabet_size(self) -> int:
        return len(self.probs) if self.kind == "bernoulli" else len(self.matrix)

    @property
    def is_exact(self) -> bool:
        vals = self.probs if self.kind == "bernoulli" else self.stationary + sum(self.matrix, ())
        return all(isinstance(v, Fraction) for v in vals)

    def initial(self) -> tuple:
        return self.probs if self.kind == "bernoulli" else self.stationary

    def transition(self, a: int, b: int):
        return self.probs[b] if self.kind == "bernoulli" else self.matrix[a][b]

    def check_support(self, shift: ShiftSpec) -> None:
        """Raise unless every positive-mass transition is allowed by ``shift``."""
        N = self.alphabet_size
        if N != shift.alphabet_size:
            raise ValueError("measure alphabet does not match the shift")
        for a in range(N):
            if self.initial()[a] == 0 and self.kind == "markov":
                continue
            for b in range(N):
                if self.transition(a, b) > 0 and self.initial()[a] > 0 and not shift.allowed(a, b):
                    raise ValueError(f"measure charges the forbidden transition {a}->{b}")

    def support_matrix(self) -> np.ndarray:
        N = self.alphabet_size
        return np.array([[int(self.transition(a, b) > 0) for b in range(N)] for a in range(N)])


def _stationary(rows) -> tuple:
    if all(isinstance(v, (Fraction, int)) for r in rows for v in r):
        return _stationary_exact([[Fraction(v) for v in r] for r in rows])
    P = np.array(rows, dtype=float)
    w, v = np.linalg.eig(P.T)
    k = int(np.argmin(abs(w - 1)))
    pi = np.abs(v[:, k].real)
    return tuple(float(x) for x in pi / pi.sum())


def _stationary_exact(P: list[list[Fraction]]) -> tuple:
    """Solve ``pi (P - I) = 0, sum(pi) = 1`` by Gaussian elimination over Q."""
    n = len(P)
    A = [[P[j][i] - (1 if i == j else 0) for j in range(n)] for i in range(n - 1)]
    A.append([Fraction(1)] * n)
    b = [Fraction(0)] * (n - 1) + [Fraction(1)]
    for col in range(n):
        piv = next(r for r in range(col, n) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col] / A[col][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
                b[r] -= f * b[col]
    return tuple(b[i] / A[i][i] for i in range(n))


def _check_symbols(mu: MeasureSpec, w: bytes) -> None:
    if any(s >= mu.alphabet_size for s in w):
        raise ValueError(f"word {word_str(w)} has a symbol outside the alphabet")


def log_cylinder_mass(mu: MeasureSpec, w) -> float:
    """``ln mu([w])`` in nats; ``-inf`` for null cylinders.

    Factors are grouped by their value and each group contributes
    ``count * ln p`` in a fixed order, so the result depends only on the
    counts; a word under a uniform Bernoulli measure gives exactly
    ``-len(w) * ln N``.
    """
    w = as_word(w)
    _check_symbols(mu, w)
    if not w:
        return 0.0
    N = mu.alphabet_size
    groups: dict[float, int] = {}
    if mu.kind == "bernoulli":
        counts = np.bincount(np.frombuffer(w, dtype=np.uint8), minlength=N)
        for b in np.nonzero(counts)[0]:
            lp = _log(mu.probs[b])
            groups[lp] = groups.get(lp, 0) + int(counts[b])
        total = 0.0
    else:
        arr = np.frombuffer(w, dtype=np.uint8).astype(np.int64)
        total = _log(mu.stationary[w[0]])
        if len(w) > 1:
            pairs = np.bincount(arr[:-1] * N + arr[1:], minlength=N * N)
            for idx in np.nonzero(pairs)[0]:
                lp = _log(mu.matrix[idx // N][idx % N])
                groups[lp] = groups.get(lp, 0) + int(pairs[idx])
    if total == -math.inf or -math.inf in groups:
        return -math.inf
    for lp in sorted(groups):
        total += groups[lp] * lp
    return total


def cylinder_mass_exact(mu: MeasureSpec, w) -> Fraction:
    """Exact ``mu([w])``; needs rational entries."""
    if not mu.is_exact:
        raise ValueError("exact masses need a measure with Fraction entries")
    w = as_word(w)
    _check_symbols(mu, w)
    if not w:
        return Fraction(1)
    m = Fraction(mu.initial()[w[0]])
    for a, b in zip(w, w[1:]):
        m *= mu.transition(a, b)
    return m


def sample_word(mu: MeasureSpec, length: int, seed: int) -> bytes:
    """Draw ``x_0 ... x_{length-1}`` from ``mu``; deterministic in ``seed``."""
    if length < 0:
        raise ValueError("length must be >= 0")
    if length == 0:
        return b""
    rng = np.random.default_rng(seed)
    N = mu.alphabet_size
    if mu.kind == "bernoulli":
        p = np.array([float(v) for v in mu.probs])
        return rng.choice(N, size=length, p=p / p.sum()).astype(np.uint8).tobytes()
    cum = np.cumsum(np.array([[float(v) for v in r] for r in mu.matrix]), axis=1)
    cum[:, -1] = 1.0
    pi = np.array([float(v) for v in mu.stationary])
    u = rng.random(length)
    out = np.empty(length, dtype=np.uint8)
    out[0] = int(np.searchsorted(np.cumsum(pi / pi.sum()), u[0], side="right"))
    s = int(out[0])
    for i in range(1, length):
        s = int(np.searchsorted(cum[s], u[i], side="right"))
        out[i] = s
    return out.tobytes()


def entropy_rate(mu: MeasureSpec) -> float:
    """Kolmogorov-Sinai entropy of the shift under ``mu`` (nats)."""
    if mu.kind == "bernoulli":
        return -sum(_xlogx(p) for p in mu.probs)
    return -sum(float(pi) * sum(_xlogx(p) for p in row)
                for pi, row in zip(mu.stationary, mu.matrix))


def initial_entropy(mu: MeasureSpec) -> float:
    """Entropy of the one-symbol marginal."""
    return -sum(_xlogx(p) for p in mu.initial())
