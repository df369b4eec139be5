"""Lower neutralized Brin-Katok local entropy: decay rates of ball masses
along orbits, and their integral against the measure."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from numbers import Real
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from ..measures import MeasureSpec, entropy_rate, initial_entropy, log_cylinder_mass, sample_word
from ..symbolic import as_word, ball_cylinder_length
from .critical import Extrapolation, extrapolate

__all__ = [
    "LocalEntropyReport",
    "PointwiseBK",
    "brin_katok_entropy",
    "brin_katok_pointwise",
    "brin_katok_table",
    "default_n_schedule",
    "exchange_gap",
    "tail_infimum",
]


def default_n_schedule(n_lo: int = 50, n_hi: int = 400, points: int = 16) -> list[int]:
    """Geometric grid of orders, rounded and deduplicated."""
    return sorted({int(round(v)) for v in np.geomspace(n_lo, n_hi, points)})


def tail_infimum(values: Sequence[float]) -> float:
    """Minimum over the second half of the sequence (the liminf surrogate)."""
    values = list(values)
    if not values:
        raise ValueError("empty sequence")
    return min(values[len(values) // 2:])


@dataclass
class PointwiseBK:
    """``-(1/n) ln mu(B_n(x, exp(-n eps)))`` along ``n_schedule``."""

    n: list[int]
    depth: list[int]
    values: list[float]

    @property
    def liminf(self) -> float:
        return tail_infimum(self.values)


def _pointwise(log_prefix_mass: Callable[[int], float], n_schedule, eps, N, kind) -> PointwiseBK:
    depths = [ball_cylinder_length(n, eps, N, kind) for n in n_schedule]
    vals = []
    for n, D in zip(n_schedule, depths):
        lm = log_prefix_mass(D)
        vals.append(math.inf if lm == -math.inf else -lm / n)
    return PointwiseBK(list(n_schedule), depths, vals)


def brin_katok_pointwise(mu: MeasureSpec, x, eps: Real, n_schedule: Sequence[int],
                         kind: str = "open") -> PointwiseBK:
    """Exact pointwise values via the ball's cylinder.

    Parameters
    ----------
    x
        The centre as a word, or an integer seed to draw one from ``mu``.

    Notes
    -----
    A null cylinder gives ``+inf``.  For a uniform Bernoulli measure every
    value is exactly ``D(n, eps) * ln N / n``.
    """
    N = mu.alphabet_size
    n_schedule = sorted(n_schedule)
    need = ball_cylinder_length(n_schedule[-1], eps, N, kind)
    x = sample_word(mu, need, int(x)) if isinstance(x, (int, np.integer)) else as_word(x)
    if len(x) < need:
        raise ValueError(f"centre has length {len(x)}, needs {need}")
    return _pointwise(lambda D: log_cylinder_mass(mu, x[:D]), n_schedule, eps, N, kind)


@dataclass
class LocalEntropyReport:
    """Integrated lower Brin-Katok entropy at one ``eps``.

    ``estimate`` is the mean of the per-point tail infima (Monte Carlo) or
    the tail infimum of the exact per-``n`` expectations.  ``by_n_mean`` and
    ``by_n_halfwidth`` hold the per-order sample means and CI half widths.
    """

    eps: float
    mode: str
    n_schedule: list[int]
    estimate: float
    ci: tuple[float, float]
    confidence: float
    samples: int
    liminf_per_point: list[float] = field(default_factory=list)
    by_n_mean: list[float] = field(default_factory=list)
    by_n_halfwidth: list[float] = field(default_factory=list)
    exact_by_n: list[float] | None = None
    exact_limit: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _exact_expectations(mu: MeasureSpec, depths: Sequence[int]) -> list[float]:
    """``E[-ln mu([x_0 .. x_{D-1}])]`` for each ``D``."""
    h = entropy_rate(mu)
    if mu.kind == "bernoulli":
        return [D * h for D in depths]
    h0 = initial_entropy(mu)
    return [h0 + (D - 1) * h if D > 0 else 0.0 for D in depths]


def brin_katok_entropy(mu: MeasureSpec, eps: Real, mode: str = "monte-carlo",
                       samples: int = 200, seed: int = 0,
                       n_schedule: Sequence[int] | None = None, kind: str = "open",
                       confidence: float = 0.95,
                       sampler: Callable | None = None,
                       log_prefix: Callable | None = None,
                       alphabet_size: int | None = None) -> LocalEntropyReport:
    """Integral of the pointwise liminf surrogate over ``mu``.

    Parameters
    ----------
    mode
        ``"monte-carlo"`` averages ``samples`` independent centres drawn with
        ``seed``; ``"exact"`` uses closed-form per-order expectations
        (Bernoulli: ``D H``; Markov: ``H(pi) + (D - 1) h``), with a zero-width
        interval.
    sampler, log_prefix
        Optional replacements for drawing a centre (``rng -> word``) and for
        the log mass of its length-``D`` prefix (``(word, D) -> float``); they
        let the same estimator run on measures not given by a ``MeasureSpec``
        (pass ``mu=None`` and ``alphabet_size`` then).
    """
    n_schedule = sorted(n_schedule or default_n_schedule())
    N = mu.alphabet_size if mu is not None else alphabet_size
    depths = [ball_cylinder_length(n, eps, N, kind) for n in n_schedule]
    if mode == "exact":
        if mu is None or mu.kind not in ("bernoulli", "markov"):
            raise ValueError("exact mode needs a Bernoulli or Markov measure")
        per_n = [e / n for e, n in zip(_exact_expectations(mu, depths), n_schedule)]
        est = tail_infimum(per_n)
        limit = (1 + float(eps) / math.log(N)) * entropy_rate(mu)
        return LocalEntropyReport(float(eps), mode, n_schedule, est, (est, est), confidence, 0,
                                  [], per_n, [0.0] * len(per_n), per_n, limit)
    if mode != "monte-carlo":
        raise ValueError(f"unknown mode {mode!r}")
    if samples <= 0:
        raise ValueError("samples must be positive")
    children = np.random.SeedSequence(seed).spawn(samples)
    rows, lims = [], []
    for child in children:
        rng = np.random.default_rng(child)
        if sampler is None:
            x = sample_word(mu, depths[-1], int(rng.integers(2**63)))
            pw = _pointwise(lambda D, x=x: log_cylinder_mass(mu, x[:D]), n_schedule, eps, N, kind)
        else:
            x = sampler(rng)
            pw = _pointwise(lambda D, x=x: log_prefix(x, D), n_schedule, eps, N, kind)
        rows.append(pw.values)
        lims.append(pw.liminf)
    arr = np.array(rows)
    lim = np.array(lims)
    z = float(norm.ppf(0.5 + confidence / 2))
    sd = float(lim.std(ddof=1)) if samples > 1 else 0.0
    half = z * sd / math.sqrt(samples)
    mean = float(lim.mean())
    by_sd = arr.std(axis=0, ddof=1) if samples > 1 else np.zeros(arr.shape[1])
    exact_by_n = exact_limit = None
    if mu is not None and sampler is None:
        exact_by_n = [e / n for e, n in zip(_exact_expectations(mu, depths), n_schedule)]
        exact_limit = (1 + float(eps) / math.log(N)) * entropy_rate(mu)
    return LocalEntropyReport(float(eps), mode, n_schedule, mean, (mean - half, mean + half),
                              confidence, samples, [float(v) for v in lim],
                              [float(v) for v in arr.mean(axis=0)],
                              [float(v) for v in z * by_sd / math.sqrt(samples)],
                              exact_by_n, exact_limit)


@dataclass
class BKTable:
    reports: list[LocalEntropyReport]
    extrapolation: Extrapolation | None

    def to_dict(self) -> dict:
        return asdict(self)


def brin_katok_table(mu: MeasureSpec, eps_schedule: Sequence[Real], **kwargs) -> BKTable:
    """:func:`brin_katok_entropy` along an ``eps`` schedule plus the linear
    ``eps -> 0`` extrapolation of the estimates."""
    reports = [brin_katok_entropy(mu, e, **kwargs) for e in eps_schedule]
    return BKTable(reports, extrapolate([r.eps for r in reports], [r.estimate for r in reports]))


def exchange_gap(measures: Sequence[MeasureSpec], eps_schedule: Sequence[Real],
                 n_schedule: Sequence[int] | None = None, kind: str = "open") -> dict:
    """Both orders of ``eps -> 0`` and ``sup`` over a finite family of measures.

    Uses exact per-order expectations.  ``lim_sup`` extrapolates the
    per-``eps`` maxima; ``sup_lim`` takes the largest per-measure
    extrapolation.  The difference is reported as is; nothing is claimed
    about which order is the right one.
    """
    values = np.array([[brin_katok_entropy(mu, e, "exact", n_schedule=n_schedule,
                                           kind=kind).estimate for e in eps_schedule]
                       for mu in measures])
    lim_sup = extrapolate(eps_schedule, values.max(axis=0))
    per = [extrapolate(eps_schedule, row) for row in values]
    if lim_sup is None:
        return {"values": values.tolist(), "lim_sup": None, "sup_lim": None, "gap": None}
    sup_lim = max(e.intercept for e in per)
    return {"values": values.tolist(), "lim_sup": lim_sup.intercept, "sup_lim": sup_lim,
            "gap": lim_sup.intercept - sup_lim}
