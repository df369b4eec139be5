"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run on its own with ``pytest tests/test_acceptance.py -v``; the lines are
printed as each criterion finishes and repeated in the terminal summary.
"""

import math
import time
import warnings
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from nbe import cli
from nbe.cover import CoverProblem, frostman_measure, integral_cover_cost
from nbe.cover.oracle import brute_force_cover, random_instance
from nbe.estimators import (
    brin_katok_pointwise,
    critical_exponent,
    default_n_schedule,
    extrapolate,
    min_spanning_count,
    neutralized_bowen_entropy,
    cover_sandwich_check,
    sandwich_threshold,
    spanning_entropy,
    tail_infimum,
    variational_sandwich,
    verify_bk_katok,
)
from nbe.measures import MeasureSpec, log_cylinder_mass, sample_word
from nbe.symbolic import ShiftSpec, SubsetSpec, ball_cylinder_length

S2, S3 = ShiftSpec.full(2), ShiftSpec.full(3)
GM = SubsetSpec.sft_subsystem([[1, 1], [1, 0]])
LN3 = math.log(3)
LNPHI = math.log((1 + math.sqrt(5)) / 2)
EPS = [0.4, 0.2, 0.1]


def test_c01_full_shift_entropy(verdict):
    t0 = time.perf_counter()
    table = neutralized_bowen_entropy(S3, None, EPS, 50, 400)
    elapsed = time.perf_counter() - t0
    errs = [abs(r.s_star - (LN3 + r.eps)) for r in table.rows]
    lim = table.extrapolation.intercept
    rel = abs(lim - LN3) / LN3
    ok = max(errs) <= 0.05 and rel <= 0.02 and elapsed < 30
    cells = ", ".join(f"s*({r.eps})={r.s_star:.4f}" for r in table.rows)
    assert verdict("C1 full-shift entropy", ok,
                   f"{cells}; max |s*-(ln3+eps)|={max(errs):.4f} (<=0.05); "
                   f"limit={lim:.4f} rel err {rel:.2%} (<=2%); {elapsed:.1f}s (<30s)")


def test_c02_spanning_bounds(verdict):
    cells = []
    for m in (1, 2, 3):
        for k in (1, 2, 3):
            r = min_spanning_count(S3, m * k, Fraction(1, k))
            cells.append(r <= 3 ** (m * (k + 1) + 1))
    rates = []
    for k in (1, 2, 3):
        rep = spanning_entropy(S3, [Fraction(1, k)], default_n_schedule())
        rates.append((k, rep.rows[0].value, (1 + 1 / k) * LN3 + 0.02))
    ok = all(cells) and all(v <= b for _, v, b in rates)
    detail = f"r_mk bound holds in {sum(cells)}/9 cells; " + ", ".join(
        f"r(1/{k})={v:.4f}<={b:.4f}" for k, v, b in rates)
    assert verdict("C2 spanning bounds", ok, detail)


def test_c03_brin_katok_exactness(verdict):
    mu = MeasureSpec.uniform(3)
    sched = default_n_schedule(50, 400)
    ks = (3, 5, 10)
    mismatches, estimates = 0, []
    for k in ks:
        eps = Fraction(1, k)
        lims = []
        for seed in range(100):
            pw = brin_katok_pointwise(mu, seed, eps, sched, kind="closed")
            for n, D, v in zip(pw.n, pw.depth, pw.values):
                if v != D * LN3 / n:
                    mismatches += 1
            lims.append(pw.liminf)
        estimates.append(float(np.mean(lims)))
    ex = extrapolate([1 / k for k in ks], estimates)
    rel = abs(ex.intercept - LN3) / LN3
    ok = mismatches == 0 and rel <= 0.02
    assert verdict("C3 Brin-Katok exactness", ok,
                   f"{mismatches} mismatches over 100 points x {len(sched)} orders x {len(ks)} eps; "
                   f"limit={ex.intercept:.4f} rel err {rel:.2%} (<=2%)")


def test_c04_golden_mean(verdict):
    t0 = time.perf_counter()
    s02 = critical_exponent(S2, GM, 0.2, 50, 400).s_star
    table = neutralized_bowen_entropy(S2, GM, EPS, 50, 400)
    elapsed = time.perf_counter() - t0
    target = (1 + 0.2 / math.log(2)) * LNPHI
    rel = abs(table.extrapolation.intercept - LNPHI) / LNPHI
    ok = abs(s02 - target) <= 0.05 and rel <= 0.02 and elapsed < 30
    assert verdict("C4 golden-mean SFT", ok,
                   f"s*(0.2)={s02:.4f} vs {target:.4f} (|diff|={abs(s02 - target):.4f}<=0.05); "
                   f"limit={table.extrapolation.intercept:.4f} rel err {rel:.2%} (<=2%); "
                   f"{elapsed:.1f}s (<30s)")


def test_c05_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240)
    worst, bad = 0.0, 0
    for _ in range(100):
        p = random_instance(rng, max_depth=5)
        _, sol = integral_cover_cost(p, precision="high")
        bf = brute_force_cover(p)
        with mpmath.workprec(160):
            dp = sol.cost_mp if sol.cost_mp is not None else mpmath.mpf(0)
            rel = 0.0 if dp == bf else float(abs(dp - bf) / max(abs(dp), abs(bf)))
        worst = max(worst, rel)
        bad += rel > 1e-12
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 60
    assert verdict("C5 oracle equivalence", ok,
                   f"100 instances, {bad} disagreements, worst rel {worst:.1e} (<=1e-12); "
                   f"{elapsed:.1f}s (<60s)")


def _c6_fixtures():
    yield "sigma2 single order", CoverProblem(S2, SubsetSpec.whole(), 0.5, 3, 3, 0.9)
    yield "sigma3 near s*", CoverProblem(S3, SubsetSpec.whole(), 0.3, 50, 400, LN3 + 0.29)
    yield "golden mean", CoverProblem(S2, GM, 0.2, 50, 400, 0.6)
    yield "cylinder union", CoverProblem(S2, SubsetSpec.cylinder_union(["01", "110", "1111"]),
                                         0.3, 10, 80, 0.8)
    yield "sft in sigma3", CoverProblem(S3, SubsetSpec.sft_subsystem(
        [[1, 1, 0], [0, 1, 1], [1, 0, 1]]), 0.4, 5, 60, 0.7)
    rng = np.random.default_rng(6)
    for i in range(10):
        p = random_instance(rng, max_depth=8)
        if integral_cover_cost(p)[0] > -math.inf:
            yield f"random {i}", p


def test_c06_duality(verdict):
    worst_rel, audited, violations, names = 0.0, 0, 0, []
    for name, p in _c6_fixtures():
        _, sol = integral_cover_cost(p, precision="high")
        _, nu = frostman_measure(p, precision="high")
        with mpmath.workprec(160):
            rel = float(abs(nu.total_mp - sol.cost_mp) / sol.cost_mp)
        worst_rel = max(worst_rel, rel)
        audit = nu.audit(depth=8, samples=50, seed=1)
        audited += audit.nodes_checked
        violations += len(audit.violations)
        names.append(name)
    ok = worst_rel <= 1e-12 and violations == 0
    assert verdict("C6 duality", ok,
                   f"{len(names)} fixtures, worst |flow-cost|/cost {worst_rel:.1e} (<=1e-12); "
                   f"{audited} ball constraints audited (exhaustive to depth 8), "
                   f"{violations} violations")


def test_c07_cover_sandwich(verdict):
    checks, bad = 0, []
    for name, shift, sub in (("sigma3", S3, None), ("golden mean", S2, GM)):
        for eps in (0.2, 0.4):
            for theta in (0.2, 0.5):
                n_min = sandwich_threshold(eps, theta)
                for s in (0.3, 0.8, 1.5):
                    r = cover_sandwich_check(shift, sub, eps, s, theta, n_min, n_min + 100)
                    checks += 1
                    if not r["holds"]:
                        bad.append((name, eps, theta, s))
    ok = not bad
    assert verdict("C7 cover sandwich", ok,
                   f"{checks} grid points over both systems at n_min = threshold, "
                   f"{len(bad)} violations {bad[:3]}")


def test_c08_bk_katok(verdict):
    rows = []
    for name, mu in (("uniform3", MeasureSpec.uniform(3)),
                     ("bernoulli(3/4,1/4)", MeasureSpec.bernoulli([0.75, 0.25]))):
        for eps in (0.2, 0.4):
            r = verify_bk_katok(mu, eps)
            rows.append((name, eps, r.slack, r.holds))
    ok = all(h and s >= -0.02 for *_, s, h in rows)
    assert verdict("C8 BK(eps/2) <= Katok(eps)", ok, "; ".join(
        f"{n} eps={e}: slack {s:+.4f}" for n, e, s, _ in rows) + " (>= -0.02)")


def _random_union(rng):
    k = int(rng.integers(1, 4))
    return sorted({bytes(int(b) for b in rng.integers(0, 2, size=int(rng.integers(1, 6))))
                   for _ in range(k)})


def test_c09_subset_properties(verdict):
    rng = np.random.default_rng(2024)
    n_min, n_max, tol = 1500, 3000, 1e-4
    nested_bad, union_gaps, coarse_gaps = 0, [], []
    for _ in range(20):
        a, b = _random_union(rng), _random_union(rng)
        sa, sb, su = (critical_exponent(S2, SubsetSpec.cylinder_union(w), 0.3, n_min, n_max,
                                        tol).s_star for w in (a, b, a + b))
        nested_bad += sa > su + 1e-6
        union_gaps.append(su - max(sa, sb))
        ca, cb, cu = (critical_exponent(S2, SubsetSpec.cylinder_union(w), 0.3, 50, 400).s_star
                      for w in (a, b, a + b))
        coarse_gaps.append(cu - max(ca, cb))
    worst = max(abs(g) for g in union_gaps)
    ok = nested_bad == 0 and worst <= 1e-3
    assert verdict("C9 subset monotonicity and finite union", ok,
                   f"20 pairs at n_min={n_min}: {nested_bad} nested violations; "
                   f"max |s*(union)-max| = {worst:.1e} (<=1e-3); at n_min=50 the gap reaches "
                   f"{max(coarse_gaps):.4f} (ln2/n_min = {math.log(2) / 50:.4f})")


def test_c10_variational_sandwich(verdict):
    parts, ok = [], True
    for name, shift, K in (("sigma3", S3, None), ("golden mean", S2, GM)):
        rep = variational_sandwich(shift, K, 0.2, n_min=50, n_max=400, samples=200, seed=11)
        ok &= rep.holds and rep.s_star <= rep.bk_frostman + 0.05 and rep.katok <= rep.s_star + 0.05
        parts.append(f"{name}: katok {rep.katok:.4f} <= s* {rep.s_star:.4f} <= "
                     f"BK_frostman(2eps) {rep.bk_frostman:.4f} (+0.05)")
    assert verdict("C10 variational sandwich", ok, "; ".join(parts))


def test_c11_determinism(verdict, tmp_path):
    cfg = tmp_path / "sweep.toml"
    cfg.write_text("[system]\nalphabet = 2\n[compute]\nepsilon = [0.4, 0.3, 0.2]\n"
                   "n_min = [20, 40, 60]\nn_max = 200\n[sweep]\nquantity = \"entropy\"\n"
                   "parallel = 3\n[output]\nprefix = \"sweep\"\n")
    codes = [cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path / d), "-q"])
             for d in ("a", "b")]
    a = (tmp_path / "a" / "sweep_sweep.csv").read_bytes()
    b = (tmp_path / "b" / "sweep_sweep.csv").read_bytes()
    rows = a.decode().strip().splitlines()[1:]
    ok = codes == [0, 0] and a == b and len(rows) == 9
    assert verdict("C11 determinism", ok,
                   f"two sweep runs, exit {codes}, {len(rows)} rows, "
                   f"byte-identical CSV: {a == b}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
