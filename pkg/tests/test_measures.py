import itertools
import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nbe.measures import (
    MeasureSpec,
    cylinder_mass_exact,
    entropy_rate,
    log_cylinder_mass,
    sample_word,
)
from nbe.symbolic import ShiftSpec

MARKOV = MeasureSpec.markov([[F(1, 2), F(1, 2)], [F(1), F(0)]], [F(2, 3), F(1, 3)])
BIASED = MeasureSpec.bernoulli([F(1, 2), F(1, 4), F(1, 4)])


def test_uniform_two_symbols():
    assert log_cylinder_mass(MeasureSpec.uniform(3), "01") == pytest.approx(math.log(1 / 9), abs=1e-15)


def test_empty_word_has_mass_one():
    assert log_cylinder_mass(BIASED, b"") == 0.0


def test_markov_hand_product():
    assert log_cylinder_mass(MARKOV, "010") == pytest.approx(math.log(2 / 3 * 1 / 2 * 1), abs=1e-15)
    assert cylinder_mass_exact(MARKOV, "010") == F(1, 3)


def test_markov_length3_masses_sum_to_one():
    total = sum(cylinder_mass_exact(MARKOV, bytes(w)) for w in itertools.product([0, 1], repeat=3))
    assert total == 1


def test_zero_mass_is_minus_infinity():
    assert log_cylinder_mass(MARKOV, "11") == -math.inf
    assert log_cylinder_mass(MeasureSpec.bernoulli([1, 0]), "01") == -math.inf


def test_symbol_outside_alphabet():
    with pytest.raises(ValueError):
        log_cylinder_mass(MeasureSpec.uniform(2), bytes([2]))


def test_uniform_long_word_is_exact():
    w = sample_word(MeasureSpec.uniform(3), 200, seed=1)
    assert log_cylinder_mass(MeasureSpec.uniform(3), w) == -200 * math.log(3)


@pytest.mark.parametrize("mu", [MARKOV, BIASED, MeasureSpec.uniform(2)])
@pytest.mark.parametrize("D", range(0, 9))
def test_total_mass_is_one(mu, D):
    words = itertools.product(range(mu.alphabet_size), repeat=D)
    assert sum(cylinder_mass_exact(mu, bytes(w)) for w in words) == 1
    floats = [math.exp(log_cylinder_mass(mu, bytes(w)))
              for w in itertools.product(range(mu.alphabet_size), repeat=D)]
    assert math.fsum(floats) == pytest.approx(1.0, abs=1e-12)


@given(st.sampled_from([MARKOV, BIASED]), st.lists(st.integers(0, 1), max_size=6).map(bytes))
def test_additivity(mu, w):
    parent = math.exp(log_cylinder_mass(mu, w))
    kids = math.fsum(math.exp(log_cylinder_mass(mu, w + bytes([b]))) for b in range(mu.alphabet_size))
    assert kids == pytest.approx(parent, abs=1e-12)


def test_measure_validation():
    with pytest.raises(ValueError):
        MeasureSpec.bernoulli([0.5, 0.6])
    with pytest.raises(ValueError):
        MeasureSpec.bernoulli([-0.5, 1.5])
    with pytest.raises(ValueError):
        MeasureSpec.markov([[0.5, 0.5], [1, 0]], [0.5, 0.5])
    with pytest.raises(ValueError):
        MeasureSpec.markov([[0.5, 0.4], [1, 0]])


def test_support_consistency_with_sft():
    MARKOV.check_support(ShiftSpec.golden_mean())
    with pytest.raises(ValueError):
        MeasureSpec.uniform(2).check_support(ShiftSpec.golden_mean())


def test_parry_measure_golden_mean():
    mu = MeasureSpec.parry(ShiftSpec.golden_mean())
    phi = (1 + math.sqrt(5)) / 2
    assert entropy_rate(mu) == pytest.approx(math.log(phi), abs=1e-12)


# --- sampling -------------------------------------------------------------

def test_sample_length_zero():
    assert sample_word(BIASED, 0, seed=5) == b""


def test_sample_deterministic():
    assert sample_word(MARKOV, 500, seed=9) == sample_word(MARKOV, 500, seed=9)
    assert sample_word(MARKOV, 500, seed=9) != sample_word(MARKOV, 500, seed=10)


def test_sample_frequency_lln():
    w = np.frombuffer(sample_word(MeasureSpec.uniform(2), 10 ** 5, seed=3), dtype=np.uint8)
    assert abs(w.mean() - 0.5) < 0.01


def test_markov_transition_frequencies():
    w = np.frombuffer(sample_word(MARKOV, 10 ** 5, seed=4), dtype=np.uint8).astype(int)
    counts = np.zeros((2, 2))
    np.add.at(counts, (w[:-1], w[1:]), 1)
    freq = counts / counts.sum(axis=1, keepdims=True)
    assert np.allclose(freq, [[0.5, 0.5], [1, 0]], atol=0.02)


def test_sampled_cylinder_frequencies_match_masses():
    mu = BIASED
    draws = [sample_word(mu, 2, seed=s) for s in range(4000)]
    for w in itertools.product(range(3), repeat=2):
        w = bytes(w)
        p = float(cylinder_mass_exact(mu, w))
        freq = sum(d == w for d in draws) / len(draws)
        assert abs(freq - p) < 4 * math.sqrt(p * (1 - p) / len(draws)) + 1e-3


def test_sample_empty_support_never_drawn():
    w = sample_word(MARKOV, 2000, seed=8)
    assert b"\x01\x01" not in w


# --- entropy rate -----------------------------------------------------------

@pytest.mark.parametrize("N", [2, 3, 5])
def test_entropy_uniform(N):
    assert entropy_rate(MeasureSpec.uniform(N)) == pytest.approx(math.log(N), abs=1e-15)


def test_entropy_biased_and_exact_sum():
    h = entropy_rate(BIASED)
    assert h == pytest.approx(1.5 * math.log(2), abs=1e-15)
    D = 10
    # E[-log mu[x_0..x_{D-1}]] by exact summation over symbol counts
    expect = 0.0
    for counts in itertools.product(range(D + 1), repeat=2):
        a, b = counts
        c = D - a - b
        if c < 0:
            continue
        mult = math.factorial(D) // (math.factorial(a) * math.factorial(b) * math.factorial(c))
        logm = a * math.log(0.5) + (b + c) * math.log(0.25)
        expect -= mult * math.exp(logm) * logm
    assert expect / D == pytest.approx(h, abs=1e-12)


def test_entropy_deterministic_measure():
    assert entropy_rate(MeasureSpec.bernoulli([1, 0])) == 0.0


def test_entropy_markov():
    h = entropy_rate(MARKOV)
    assert h == pytest.approx(2 / 3 * math.log(2), abs=1e-15)
