"""Exact-arithmetic checks for the growth sequences.

Oracles: plain factorial formulas evaluated with arbitrary-precision
integers, and independent reimplementations of the binomial recurrence.
Every assertion is exact (no floating point).
"""

import math
from fractions import Fraction

import pytest

from holoevp.sequences import (
    ALPHA_ZERO,
    AlphaRule,
    alpha,
    alpha_sequence,
    catalan,
    epsilon_ratio,
    rule_epsilon,
)


def quad_closed_form(n):
    return math.factorial(2 * (n - 1)) // math.factorial(n - 1)


def quad_recurrence(n_max):
    vals = {1: 1}
    for n in range(2, n_max + 1):
        vals[n] = sum(
            math.comb(n, m) * vals[n - m] * vals[m] for m in range(1, n)
        )
    return vals


def test_alpha_pinned_values():
    assert alpha(1, AlphaRule.QUAD) == 1
    assert alpha(3, AlphaRule.QUAD) == 12  # 4!/2!
    # frozen from the factorial oracle: (2*4)!/4! = 40320/24
    assert quad_closed_form(5) == 1680
    assert alpha(5, AlphaRule.QUAD) == 1680
    assert alpha(4, AlphaRule.FACTORIAL) == 24


def test_alpha_domain_errors():
    with pytest.raises(ValueError):
        alpha(0)
    with pytest.raises(ValueError):
        alpha(65)
    with pytest.raises(ValueError):
        alpha(2.5)  # type: ignore[arg-type]


def test_recurrence_matches_closed_form_exactly():
    rec = quad_recurrence(32)
    for n in range(1, 33):
        assert rec[n] == quad_closed_form(n)
        assert alpha(n, AlphaRule.QUAD) == rec[n]


def test_superlinear_growth_inequality():
    for n in range(2, 33):
        assert n * alpha(n - 1) <= alpha(n)


def test_catalan_values():
    assert catalan(0) == 1
    assert catalan(3) == 5
    # frozen from the factorial formula oracle (20)!/(10! 11!)
    assert math.factorial(20) // (math.factorial(10) * math.factorial(11)) == 16796
    assert catalan(10) == 16796


def test_catalan_convolution_reproduces_recurrence():
    # sum_k C(N,k) a_k a_{N-k} telescopes through Catalan convolution
    for N in range(2, 21):
        conv = sum(
            math.comb(N, k) * alpha(k) * alpha(N - k) for k in range(1, N)
        )
        assert conv == alpha(N)


def test_epsilon_ratio_values():
    # recurrence oracle: a2 * 3 / a3 = 6/12
    assert epsilon_ratio(2, AlphaRule.QUAD) == Fraction(1, 2)
    # closed form n(n+1)/((2n)(2n-1)) at n = 3
    assert epsilon_ratio(3, AlphaRule.QUAD) == Fraction(2, 5)
    assert epsilon_ratio(7, AlphaRule.FACTORIAL) == Fraction(1)


def test_epsilon_ratio_closed_form_everywhere():
    for n in range(1, 60):
        assert epsilon_ratio(n, AlphaRule.QUAD) == Fraction(n * (n + 1), (2 * n) * (2 * n - 1))


def test_epsilon_ratio_monotone_above_limit():
    prev = None
    for n in range(2, 61):
        r = epsilon_ratio(n, AlphaRule.QUAD)
        assert r > Fraction(1, 4)
        if prev is not None:
            assert r < prev
        prev = r


def test_epsilon_ratio_limit_proximity():
    # Exact value at n = 50 (factorial oracle): 17/66, a distance of exactly
    # 1/132 ~ 7.58e-3 from the limit 1/4.  The 5e-3 neighbourhood is first
    # entered at n = 76.
    assert epsilon_ratio(50, AlphaRule.QUAD) == Fraction(17, 66)
    assert epsilon_ratio(50, AlphaRule.QUAD) - Fraction(1, 4) == Fraction(1, 132)
    first = next(
        n for n in range(2, 100)
        if epsilon_ratio(n, AlphaRule.QUAD) - Fraction(1, 4) < Fraction(5, 1000)
    )
    assert first == 76


def test_rule_epsilon_limits():
    assert rule_epsilon(AlphaRule.QUAD) == Fraction(1, 4)
    assert rule_epsilon(AlphaRule.FACTORIAL) == Fraction(1)


def test_alpha_sequence_indexing():
    seq = alpha_sequence(6, AlphaRule.QUAD)
    assert seq[1] == 1 and seq[6] == 30240
    assert seq.n_max == 6
    with pytest.raises(ValueError):
        seq[0]
    with pytest.raises(ValueError):
        seq[7]
    assert ALPHA_ZERO == 1
