"""Exact integer machinery for the derivative-growth sequences.

Two growth rules drive everything downstream:

* ``QUAD``: the quadruple factorial numbers a_n = (2(n-1))!/(n-1)!
  (OEIS A001813 shifted to start at n = 1).  They satisfy the binomial
  convolution a_n = sum_{m=1}^{n-1} C(n,m) a_{n-m} a_m and the ratio
  a_n (n+1) / a_{n+1} = n(n+1) / ((2n)(2n-1)) -> 1/4.
* ``FACTORIAL``: a_n = n!, whose ratio is identically 1.

The ratio limit is the analyticity budget ``eps`` used by the certificate
layer (1/4 for the linear eigenproblem rule, 1 for the semilinear rule).

All arithmetic is arbitrary-precision integer or ``Fraction``; every identity
here is testable with zero tolerance.  By convention the unused zeroth term
is 1 for both rules (``ALPHA_ZERO``); ``alpha`` itself rejects n = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache

__all__ = [
    "AlphaRule",
    "AlphaSequence",
    "ALPHA_ZERO",
    "N_MAX",
    "alpha",
    "alpha_sequence",
    "catalan",
    "epsilon_ratio",
    "rule_epsilon",
]

#: Largest admitted index. Arbitrary-precision integers make larger n exact
#: too, but nothing downstream needs more and the cap keeps tables small.
N_MAX = 64

#: Zeroth term convention shared by both rules (the recurrence starts at 1).
ALPHA_ZERO = 1


class AlphaRule(str, Enum):
    """Growth rule selector."""

    QUAD = "quad"
    FACTORIAL = "factorial"


def _check_index(n: int, smallest: int = 1) -> None:
    if not isinstance(n, int) or isinstance(n, bool):
        raise ValueError(f"index must be an integer, got {n!r}")
    if n < smallest or n > N_MAX:
        raise ValueError(f"index {n} outside [{smallest}, {N_MAX}]")


@lru_cache(maxsize=None)
def _quad_table(n_max: int) -> tuple[int, ...]:
    """Quadruple factorial values a_1..a_n_max via the binomial recurrence,
    cross-checked term by term against the closed form."""
    values = [1]  # a_1
    for n in range(2, n_max + 1):
        rec = sum(
            math.comb(n, m) * values[n - m - 1] * values[m - 1]
            for m in range(1, n)
        )
        closed = math.factorial(2 * (n - 1)) // math.factorial(n - 1)
        assert rec == closed, f"recurrence/closed-form mismatch at n={n}"
        values.append(rec)
    return tuple(values)


def alpha(n: int, rule: AlphaRule = AlphaRule.QUAD) -> int:
    """n-th derivative-growth coefficient under ``rule`` (n from 1 to 64)."""
    _check_index(n)
    if AlphaRule(rule) is AlphaRule.QUAD:
        return _quad_table(n)[n - 1]
    return math.factorial(n)


def catalan(n: int) -> int:
    """n-th Catalan number C_n = (2n)! / (n! (n+1)!), exact."""
    _check_index(n, smallest=0)
    return math.comb(2 * n, n) // (n + 1)


def epsilon_ratio(n: int, rule: AlphaRule = AlphaRule.QUAD) -> Fraction:
    """Exact ratio a_n (n+1) / a_{n+1}.

    For QUAD this simplifies to n(n+1)/((2n)(2n-1)) and decreases to 1/4;
    for FACTORIAL it is identically 1.  The limit is the ``eps`` budget of
    the corresponding certificate rule.  Defined for every n >= 1 (the
    closed form sidesteps the recurrence-table cap).
    """
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ValueError(f"index must be a positive integer, got {n!r}")
    if AlphaRule(rule) is AlphaRule.FACTORIAL:
        return Fraction(1)
    a_n = math.factorial(2 * (n - 1)) // math.factorial(n - 1)
    a_next = math.factorial(2 * n) // math.factorial(n)
    return Fraction(a_n * (n + 1), a_next)


def rule_epsilon(rule: AlphaRule) -> Fraction:
    """Limit of ``epsilon_ratio`` for the rule: 1/4 (QUAD) or 1 (FACTORIAL)."""
    return Fraction(1, 4) if AlphaRule(rule) is AlphaRule.QUAD else Fraction(1)


@dataclass(frozen=True)
class AlphaSequence:
    """Materialized growth sequence, indexed from 1 like the recurrences."""

    rule: AlphaRule
    values: tuple[int, ...]

    def __getitem__(self, n: int) -> int:
        if n < 1 or n > len(self.values):
            raise ValueError(f"index {n} outside stored range 1..{len(self.values)}")
        return self.values[n - 1]

    @property
    def n_max(self) -> int:
        return len(self.values)


def alpha_sequence(n_max: int, rule: AlphaRule = AlphaRule.QUAD) -> AlphaSequence:
    """Build a_1..a_n_max under ``rule``."""
    _check_index(n_max)
    rule = AlphaRule(rule)
    vals = tuple(alpha(n, rule) for n in range(1, n_max + 1))
    return AlphaSequence(rule=rule, values=vals)
