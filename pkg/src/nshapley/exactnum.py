"""Exact rational constants behind interaction attributions.

Bernoulli numbers weight the higher-order corrections that make
truncated interaction attributions sum to the prediction, and the
coefficients ``coeff_c(n, m)`` say how strongly a decomposition
component sitting ``m`` features above a coalition bleeds into that
coalition's attribution. Both families are computed in arbitrary
precision rational arithmetic; conversion to float happens only where
the calling code multiplies them into model outputs. Numerators of
Bernoulli numbers grow super-exponentially, so fixed-width arithmetic
is not an option here.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from types import MappingProxyType
from typing import Mapping

__all__ = [
    "Rational",
    "bernoulli",
    "coeff_c",
    "check_bernoulli_identity",
    "check_bernoulli_orthogonality",
    "CoefficientTable",
]

Rational = Fraction

# Grow-only memo of B_0, B_1, ... shared by all callers for the process
# lifetime. Entries are immutable Fractions; the lock only serialises
# growth so concurrent readers never observe a partially built prefix.
_bernoulli_cache: list[Fraction] = [Fraction(1)]
_cache_lock = threading.Lock()


def bernoulli(n: int) -> Fraction:
    """Exact Bernoulli number B_n, with the convention B_1 = -1/2.

    Uses the recursion B_n = -1/(n+1) * sum_{k<n} C(n+1, k) B_k and
    memoizes every value computed along the way.
    """
    if n < 0:
        raise ValueError(f"Bernoulli numbers need n >= 0, got {n}")
    if n < len(_bernoulli_cache):
        return _bernoulli_cache[n]
    with _cache_lock:
        while len(_bernoulli_cache) <= n:
            m = len(_bernoulli_cache)
            acc = Fraction(0)
            for k in range(m):
                acc += comb(m + 1, k) * _bernoulli_cache[k]
            _bernoulli_cache.append(Fraction(-1, m + 1) * acc)
    return _bernoulli_cache[n]


def coeff_c(n: int, m: int) -> Fraction:
    """Exact mixing coefficient C(n, m) = sum_{k=0}^{n} C(m, k) B_k / (1 + m - k).

    In the linear map from a functional decomposition to order-limited
    attributions, a component ``m`` features above the target coalition
    enters with weight C(h, m), where ``h`` is the headroom between the
    coalition size and the attribution order. C(0, m) = 1/(m+1) is the
    even split of an interaction onto its members.

    Calls with m < n are rejected: the defining sum would divide by
    zero at k = m + 1, and no caller has a meaning for that regime.
    """
    if n < 0 or m < 0:
        raise ValueError(f"coeff_c needs n, m >= 0, got ({n}, {m})")
    if m < n:
        raise ValueError(f"coeff_c requires m >= n, got ({n}, {m})")
    total = Fraction(0)
    for k in range(n + 1):
        total += Fraction(comb(m, k)) * bernoulli(k) / (1 + m - k)
    return total


def check_bernoulli_identity(n: int) -> bool:
    """True iff sum_{k=1}^{n} C(n, k) B_k / (n - k + 1) == -1/(n+1), exactly.

    This is the telescoping identity that collapses harmonically
    weighted Bernoulli sums; it underpins the even-split coefficients.
    """
    if n < 1:
        raise ValueError(f"identity is stated for n >= 1, got {n}")
    total = Fraction(0)
    for k in range(1, n + 1):
        total += Fraction(comb(n, k)) * bernoulli(k) / (n - k + 1)
    return total == Fraction(-1, n + 1)


def check_bernoulli_orthogonality(n: int, m: int) -> bool:
    """True iff the two-index Bernoulli sum equals 1 for n == 0 and 0 otherwise.

    The sum is
        sum_{k<=n} sum_{l<=m} C(n,k) C(m,l) (n-k)!(m-l)!/(n+m-k-l+1)!
                              * (-1)^l * B_{k+l}
    evaluated exactly. Its collapse to an indicator in n is what makes
    alternating subset sums of a cumulative table single out exactly
    one component per subset.
    """
    if n < 0 or m < 0:
        raise ValueError(f"orthogonality check needs n, m >= 0, got ({n}, {m})")
    total = Fraction(0)
    for k in range(n + 1):
        for l in range(m + 1):
            term = Fraction(
                comb(n, k) * comb(m, l) * factorial(n - k) * factorial(m - l),
                factorial(n + m - k - l + 1),
            )
            if l % 2:
                term = -term
            total += term * bernoulli(k + l)
    expected = Fraction(1) if n == 0 else Fraction(0)
    return total == expected


@dataclass(frozen=True)
class CoefficientTable:
    """Immutable snapshot of B_0..B_d and C(n, m) for 0 <= n < m <= d."""

    max_order: int
    bernoulli: tuple[Fraction, ...]
    c_coeffs: Mapping[tuple[int, int], Fraction]

    @classmethod
    def build(cls, max_order: int) -> "CoefficientTable":
        if max_order < 0:
            raise ValueError(f"max_order must be >= 0, got {max_order}")
        bern = tuple(bernoulli(k) for k in range(max_order + 1))
        coeffs = {
            (n, m): coeff_c(n, m)
            for m in range(max_order + 1)
            for n in range(m)
        }
        return cls(max_order, bern, MappingProxyType(coeffs))

    def c_float(self, n: int, m: int) -> float:
        """C(n, m) rounded to float64 once, from the exact table."""
        return float(self.c_coeffs[(n, m)])
