"""Closed-form cost and efficiency bounds of the protocol, evaluated exactly.

Quantities that are integers or rationals come back as ``int`` /
``Fraction``; only those involving a logarithm or an entropy are floats.
"""
from __future__ import annotations

from fractions import Fraction
from math import log2, prod
from typing import Sequence

from .dyadic import ceil_lg


def _lg_terms(dims: Sequence[int]) -> int:
    """``ceil(2 lg d) + 2 ceil(lg m)``."""
    d = prod(dims)
    return ceil_lg(d * d) + 2 * ceil_lg(len(dims))


def setup_bits(t0: int, dims: Sequence[int], outcomes: Sequence[int]) -> int:
    """delta(t0): bits for all initial truncations."""
    return (t0 + 2 + _lg_terms(dims)) * sum(n * d * d for n, d in zip(outcomes, dims))


def round_bits(dims: Sequence[int]) -> int:
    """gamma = m + sum d_i^2: one truncation-mode refinement round."""
    return len(dims) + sum(d * d for d in dims)


def fresh_round_bits(t: int, dims: Sequence[int]) -> int:
    """gamma(t) = m + (t + 2 + ceil(2 lg d) + 2 ceil(lg m)) sum d_i^2.

    Cost of the approximation-mode round whose result is p_X(t).
    """
    return len(dims) + (t + 2 + _lg_terms(dims)) * sum(d * d for d in dims)


def mixed_round_bits(t: int, dims: Sequence[int], fresh: Sequence[bool]) -> int:
    """Round cost when only the custodians flagged in ``fresh`` send fresh approximations.

    Equals ``round_bits`` with no flags and ``fresh_round_bits`` with all flags.
    """
    width = t + 2 + _lg_terms(dims)
    return len(dims) + sum((width if f else 1) * d * d for d, f in zip(dims, fresh))


def rejection_constant_upper(t0: int, n: int) -> Fraction:
    """1 + 2^(1-t0) n."""
    return 1 + Fraction(2 * n, 1 << t0)


def mean_loop_bound(t0: int, model: str) -> Fraction:
    """E(T) <= t0 + 3 with an exact uniform, t0 + 3 + 2^-t0 with random bits."""
    if model == "uniform":
        return Fraction(t0 + 3)
    return t0 + 3 + Fraction(1, 1 << t0)


def tail_bound(s: int, t0: int, model: str) -> Fraction:
    """Upper bound on P(T > s) used in the proofs of the E(T) bounds."""
    if model == "uniform":
        if s <= t0:
            return Fraction(1)
        return min(Fraction(1), Fraction(2) ** (t0 + 1 - s))
    if s <= t0 + 1:
        return Fraction(1)
    return min(Fraction(1), Fraction(2) ** (t0 + 1 - s) + Fraction(2) ** (1 - s))


def expected_bits_bound(t0: int, dims, outcomes, model: str = "discrete") -> Fraction:
    """delta(t0) + E(T - t0 bound) * (1 + 2^(1-t0) n) * gamma, truncation mode."""
    n = prod(outcomes)
    extra = mean_loop_bound(t0, model) - t0
    return setup_bits(t0, dims, outcomes) + extra * rejection_constant_upper(t0, n) * round_bits(dims)


def tradeoff_bound(dims, outcomes, model: str = "discrete") -> Fraction:
    """Closed form of the truncation-mode E(Z) bound at t0 = ceil(lg n).

    ``(ceil lg n + ceil 2lg d + 2 ceil lg m + 2) sum n_i d_i^2`` plus
    ``9 gamma`` (exact uniform) or ``3 (3 + 1/n) gamma`` (random bits).
    """
    n = prod(outcomes)
    left = (ceil_lg(n) + _lg_terms(dims) + 2) * sum(k * d * d for k, d in zip(outcomes, dims))
    factor = Fraction(9) if model == "uniform" else 3 * (3 + Fraction(1, n))
    return left + factor * round_bits(dims)


def expected_bits_bound_fresh(t0: int, dims, outcomes, model: str = "discrete", horizon: int = 256) -> Fraction:
    """Approximation-mode E(Z) bound by Wald's identity.

    ``delta(t0) + (1 + 2^(1-t0) n) sum_{t > t0} gamma(t) P(T >= t)``, with the
    tail bound above; terms past ``horizon`` are below 2^-200 and dropped
    after adding a generous remainder.
    """
    n = prod(outcomes)
    total = Fraction(0)
    for t in range(t0 + 1, t0 + horizon):
        total += fresh_round_bits(t, dims) * tail_bound(t - 1, t0, model)
    # remainder: gamma(t) grows linearly while the tail halves each step
    total += Fraction(1, 1 << 100)
    return setup_bits(t0, dims, outcomes) + rejection_constant_upper(t0, n) * total


def entropy(q: Sequence) -> float:
    return -sum(float(x) * log2(float(x)) for x in q if x)


def proposal_bits_bound(q: Sequence) -> float:
    """Knuth-Yao: E(V) <= 2 + H(q)."""
    return 2 + entropy(q)


def random_bits_bound(t0: int, n: int) -> float:
    """E(R) <= (1 + 2^(1-t0) n)(lg n + t0 + 5 + 2^-t0)."""
    return float(rejection_constant_upper(t0, n)) * (log2(n) + t0 + 5 + 2.0 ** -t0)
