"""Leader-side probability approximations and the rejection proposal."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import prod
from typing import Sequence

from .dyadic import (
    Dyadic,
    InsufficientPrecision,
    ONE,
    ZERO,
    approx_product_tree,
    ceil_lg,
    clamp,
)
from .quantum import Matrix, digit_table


class ImaginaryResidualTooLarge(ArithmeticError):
    """The assembled trace has an imaginary part outside ``[-2**-t, 2**-t]``.

    This cannot happen with proper POVMs; it signals bad custodian data or a
    computation/communication error.
    """

    def __init__(self, x, t, residual):
        self.x = x
        self.t = t
        self.residual = residual
        super().__init__(f"outcome {x}: imaginary part {float(residual):.3e} exceeds 2^-{t}")


def required_entry_precision(t: int, d: int, m: int) -> int:
    """Bits per POVM entry needed for a ``t``-bit approximation of any ``p_x``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return t + 1 + ceil_lg(d * d) + 2 * ceil_lg(m)


def assemble_probability(
    entries: Sequence[Sequence[Matrix]],
    rho: Matrix,
    x: Sequence[int],
    t: int,
    k: int | None = None,
) -> Dyadic:
    """Certified ``t``-bit approximation of ``Tr(rho M_x)`` from approximate entries.

    ``entries[i][j]`` is custodian ``i``'s approximation of ``M_ij``; ``k`` is
    its precision in bits (defaults to the minimum that certifies ``t``).
    Every term ``rho_rc * prod_i (M_{i x_i})_{c_i r_i}`` goes through the
    clamped product tree, the terms are summed exactly, the imaginary part is
    checked against ``2**-t`` and the real part is clamped to ``[0, 1]``.
    """
    mats = [entries[i][xi] for i, xi in enumerate(x)]
    dims = tuple(len(mat) for mat in mats)
    m = len(mats)
    d = prod(dims)
    needed = required_entry_precision(t, d, m)
    if k is None:
        k = needed
    elif k < needed:
        raise InsufficientPrecision(f"entries carry {k} bits, {needed} needed for t={t}")
    digits = digit_table(dims)
    re = ZERO
    im = ZERO
    for r, row in enumerate(rho):
        rdig = digits[r]
        for c, rho_rc in enumerate(row):
            if not rho_rc.re and not rho_rc.im:
                continue
            cdig = digits[c]
            factors = [mats[i][cdig[i]][rdig[i]] for i in range(m)]
            term = rho_rc * approx_product_tree(factors, k)
            re = re + term.re
            im = im + term.im
    if abs(im) > Dyadic(1, -t):
        raise ImaginaryResidualTooLarge(tuple(x), t, im)
    return clamp(re, ZERO, ONE)


@dataclass(frozen=True)
class ApproxProbabilityTable:
    """``t``-bit approximations of every ``p_x``, indexed by flat outcome index."""

    t: int
    values: tuple
    outcomes: tuple  # outcome counts n_1..n_m, for index <-> tuple mapping

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        for v in self.values:
            if not ZERO <= v <= ONE:
                raise ValueError(f"table value {v} outside [0, 1]")

    def __getitem__(self, flat: int) -> Dyadic:
        return self.values[flat]

    def __len__(self) -> int:
        return len(self.values)

    def as_dict(self) -> dict:
        table = digit_table(tuple(self.outcomes))
        return {table[f]: v for f, v in enumerate(self.values)}


def build_table(entries, rho: Matrix, outcomes: Sequence[int], t: int, k: int | None = None) -> ApproxProbabilityTable:
    outcomes = tuple(outcomes)
    vals = [assemble_probability(entries, rho, x, t, k) for x in digit_table(outcomes)]
    return ApproxProbabilityTable(t, tuple(vals), outcomes)


class Proposal:
    """Rejection proposal ``q_x = (p_x(t0) + 2**-t0) / C``.

    ``q_x`` itself is generally not dyadic, so only the scaled weights
    ``C q_x`` (dyadic) and ``C`` are stored; comparisons multiply through
    by ``C``.
    """

    __slots__ = ("t0", "weights", "C", "int_weights", "int_total", "_ky")

    def __init__(self, t0: int, weights: Sequence[Dyadic]):
        self.t0 = t0
        self.weights = tuple(weights)
        self.C = sum(self.weights, ZERO)
        # integer numerators over a common power of two, for the DDG walk
        e = min((w.exponent for w in self.weights if w), default=0)
        self.int_weights = tuple(w.mantissa << (w.exponent - e) if w else 0 for w in self.weights)
        self.int_total = sum(self.int_weights)
        self._ky = None

    @property
    def n(self) -> int:
        return len(self.weights)

    def scaled(self, flat: int) -> Dyadic:
        """``C q_x`` (exact dyadic)."""
        return self.weights[flat]

    def q(self, flat: int) -> Fraction:
        return Fraction(self.int_weights[flat], self.int_total)

    def q_vector(self) -> list[Fraction]:
        return [self.q(f) for f in range(self.n)]

    def ddg(self):
        if self._ky is None:
            from .randomness import DdgTree

            self._ky = DdgTree(self.int_weights)
        return self._ky

    def __repr__(self):
        return f"Proposal(t0={self.t0}, C={float(self.C):.6g}, n={self.n})"


def build_proposal(table: ApproxProbabilityTable) -> Proposal:
    cushion = Dyadic(1, -table.t)
    return Proposal(table.t, [v + cushion for v in table.values])


def proposal_from_probabilities(p: Sequence[Dyadic], t0: int) -> Proposal:
    """Proposal over ``t0``-bit truncations of an exactly known vector (oracle use)."""
    from .dyadic import truncate

    return Proposal(t0, [truncate(v, t0) + Dyadic(1, -t0) for v in p])
