"""Custodian-side parameter sources and Hermitian packing.

A ``d x d`` Hermitian matrix is sent as exactly ``d**2`` real scalars:
walking the upper triangle row by row, a diagonal entry contributes its real
part and an off-diagonal entry its real then imaginary part.

Each scalar lies in ``[-1, 1]`` and travels as a sign bit plus ``k``
magnitude bits.  The magnitude bits are the first ``k`` binary digits of
``|x|``; for ``|x| = 1`` the expansion ``0.111...`` is used, so ``k`` bits
always suffice and one more digit always extends the previous ones.
"""
from __future__ import annotations

from ..dyadic import CDyadic, Dyadic
from ..quantum import AnalyticPovm, Matrix, Povm


def pack_hermitian(mat: Matrix) -> list[Dyadic]:
    out = []
    d = len(mat)
    for r in range(d):
        for c in range(r, d):
            e = mat[r][c]
            out.append(e.re)
            if c != r:
                out.append(e.im)
    return out


def unpack_hermitian(scalars, d: int) -> Matrix:
    if len(scalars) != d * d:
        raise ValueError(f"{len(scalars)} scalars cannot describe a {d}x{d} Hermitian matrix")
    rows = [[None] * d for _ in range(d)]
    it = iter(scalars)
    zero = Dyadic(0)
    for r in range(d):
        for c in range(r, d):
            re = next(it)
            if c == r:
                rows[r][c] = CDyadic(re, zero)
            else:
                im = next(it)
                rows[r][c] = CDyadic(re, im)
                rows[c][r] = CDyadic(re, -im)
    return tuple(tuple(row) for row in rows)


def wire_truncation(x: Dyadic, k: int) -> tuple[int, int]:
    """``(negative, magnitude)`` of the ``k``-digit prefix of ``|x|``'s expansion."""
    m = x.mantissa
    neg = 1 if m < 0 else 0
    if m < 0:
        m = -m
    e = x.exponent + k
    mag = m << e if e >= 0 else m >> -e
    top = (1 << k) - 1
    return neg, (mag if mag <= top else top)


def wire_rounding(x: Dyadic, k: int) -> tuple[int, int]:
    """``(negative, magnitude)`` of ``x`` rounded to the nearest multiple of ``2**-k``."""
    m = x.mantissa
    neg = 1 if m < 0 else 0
    if m < 0:
        m = -m
    e = x.exponent + k
    if e >= 0:
        mag = m << e
    else:
        mag = ((m >> (-e - 1)) + 1) >> 1
    top = (1 << k) - 1
    mag = mag if mag <= top else top
    return (neg if mag else 0), mag


class ExactDyadicSource:
    """Custodian data known exactly; can produce prefix-consistent truncations."""

    truncation_capable = True

    def __init__(self, povm: Povm):
        self.povm = povm
        self.dim = povm.dim
        self.count = povm.count
        self._scalars = [pack_hermitian(el) for el in povm.elements]
        self._memo: dict = {}
        self.payload_memo: dict = {}  # k -> encoded initial payload, reused across runs

    def scalars(self, j: int) -> list[Dyadic]:
        return self._scalars[j]

    def truncation(self, j: int, k: int) -> list[tuple[int, int]]:
        key = ("t", j, k)
        out = self._memo.get(key)
        if out is None:
            out = self._memo[key] = [wire_truncation(x, k) for x in self._scalars[j]]
        return out

    def approximation(self, j: int, k: int) -> list[tuple[int, int]]:
        key = ("a", j, k)
        out = self._memo.get(key)
        if out is None:
            out = self._memo[key] = [wire_rounding(x, k) for x in self._scalars[j]]
        return out


class FunctionSource:
    """Entries computable to any precision but with no way to certify truncations."""

    truncation_capable = False

    def __init__(self, povm: AnalyticPovm):
        self.povm = povm
        self.dim = povm.dim
        self.count = povm.count
        self._memo: dict = {}
        self.payload_memo: dict = {}  # k -> encoded initial payload, reused across runs

    def approximation(self, j: int, k: int) -> list[tuple[int, int]]:
        key = (j, k)
        out = self._memo.get(key)
        if out is None:
            # evaluation error 2^-(k+2) plus rounding error 2^-(k+1) stays below 2^-k
            mat = self.povm.approx_element(j, k + 2)
            out = self._memo[key] = [wire_rounding(x, k) for x in pack_hermitian(mat)]
        return out

    def truncation(self, j: int, k: int):
        raise TypeError("approximation-only source cannot produce truncations")


class LoggedSource:
    """Wraps a source and records every access (used to audit who reads POVM data)."""

    def __init__(self, inner, log: list, owner: str):
        self._inner = inner
        self._log = log
        self._owner = owner
        self.truncation_capable = inner.truncation_capable
        self.dim = inner.dim
        self.count = inner.count

    def truncation(self, j, k):
        self._log.append((self._owner, "truncation", j, k))
        return self._inner.truncation(j, k)

    def approximation(self, j, k):
        self._log.append((self._owner, "approximation", j, k))
        return self._inner.approximation(j, k)


def source_for(povm):
    return ExactDyadicSource(povm) if povm.exact else FunctionSource(povm)
