"""Quantum scenario model and the Born-rule oracle.

Matrices are tuples of rows of :class:`CDyadic`.  Indices follow the
mixed-radix convention ``r = r_1 + r_2 d_1 + r_3 d_1 d_2 + ...`` so the first
party's index is the least significant digit.  Outcomes are 0-based tuples.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import prod
from typing import Callable, Sequence

import numpy as np

from .dyadic import CDyadic, Dyadic, ZERO, ceil_lg, clamp

Matrix = tuple  # tuple[tuple[CDyadic, ...], ...]

DEFAULT_TOLERANCE = Fraction(1, 1 << 30)


class ScenarioError(ValueError):
    """Structural problem with a scenario (wrong shapes, counts...)."""


def as_matrix(rows) -> Matrix:
    return tuple(tuple(e if isinstance(e, CDyadic) else CDyadic(e) for e in row) for row in rows)


def identity(d: int) -> Matrix:
    one = CDyadic(1)
    zero = CDyadic(0)
    return tuple(tuple(one if r == c else zero for c in range(d)) for r in range(d))


# -- mixed radix ----------------------------------------------------------------


def decompose(flat: int, dims: Sequence[int]) -> tuple[int, ...]:
    """Digits ``(r_1, ..., r_m)`` of ``flat`` with the first digit least significant."""
    total = prod(dims)
    if not 0 <= flat < total:
        raise IndexError(f"index {flat} outside [0, {total})")
    digits = []
    for d in dims:
        flat, r = divmod(flat, d)
        digits.append(r)
    return tuple(digits)


def compose(digits: Sequence[int], dims: Sequence[int]) -> int:
    if len(digits) != len(dims):
        raise IndexError("digit count does not match dims")
    flat = 0
    scale = 1
    for r, d in zip(digits, dims):
        if not 0 <= r < d:
            raise IndexError(f"digit {r} outside [0, {d})")
        flat += r * scale
        scale *= d
    return flat


@lru_cache(maxsize=64)
def digit_table(dims: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    return tuple(decompose(f, dims) for f in range(prod(dims)))


# -- POVMs --------------------------------------------------------------------------


@dataclass(frozen=True)
class Povm:
    """POVM with exact dyadic entries: ``elements[j]`` is a Hermitian ``d x d`` matrix."""

    elements: tuple
    exact = True

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(as_matrix(e) for e in self.elements))

    @property
    def dim(self) -> int:
        return len(self.elements[0])

    @property
    def count(self) -> int:
        return len(self.elements)

    def element(self, j: int) -> Matrix:
        return self.elements[j]

    def approx_element(self, j: int, bits: int) -> Matrix:
        return self.elements[j]


@dataclass(frozen=True)
class AnalyticPovm:
    """POVM whose entries can only be computed to a requested precision.

    ``entry(j, r, c, bits)`` must return a :class:`CDyadic` whose real and
    imaginary parts are each within ``2**-bits`` of the true entry.
    """

    dim: int
    count: int
    entry: Callable[[int, int, int, int], CDyadic] = field(compare=False)
    label: str = ""
    exact = False

    def approx_element(self, j: int, bits: int) -> Matrix:
        return tuple(
            tuple(self.entry(j, r, c, bits) for c in range(self.dim)) for r in range(self.dim)
        )

    def element(self, j: int) -> Matrix:
        raise TypeError("analytic POVM entries have no exact dyadic value")


@dataclass(frozen=True)
class Scenario:
    """``m`` parties with dimensions ``dims``, outcome counts ``outcomes``,
    joint density matrix ``rho`` (``d x d``) and one POVM per custodian."""

    dims: tuple
    outcomes: tuple
    rho: Matrix
    povms: tuple
    inexact: bool = False  # some ingested values were rounded
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "outcomes", tuple(int(n) for n in self.outcomes))
        object.__setattr__(self, "rho", as_matrix(self.rho))
        object.__setattr__(self, "povms", tuple(self.povms))

    @property
    def m(self) -> int:
        return len(self.dims)

    @property
    def d(self) -> int:
        return prod(self.dims)

    @property
    def n(self) -> int:
        return prod(self.outcomes)

    @property
    def exact(self) -> bool:
        return all(p.exact for p in self.povms)

    def outcome(self, flat: int) -> tuple[int, ...]:
        return decompose(flat, self.outcomes)

    def flat(self, x: Sequence[int]) -> int:
        return compose(x, self.outcomes)

    def all_outcomes(self) -> list[tuple[int, ...]]:
        return list(digit_table(self.outcomes))


# -- validation ------------------------------------------------------------------


@dataclass
class Violation:
    check: str
    where: str
    residual: float

    def __str__(self):
        return f"{self.check} at {self.where}: residual {self.residual:.3e}"


@dataclass
class ValidationReport:
    structural: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)  # check -> max residual seen
    tolerance: float = float(DEFAULT_TOLERANCE)

    @property
    def ok(self) -> bool:
        return not self.structural and not self.violations

    def note(self, check: str, where: str, residual: Fraction, tol: Fraction):
        r = float(residual)
        self.residuals[check] = max(self.residuals.get(check, 0.0), r)
        if residual > tol:
            self.violations.append(Violation(check, where, r))

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "tolerance": self.tolerance,
            "structural": list(self.structural),
            "violations": [vars(v) for v in self.violations],
            "max_residuals": self.residuals,
        }


def _frac_matrix(mat: Matrix) -> list[list[tuple[Fraction, Fraction]]]:
    return [[(e.re.to_fraction(), e.im.to_fraction()) for e in row] for row in mat]


def _det(a: list[list[complex]]):
    # exact Gaussian elimination over complex rationals (pairs of Fractions)
    n = len(a)
    a = [row[:] for row in a]
    det = (Fraction(1), Fraction(0))

    def mul(x, y):
        return (x[0] * y[0] - x[1] * y[1], x[0] * y[1] + x[1] * y[0])

    def div(x, y):
        den = y[0] * y[0] + y[1] * y[1]
        return ((x[0] * y[0] + x[1] * y[1]) / den, (x[1] * y[0] - x[0] * y[1]) / den)

    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != (0, 0)), None)
        if piv is None:
            return (Fraction(0), Fraction(0))
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = (-det[0], -det[1])
        det = mul(det, a[col][col])
        for r in range(col + 1, n):
            f = div(a[r][col], a[col][col])
            if f == (0, 0):
                continue
            a[r] = [
                (a[r][c][0] - (f[0] * a[col][c][0] - f[1] * a[col][c][1]),
                 a[r][c][1] - (f[0] * a[col][c][1] + f[1] * a[col][c][0]))
                for c in range(n)
            ]
    return det


def psd_residual(mat: Matrix) -> Fraction:
    """How far ``mat`` is from positive semi-definite (0 when it is).

    Small matrices use every principal minor exactly; larger ones fall back
    to a Hermitian eigenvalue solve in floating point.
    """
    d = len(mat)
    if d <= 4:
        fm = _frac_matrix(mat)
        worst = Fraction(0)
        for size in range(1, d + 1):
            for idx in itertools.combinations(range(d), size):
                sub = [[fm[r][c] for c in idx] for r in idx]
                det = _det(sub)[0]
                if det < 0:
                    worst = max(worst, -det)
        return worst
    arr = np.array([[complex(e) for e in row] for row in mat])
    arr = (arr + arr.conj().T) / 2
    lo = float(np.linalg.eigvalsh(arr).min())
    return Fraction(max(0.0, -lo))


def _hermitian_residual(mat: Matrix) -> Fraction:
    worst = Fraction(0)
    d = len(mat)
    for r in range(d):
        for c in range(r, d):
            a, b = mat[r][c], mat[c][r]
            diff = max(abs(a.re - b.re), abs(a.im + b.im))
            worst = max(worst, diff.to_fraction())
    return worst


def _norm_residual(mat: Matrix) -> Fraction:
    worst = Fraction(0)
    for row in mat:
        for e in row:
            excess = e.abs2() - 1
            if excess > 0:
                worst = max(worst, excess.to_fraction())
    return worst


def _sylvester_residual(mat: Matrix) -> Fraction:
    worst = Fraction(0)
    d = len(mat)
    for r in range(d):
        for c in range(d):
            excess = mat[r][c].abs2() - mat[r][r].re * mat[c][c].re
            if excess > 0:
                worst = max(worst, excess.to_fraction())
    return worst


def _check_matrix(report, label, mat, tol, *, unit_diag=True):
    report.note("hermitian", label, _hermitian_residual(mat), tol)
    report.note("psd", label, psd_residual(mat), tol)
    report.note("entry_norm", label, _norm_residual(mat), tol)
    report.note("sylvester", label, _sylvester_residual(mat), tol)
    if unit_diag:
        worst = Fraction(0)
        for r in range(len(mat)):
            v = mat[r][r].re
            if v < 0:
                worst = max(worst, (-v).to_fraction())
            elif v > 1:
                worst = max(worst, (v - 1).to_fraction())
        report.note("diagonal_range", label, worst, tol)


def validate(s: Scenario, tolerance: Fraction = DEFAULT_TOLERANCE, analytic_bits: int = 64) -> ValidationReport:
    """Check shapes (fatal) and numeric invariants (residuals against ``tolerance``)."""
    tol = Fraction(tolerance)
    report = ValidationReport(tolerance=float(tol))
    if s.m < 2:
        report.structural.append(f"need at least 2 parties, got {s.m}")
    if len(s.outcomes) != s.m or len(s.povms) != s.m:
        report.structural.append("dims, outcomes and povms must have one entry per party")
    for i, d in enumerate(s.dims):
        if d < 2:
            report.structural.append(f"party {i}: dimension {d} < 2")
    for i, n in enumerate(s.outcomes):
        if n < 1:
            report.structural.append(f"party {i}: outcome count {n} < 1")
    d = s.d
    if len(s.rho) != d or any(len(row) != d for row in s.rho):
        report.structural.append(f"rho must be {d}x{d}")
    for i, (povm, di, ni) in enumerate(zip(s.povms, s.dims, s.outcomes)):
        if povm.count != ni:
            report.structural.append(f"povm {i}: {povm.count} elements, expected {ni}")
        if povm.dim != di:
            report.structural.append(f"povm {i}: dimension {povm.dim}, expected {di}")
        if povm.exact:
            for j, el in enumerate(povm.elements):
                if len(el) != di or any(len(row) != di for row in el):
                    report.structural.append(f"povm {i} element {j} is not {di}x{di}")
    if report.structural:
        return report

    _check_matrix(report, "rho", s.rho, tol)
    trace = sum((s.rho[r][r].re for r in range(d)), ZERO)
    report.note("unit_trace", "rho", abs(trace - 1).to_fraction(), tol)
    for i, povm in enumerate(s.povms):
        di = s.dims[i]
        total = [[CDyadic(0)] * di for _ in range(di)]
        for j in range(povm.count):
            el = povm.approx_element(j, analytic_bits)
            _check_matrix(report, f"povm[{i}][{j}]", el, tol)
            for r in range(di):
                for c in range(di):
                    total[r][c] = total[r][c] + el[r][c]
        worst = Fraction(0)
        for r in range(di):
            for c in range(di):
                e = total[r][c] - CDyadic(1 if r == c else 0)
                worst = max(worst, abs(e.re).to_fraction(), abs(e.im).to_fraction())
        report.note("completeness", f"povm[{i}]", worst, tol)
    return report


# -- Born rule ------------------------------------------------------------------


def tensor_entry(s: Scenario, x: Sequence[int], r: int, c: int) -> CDyadic:
    """Entry ``(M_x)_{rc}`` as an exact product of one entry per party."""
    rd = decompose(r, s.dims)
    cd = decompose(c, s.dims)
    out = CDyadic(1)
    for i, povm in enumerate(s.povms):
        out = out * povm.element(x[i])[rd[i]][cd[i]]
    return out


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]`` of dyadics; ``lo == hi`` for exact values."""

    lo: Dyadic
    hi: Dyadic

    @property
    def exact(self) -> bool:
        return self.lo == self.hi

    @property
    def mid(self) -> Dyadic:
        return (self.lo + self.hi).ldexp(-1)

    @property
    def width(self) -> Dyadic:
        return self.hi - self.lo

    def __contains__(self, v) -> bool:
        return self.lo <= v <= self.hi

    def __float__(self) -> float:
        return float(self.mid)


def _trace_sum(s: Scenario, mats: list) -> CDyadic:
    dims = s.dims
    digits = digit_table(dims)
    re = ZERO
    im = ZERO
    for r, row in enumerate(s.rho):
        rdig = digits[r]
        for c, rho_rc in enumerate(row):
            if not rho_rc.re and not rho_rc.im:
                continue
            cdig = digits[c]
            term = rho_rc
            for i, mat in enumerate(mats):
                term = term * mat[cdig[i]][rdig[i]]
                if not term.re and not term.im:
                    break
            re = re + term.re
            im = im + term.im
    return CDyadic(re, im)


def born_probability(s: Scenario, x: Sequence[int], t_oracle: int = 64) -> Interval:
    """``p_x = Tr(rho M_x)`` through the entry-product double sum.

    For exact dyadic scenarios the result is exact (``lo == hi``).  With
    analytic POVMs the entries are evaluated at enough bits that the returned
    interval has width at most ``2**-t_oracle`` and contains ``p_x``.
    """
    x = tuple(x)
    if s.exact:
        val = _trace_sum(s, [p.element(x[i]) for i, p in enumerate(s.povms)])
        if val.im:
            raise ArithmeticError(f"trace of rho M_x has imaginary part {val.im}")
        v = val.re
        return Interval(v, v)
    # error of the exact double sum over approximated entries is below
    # 2 * sqrt2 * m * d^2 * 2**-bits; this choice keeps it under 2**-(t+1)
    bits = t_oracle + 3 + ceil_lg(s.m) + ceil_lg(s.d * s.d)
    mats = [p.approx_element(x[i], bits) if not p.exact else p.element(x[i])
            for i, p in enumerate(s.povms)]
    val = _trace_sum(s, mats)
    rad = Dyadic(1, -(t_oracle + 1))
    lo = clamp(val.re - rad, 0, 1)
    hi = clamp(val.re + rad, 0, 1)
    return Interval(lo, hi)


def born_distribution(s: Scenario, t_oracle: int = 64) -> list[Interval]:
    """Oracle probabilities for every outcome, indexed by flat outcome index."""
    return [born_probability(s, x, t_oracle) for x in s.all_outcomes()]


def exact_distribution(s: Scenario) -> list[Dyadic]:
    if not s.exact:
        raise TypeError("scenario has analytic entries; use born_distribution")
    return [iv.lo for iv in born_distribution(s)]
