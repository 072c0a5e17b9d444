"""Exact dyadic rationals and complex numbers built from them.

A :class:`Dyadic` is ``mantissa * 2**exponent`` with an arbitrary-precision
integer mantissa.  Addition, subtraction, multiplication and comparison are
exact; nothing is ever rounded unless :func:`truncate` or a clamp is called
explicitly.
"""
from __future__ import annotations

import sys
from fractions import Fraction
from typing import Iterable, Sequence

__all__ = [
    "Dyadic",
    "CDyadic",
    "InsufficientPrecision",
    "ceil_lg",
    "truncate",
    "clamp",
    "clamp_unit",
    "cmul",
    "approx_product_tree",
    "approx_sum",
    "ZERO",
    "ONE",
    "CZERO",
    "CONE",
]

_EXP_MIN = -(1 << 63)
_EXP_MAX = (1 << 63) - 1
_HASH_MOD = sys.hash_info.modulus


class InsufficientPrecision(ValueError):
    """Raised when a precision budget cannot certify any output bit."""


def ceil_lg(n: int) -> int:
    """Return ``ceil(log2(n))`` for a positive integer ``n``."""
    if n < 1:
        raise ValueError(f"ceil_lg needs n >= 1, got {n}")
    return (n - 1).bit_length()


def _norm(mantissa: int, exponent: int) -> Dyadic:
    obj = object.__new__(Dyadic)
    if mantissa:
        tz = (mantissa & -mantissa).bit_length() - 1
        if tz:
            mantissa >>= tz
            exponent += tz
        if not _EXP_MIN <= exponent <= _EXP_MAX:
            raise OverflowError(f"dyadic exponent {exponent} outside int64 range")
    else:
        exponent = 0
    object.__setattr__(obj, "mantissa", mantissa)
    object.__setattr__(obj, "exponent", exponent)
    return obj


def _odd(mantissa: int, exponent: int) -> Dyadic:
    # caller guarantees canonical form already (odd mantissa or zero with exp 0)
    obj = object.__new__(Dyadic)
    object.__setattr__(obj, "mantissa", mantissa)
    object.__setattr__(obj, "exponent", exponent)
    return obj


class Dyadic:
    """Exact binary fixed-point number ``mantissa * 2**exponent``.

    Instances are immutable and kept in canonical form: the mantissa is odd,
    or zero with exponent 0.
    """

    __slots__ = ("mantissa", "exponent")

    mantissa: int
    exponent: int

    def __new__(cls, mantissa: int = 0, exponent: int = 0) -> Dyadic:
        if isinstance(mantissa, Dyadic):
            return mantissa.ldexp(exponent)
        if not isinstance(mantissa, int) or not isinstance(exponent, int):
            raise TypeError("Dyadic(mantissa, exponent) takes integers")
        return _norm(int(mantissa), int(exponent))

    def __setattr__(self, name, value):
        raise AttributeError("Dyadic is immutable")

    def __reduce__(self):
        return (Dyadic, (self.mantissa, self.exponent))

    # -- construction helpers ------------------------------------------------

    @classmethod
    def from_fraction(cls, value: Fraction | int) -> Dyadic:
        """Exact conversion; raises ``ValueError`` for non-dyadic rationals."""
        value = Fraction(value)
        den = value.denominator
        if den & (den - 1):
            raise ValueError(f"{value} is not a dyadic rational")
        return _norm(value.numerator, -(den.bit_length() - 1))

    @classmethod
    def from_float(cls, value: float) -> Dyadic:
        num, den = float(value).as_integer_ratio()
        return _norm(num, -(den.bit_length() - 1))

    @classmethod
    def from_rational_truncated(cls, value: Fraction, t: int) -> Dyadic:
        """``t``-bit truncation of an arbitrary rational (sign-magnitude floor)."""
        value = Fraction(value)
        mag = abs(value.numerator << t) // value.denominator if t >= 0 else (
            abs(value.numerator) // (value.denominator << -t)
        )
        return _norm(-mag if value < 0 else mag, -t)

    def ldexp(self, k: int) -> Dyadic:
        """Return ``self * 2**k``."""
        if not self.mantissa:
            return self
        return _norm(self.mantissa, self.exponent + k)

    # -- conversions -----------------------------------------------------------

    def to_fraction(self) -> Fraction:
        if self.exponent >= 0:
            return Fraction(self.mantissa << self.exponent)
        return Fraction(self.mantissa, 1 << -self.exponent)

    def __float__(self) -> float:
        try:
            return float(self.to_fraction())
        except OverflowError:
            return float("inf") if self.mantissa > 0 else float("-inf")

    def __int__(self) -> int:
        # truncation toward zero, like int(float)
        if self.exponent >= 0:
            return self.mantissa << self.exponent
        mag = abs(self.mantissa) >> -self.exponent
        return -mag if self.mantissa < 0 else mag

    def scaled(self, t: int) -> int:
        """Return ``self * 2**t`` as an integer; it must be one exactly."""
        e = self.exponent + t
        if e >= 0:
            return self.mantissa << e
        if self.mantissa & ((1 << -e) - 1):
            raise ValueError(f"{self!r} has more than {t} fractional bits")
        return self.mantissa >> -e

    def frac_bits(self) -> int:
        """Number of fractional bits in the shortest binary expansion."""
        return max(0, -self.exponent)

    def sign(self) -> int:
        return (self.mantissa > 0) - (self.mantissa < 0)

    # -- arithmetic ----------------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Dyadic):
            if isinstance(other, int):
                other = _norm(other, 0)
            else:
                return NotImplemented
        a, ea = self.mantissa, self.exponent
        b, eb = other.mantissa, other.exponent
        if not a:
            return other
        if not b:
            return self
        if ea == eb:
            return _norm(a + b, ea)
        if ea > eb:
            return _norm((a << (ea - eb)) + b, eb)
        return _norm(a + (b << (eb - ea)), ea)

    __radd__ = __add__

    def __neg__(self) -> Dyadic:
        return _odd(-self.mantissa, self.exponent)

    def __pos__(self) -> Dyadic:
        return self

    def __abs__(self) -> Dyadic:
        return self if self.mantissa >= 0 else _odd(-self.mantissa, self.exponent)

    def __sub__(self, other):
        if isinstance(other, int):
            other = _norm(other, 0)
        elif not isinstance(other, Dyadic):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        if isinstance(other, int):
            return _norm(other, 0) - self
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, Dyadic):
            # odd * odd is odd, so the product is already canonical
            if not self.mantissa or not other.mantissa:
                return ZERO
            e = self.exponent + other.exponent
            if not _EXP_MIN <= e <= _EXP_MAX:
                raise OverflowError(f"dyadic exponent {e} outside int64 range")
            return _odd(self.mantissa * other.mantissa, e)
        if isinstance(other, int):
            return _norm(self.mantissa * other, self.exponent)
        return NotImplemented

    __rmul__ = __mul__

    # -- comparison ----------------------------------------------------------------

    def _cmp(self, other) -> int:
        if isinstance(other, int):
            other = _norm(other, 0)
        elif isinstance(other, Fraction):
            diff = self.to_fraction() - other
            return (diff > 0) - (diff < 0)
        elif not isinstance(other, Dyadic):
            raise TypeError
        a, ea = self.mantissa, self.exponent
        b, eb = other.mantissa, other.exponent
        if ea > eb:
            a <<= ea - eb
        elif eb > ea:
            b <<= eb - ea
        return (a > b) - (a < b)

    def __eq__(self, other):
        if isinstance(other, Dyadic):
            return self.mantissa == other.mantissa and self.exponent == other.exponent
        if isinstance(other, (int, Fraction)):
            return self._cmp(other) == 0
        return NotImplemented

    def __lt__(self, other):
        try:
            return self._cmp(other) < 0
        except TypeError:
            return NotImplemented

    def __le__(self, other):
        try:
            return self._cmp(other) <= 0
        except TypeError:
            return NotImplemented

    def __gt__(self, other):
        try:
            return self._cmp(other) > 0
        except TypeError:
            return NotImplemented

    def __ge__(self, other):
        try:
            return self._cmp(other) >= 0
        except TypeError:
            return NotImplemented

    def __hash__(self) -> int:
        # agrees with hash(Fraction) / hash(int) for equal values
        m = self.mantissa
        h = (abs(m) % _HASH_MOD) * pow(2, self.exponent, _HASH_MOD) % _HASH_MOD
        if m < 0:
            h = -h
        return -2 if h == -1 else h

    def __bool__(self) -> bool:
        return self.mantissa != 0

    def __repr__(self) -> str:
        if self.exponent >= 0:
            return f"Dyadic({self.mantissa << self.exponent})"
        return f"Dyadic({self.mantissa}, {self.exponent})"

    def __str__(self) -> str:
        return str(self.to_fraction())

    # -- serialization -------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "sign": self.sign(),
            "magnitude_bits": hex(abs(self.mantissa)),
            "exponent": self.exponent,
        }

    @classmethod
    def from_json(cls, obj: dict) -> Dyadic:
        mag = int(obj["magnitude_bits"], 16)
        sign = int(obj["sign"])
        if sign not in (-1, 0, 1) or (sign == 0) != (mag == 0):
            raise ValueError(f"inconsistent sign/magnitude in {obj!r}")
        return _norm(sign * mag, int(obj["exponent"]))


ZERO = _odd(0, 0)
ONE = _odd(1, 0)


def truncate(x: Dyadic, t: int) -> Dyadic:
    """``t``-bit truncation ``sign(x) * floor(|x| 2**t) / 2**t``."""
    if t < 0:
        raise ValueError("precision must be non-negative")
    e = x.exponent
    if e >= -t:
        return x
    m = x.mantissa
    mag = (m if m > 0 else -m) >> (-t - e)
    return _norm(mag if m > 0 else -mag, -t)


def clamp(x: Dyadic, lo: Dyadic | int = -1, hi: Dyadic | int = 1) -> Dyadic:
    if x < lo:
        return lo if isinstance(lo, Dyadic) else _norm(lo, 0)
    if x > hi:
        return hi if isinstance(hi, Dyadic) else _norm(hi, 0)
    return x


def clamp_unit(x: Dyadic, interval: tuple = (-1, 1)) -> Dyadic:
    """Snap ``x`` into ``interval`` (``(-1, 1)`` for entries, ``(0, 1)`` for probabilities)."""
    return clamp(x, interval[0], interval[1])


_MINUS_ONE = _odd(-1, 0)


class CDyadic:
    """Exact complex number ``re + im*i`` with dyadic parts."""

    __slots__ = ("re", "im")

    re: Dyadic
    im: Dyadic

    def __init__(self, re: Dyadic | int = ZERO, im: Dyadic | int = ZERO):
        object.__setattr__(self, "re", re if isinstance(re, Dyadic) else Dyadic(re))
        object.__setattr__(self, "im", im if isinstance(im, Dyadic) else Dyadic(im))

    def __setattr__(self, name, value):
        raise AttributeError("CDyadic is immutable")

    def __reduce__(self):
        return (CDyadic, (self.re, self.im))

    def __add__(self, other: CDyadic) -> CDyadic:
        return CDyadic(self.re + other.re, self.im + other.im)

    def __sub__(self, other: CDyadic) -> CDyadic:
        return CDyadic(self.re - other.re, self.im - other.im)

    def __neg__(self) -> CDyadic:
        return CDyadic(-self.re, -self.im)

    def __mul__(self, other):
        if isinstance(other, CDyadic):
            a, b, c, d = self.re, self.im, other.re, other.im
            return CDyadic(a * c - b * d, a * d + b * c)
        if isinstance(other, (Dyadic, int)):
            return CDyadic(self.re * other, self.im * other)
        return NotImplemented

    __rmul__ = __mul__

    def conj(self) -> CDyadic:
        return CDyadic(self.re, -self.im)

    def abs2(self) -> Dyadic:
        """Exact squared modulus."""
        return self.re * self.re + self.im * self.im

    def clamped(self, lo=_MINUS_ONE, hi=ONE) -> CDyadic:
        re, im = self.re, self.im
        cre = clamp(re, lo, hi)
        cim = clamp(im, lo, hi)
        if cre is re and cim is im:
            return self
        return CDyadic(cre, cim)

    def truncated(self, t: int) -> CDyadic:
        return CDyadic(truncate(self.re, t), truncate(self.im, t))

    def is_zero(self) -> bool:
        return not self.re and not self.im

    def __eq__(self, other):
        if isinstance(other, CDyadic):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (Dyadic, int)):
            return self.re == other and not self.im
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.re, self.im))

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __repr__(self) -> str:
        return f"CDyadic({self.re!r}, {self.im!r})"

    def to_json(self) -> list:
        return [self.re.to_json(), self.im.to_json()]


CZERO = CDyadic(ZERO, ZERO)
CONE = CDyadic(ONE, ZERO)


def cmul(a: CDyadic, b: CDyadic) -> CDyadic:
    """Exact product ``(ac - bd) + (ad + bc)i``."""
    return a * b


def approx_product_tree(factors: Sequence[CDyadic], k: int) -> CDyadic:
    """Product of ``k``-bit approximations of unit-bounded complex numbers.

    The factors are multiplied pairwise up a binary tree padded with exact
    ones to a power-of-two width; real and imaginary parts are clamped to
    ``[-1, 1]`` at every level.  The result approximates the true product to
    ``k - 2*ceil_lg(len(factors))`` bits.
    """
    m = len(factors)
    if m == 0:
        raise ValueError("empty product")
    levels = ceil_lg(m)
    if k < 2 * levels:
        raise InsufficientPrecision(
            f"{m} factors at {k} bits: need at least {2 * levels} bits"
        )
    layer = [f.clamped() for f in factors]
    layer.extend([CONE] * ((1 << levels) - m))
    while len(layer) > 1:
        layer = [(layer[i] * layer[i + 1]).clamped() for i in range(0, len(layer), 2)]
    return layer[0]


def approx_sum(values: Iterable[CDyadic], k: int) -> tuple[CDyadic, int]:
    """Exact sum of ``k``-bit approximations and the precision it certifies."""
    values = list(values)
    if not values:
        return CZERO, k
    re = ZERO
    im = ZERO
    for v in values:
        re = re + v.re
        im = im + v.im
    return CDyadic(re, im), k - ceil_lg(len(values))
