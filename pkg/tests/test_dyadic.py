from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CF, F, dyadics, unit_dyadics
from remote_sampling.dyadic import (
    CDyadic,
    CONE,
    Dyadic,
    InsufficientPrecision,
    ONE,
    ZERO,
    approx_product_tree,
    approx_sum,
    ceil_lg,
    clamp,
    clamp_unit,
    cmul,
    truncate,
)


def D(num, den=1):
    return Dyadic.from_fraction(Fraction(num, den))


# -- representation ----------------------------------------------------------------


def test_canonical_form():
    a = Dyadic(12, -4)
    assert (a.mantissa, a.exponent) == (3, -2)
    assert Dyadic(0, 17) == ZERO and ZERO.exponent == 0
    assert Dyadic(6, 0) == Dyadic(3, 1)
    assert hash(Dyadic(6, 0)) == hash(6)
    assert hash(D(3, 4)) == hash(Fraction(3, 4))


def test_from_fraction_rejects_non_dyadic():
    with pytest.raises(ValueError):
        Dyadic.from_fraction(Fraction(1, 3))


def test_json_round_trip():
    for x in [ZERO, ONE, D(-5, 16), Dyadic(123456789, -70), Dyadic(-3, 5)]:
        assert Dyadic.from_json(x.to_json()) == x


@given(dyadics(), dyadics())
def test_arithmetic_matches_fractions(a, b):
    assert F(a + b) == F(a) + F(b)
    assert F(a - b) == F(a) - F(b)
    assert F(a * b) == F(a) * F(b)
    assert (a < b) == (F(a) < F(b))
    assert (a == b) == (F(a) == F(b))


def test_ceil_lg():
    assert [ceil_lg(n) for n in (1, 2, 3, 4, 5, 8, 9)] == [0, 1, 2, 2, 3, 3, 4]


# -- truncation and clamping ----------------------------------------------------


def test_truncate_examples():
    assert truncate(D(3, 4), 1) == D(1, 2)
    assert truncate(D(-5, 16), 2) == D(-1, 4)
    assert truncate(D(5, 8), 10) == D(5, 8)
    with pytest.raises(ValueError):
        truncate(ONE, -1)


@given(dyadics(), st.integers(0, 64))
def test_truncate_properties(x, t):
    y = truncate(x, t)
    assert y.exponent >= -t
    assert abs(F(x) - F(y)) < Fraction(1, 1 << t) or F(x) == F(y)
    assert abs(y) <= abs(x)
    assert y.sign() in (x.sign(), 0)


@given(dyadics(), st.integers(0, 60))
def test_truncation_is_prefix_refinable(x, t):
    # the (t+1)-bit truncation extends the t-bit one by a single bit
    a, b = truncate(x, t), truncate(x, t + 1)
    assert truncate(b, t) == a
    assert abs(F(b) - F(a)) * (1 << (t + 1)) in (0, 1)


def test_clamp_examples():
    assert clamp_unit(ONE + Dyadic(1, -8)) == ONE
    assert clamp_unit(D(1, 2), (0, 1)) == D(1, 2)
    assert clamp_unit(Dyadic(-3), (0, 1)) == ZERO
    assert clamp(Dyadic(-3)) == Dyadic(-1)


# -- complex arithmetic ------------------------------------------------------------


def test_cmul_examples():
    c = CDyadic(D(3, 8), D(-1, 4))
    i = CDyadic(0, 1)
    assert cmul(CONE, c) == c
    assert cmul(i, i) == CDyadic(-1, 0)
    h = D(1, 2)
    assert cmul(CDyadic(h, h), CDyadic(h, -h)) == CDyadic(h, 0)


@given(unit_dyadics(), unit_dyadics(), unit_dyadics(), unit_dyadics())
def test_cmul_exact(a, b, c, d):
    z = cmul(CDyadic(a, b), CDyadic(c, d))
    x = complex(F(a), F(b)) * complex(F(c), F(d))
    assert CF(z) == (F(a) * F(c) - F(b) * F(d), F(a) * F(d) + F(b) * F(c))
    assert abs(complex(z) - x) < 1e-12


# -- precision-loss algebra -------------------------------------------------------------


def _perturb(x: Dyadic, k: int, num: int) -> Dyadic:
    """``x`` moved by ``num / 2**(k + 8)`` with ``|num| <= 2**8``: a k-bit approximation."""
    return x + Dyadic(num, -(k + 8))


errs = st.integers(-256, 256)


@given(unit_dyadics(), unit_dyadics(), st.integers(1, 60), errs, errs)
def test_additive_loss(a, b, k, ea, eb):
    ah, bh = _perturb(a, k, ea), _perturb(b, k, eb)
    assert abs(F(a + b) - F(ah + bh)) <= Fraction(2, 1 << k)


@given(unit_dyadics(), unit_dyadics(), st.integers(1, 60), errs, errs)
def test_multiplicative_loss_with_clamping(a, b, k, ea, eb):
    ah, bh = clamp(_perturb(a, k, ea)), clamp(_perturb(b, k, eb))
    assert abs(F(a * b) - F(ah * bh)) <= Fraction(2, 1 << k)


@settings(max_examples=200)
@given(st.lists(unit_dyadics(40), min_size=4, max_size=4), st.integers(2, 50),
       st.lists(errs, min_size=4, max_size=4))
def test_complex_product_loses_two_bits(parts, k, es):
    a, b, c, d = parts
    ah, bh, ch, dh = (clamp(_perturb(v, k, e)) for v, e in zip(parts, es))
    exact = cmul(CDyadic(a, b), CDyadic(c, d))
    approx = cmul(CDyadic(ah, bh), CDyadic(ch, dh))
    radius = Fraction(4, 1 << k)
    assert abs(F(exact.re) - F(approx.re)) <= radius
    assert abs(F(exact.im) - F(approx.im)) <= radius
    # addition loses at most one bit per part
    s, sh = CDyadic(a, b) + CDyadic(c, d), CDyadic(ah, bh) + CDyadic(ch, dh)
    assert abs(F(s.re) - F(sh.re)) <= Fraction(2, 1 << k)


@st.composite
def unit_disc(draw, bits=30):
    """Complex dyadic with modulus at most 1."""
    while True:
        z = CDyadic(draw(unit_dyadics(bits)), draw(unit_dyadics(bits)))
        if z.abs2() <= ONE:
            return z


@settings(max_examples=200)
@given(st.lists(unit_disc(), min_size=1, max_size=9), st.integers(8, 60), st.data())
def test_product_tree_precision(zs, k, data):
    m = len(zs)
    approx = []
    for z in zs:
        er, ei = data.draw(errs), data.draw(errs)
        approx.append(CDyadic(_perturb(z.re, k, er), _perturb(z.im, k, ei)))
    exact = CONE
    for z in zs:
        exact = exact * z
    got = approx_product_tree(approx, k)
    radius = Fraction(1, 1 << (k - 2 * ceil_lg(m)))
    assert abs(F(got.re) - F(exact.re)) <= radius
    assert abs(F(got.im) - F(exact.im)) <= radius
    assert -1 <= F(got.re) <= 1 and -1 <= F(got.im) <= 1


def test_product_tree_examples():
    z = CDyadic(ONE + Dyadic(1, -12), D(-1, 2))
    assert approx_product_tree([z], 10) == CDyadic(ONE, D(-1, 2))
    assert approx_product_tree([CONE] * 4, 10) == CONE
    with pytest.raises(InsufficientPrecision):
        approx_product_tree([CONE] * 5, 5)
    with pytest.raises(ValueError):
        approx_product_tree([], 10)


def test_product_tree_truncated_unit_values():
    import cmath
    import random

    rng = random.Random(7)
    for _ in range(50):
        angles = [rng.uniform(0, 6.3) for _ in range(4)]
        true = [CDyadic(Dyadic.from_float(cmath.rect(1, a).real), Dyadic.from_float(cmath.rect(1, a).imag))
                for a in angles]
        true = [z if z.abs2() <= ONE else CDyadic(truncate(z.re, 50), truncate(z.im, 50)) for z in true]
        exact = CONE
        for z in true:
            exact = exact * z
        got = approx_product_tree([z.truncated(40) for z in true], 40)
        assert abs(F(got.re) - F(exact.re)) <= Fraction(1, 1 << 36)
        assert abs(F(got.im) - F(exact.im)) <= Fraction(1, 1 << 36)


@given(st.lists(st.tuples(unit_dyadics(40), unit_dyadics(40), errs, errs), min_size=1, max_size=20),
       st.integers(1, 60))
def test_sum_precision(items, k):
    exact = [CDyadic(a, b) for a, b, _, _ in items]
    approx = [CDyadic(_perturb(a, k, ea), _perturb(b, k, eb)) for a, b, ea, eb in items]
    total, k_out = approx_sum(approx, k)
    assert k_out == k - ceil_lg(len(items))
    true = sum((CF(z)[0] for z in exact), Fraction(0)), sum((CF(z)[1] for z in exact), Fraction(0))
    assert abs(F(total.re) - true[0]) <= Fraction(1, 1 << k) * (1 << ceil_lg(len(items)))
    assert abs(F(total.im) - true[1]) <= Fraction(2) ** -k_out
