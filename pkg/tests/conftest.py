"""Shared strategies and independent oracles for the test suite."""
from __future__ import annotations

import itertools
from fractions import Fraction

from hypothesis import strategies as st

from remote_sampling.dyadic import CDyadic, Dyadic


def F(x) -> Fraction:
    """Dyadic (or int/Fraction) to Fraction."""
    return x.to_fraction() if isinstance(x, Dyadic) else Fraction(x)


def CF(z: CDyadic) -> tuple[Fraction, Fraction]:
    return F(z.re), F(z.im)


def dyadics(max_bits: int = 80, lo: int = -4, hi: int = 4):
    """Dyadic rationals in [lo, hi] with up to ``max_bits`` fractional bits."""
    @st.composite
    def build(draw):
        e = draw(st.integers(0, max_bits))
        m = draw(st.integers(lo << e, hi << e))
        return Dyadic(m, -e)
    return build()


def unit_dyadics(max_bits: int = 80):
    return dyadics(max_bits, -1, 1)


# -- naive full-tensor Born oracle, exact over Fractions ---------------------------


def _cmul(a, b):
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def _kron(a, b):
    """Standard Kronecker product: ``a``'s index is the more significant digit."""
    na, nb = len(a), len(b)
    return [[_cmul(a[i // nb][j // nb], b[i % nb][j % nb]) for j in range(na * nb)]
            for i in range(na * nb)]


def frac_matrix(mat):
    return [[CF(e) for e in row] for row in mat]


def naive_tensor(mats):
    """Materialized M_x with the first party as the least significant index digit."""
    out = frac_matrix(mats[-1])
    for mat in reversed(mats[:-1]):
        out = _kron(out, frac_matrix(mat))
    return out


def naive_born(scenario, x) -> Fraction:
    """Tr(rho M_x) by explicit matrix product; asserts the result is real."""
    mx = naive_tensor([p.element(xi) for p, xi in zip(scenario.povms, x)])
    rho = frac_matrix(scenario.rho)
    d = len(rho)
    re = im = Fraction(0)
    for r in range(d):
        for c in range(d):
            a, b = _cmul(rho[r][c], mx[c][r])
            re += a
            im += b
    assert im == 0
    return re


def naive_outcomes(outcomes):
    """Outcome tuples in flat order (first party varies fastest)."""
    return [tuple(reversed(x)) for x in itertools.product(*[range(n) for n in reversed(outcomes)])]


def naive_distribution(scenario):
    return [naive_born(scenario, x) for x in naive_outcomes(scenario.outcomes)]


# -- acceptance verdicts ---------------------------------------------------------------

ACCEPTANCE: dict = {}
ACCEPTANCE_COUNT = 10


def record_verdict(number: int, title: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in range(1, ACCEPTANCE_COUNT + 1):
        line = ACCEPTANCE.get(number, f"[FAIL] criterion {number:2d}: no verdict (errored or not run)")
        terminalreporter.write_line(line)
