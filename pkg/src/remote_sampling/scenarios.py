"""Scenario generators (GHZ, random) and the JSON scenario file format.

File format::

    {"name": "...", "dims": [2, 2], "outcomes": [2, 2],
     "rho": [[entry, ...], ...],
     "povms": [povm, ...]}

An ``entry`` is ``[re, im]`` (or a bare real component).  A component is an
exact dyadic ``{"bits": "-0x3", "exp": -2}`` (value ``-3 * 2**-2``), an
integer, or a decimal string; decimal strings that are not dyadic are
truncated at the ingestion precision and the scenario is flagged inexact.
A ``povm`` is either a list of matrices or ``{"projective": {"theta": "1/3",
"phi": "0"}}``: the analytic qubit projector pair at polar angle
``theta * pi`` and azimuth ``phi * pi``.
"""
from __future__ import annotations

import json
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import mpmath
import numpy as np

from .dyadic import CDyadic, Dyadic, ZERO, truncate
from .quantum import AnalyticPovm, Povm, Scenario

INGEST_BITS = 64


# -- GHZ --------------------------------------------------------------------------


def _angle(a) -> tuple[Fraction, Fraction]:
    """``theta`` or ``(theta, phi)`` in units of pi, as exact fractions."""
    if isinstance(a, (tuple, list)):
        theta, phi = a
    else:
        theta, phi = a, 0
    return Fraction(theta), Fraction(phi)


def ghz_rho(m: int):
    d = 1 << m
    half = CDyadic(Dyadic(1, -1))
    zero = CDyadic(0)
    corners = {(0, 0), (0, d - 1), (d - 1, 0), (d - 1, d - 1)}
    return tuple(tuple(half if (r, c) in corners else zero for c in range(d)) for r in range(d))


@lru_cache(maxsize=None)
def _projector_values(theta: Fraction, phi: Fraction, bits: int):
    """Truncated (a, b_re, b_im) for ``[[a, b], [conj b, 1 - a]]``, each within 2^-bits."""
    with mpmath.workprec(bits + 20):
        th = mpmath.pi * theta.numerator / theta.denominator
        ph = mpmath.pi * phi.numerator / phi.denominator
        a = (1 + mpmath.cos(th)) / 2
        s = mpmath.sin(th) / 2
        vals = (a, s * mpmath.cos(ph), -s * mpmath.sin(ph))
        return tuple(_mp_trunc(v, bits) for v in vals)


def _mp_trunc(v, bits: int) -> Dyadic:
    # the working precision leaves 20 guard bits, so flooring the scaled value is a truncation
    scaled = mpmath.ldexp(v, bits)
    mag = int(mpmath.floor(abs(scaled)))
    return Dyadic(-mag if scaled < 0 else mag, -bits)


def _projector_pair(theta: Fraction, phi: Fraction, bits: int):
    a, br, bi = _projector_values(theta, phi, bits)
    one = Dyadic(1)
    # shrink the off-diagonal until a(1-a) >= |b|^2, so M0 is exactly PSD
    ulp = Dyadic(1, -bits)
    while br * br + bi * bi > a * (one - a):
        if abs(br) >= abs(bi):
            br = br - ulp if br > 0 else br + ulp
        else:
            bi = bi - ulp if bi > 0 else bi + ulp
    m0 = ((CDyadic(a), CDyadic(br, bi)), (CDyadic(br, -bi), CDyadic(one - a)))
    m1 = ((CDyadic(one - a), CDyadic(-br, -bi)), (CDyadic(-br, bi), CDyadic(a)))
    return m0, m1


def analytic_projector(theta, phi=0) -> AnalyticPovm:
    """Projector pair whose entries are only available to a requested precision."""
    theta, phi = Fraction(theta), Fraction(phi)

    def entry(j: int, r: int, c: int, bits: int) -> CDyadic:
        # one spare bit absorbs the evaluation error on top of the truncation
        bits += 1
        a, br, bi = _projector_values(theta, phi, bits)
        if r == c:
            diag = a if (r == 0) == (j == 0) else None
            if diag is None:
                # 1 - a: truncate the complement directly to stay within 2^-bits
                return CDyadic(_one_minus(theta, bits))
            return CDyadic(diag)
        sign = 1 if j == 0 else -1
        re, im = br, (bi if r == 0 else -bi)
        return CDyadic(re * sign, im * sign)

    return AnalyticPovm(2, 2, entry, label=f"projective(theta={theta}pi, phi={phi}pi)")


@lru_cache(maxsize=None)
def _one_minus(theta: Fraction, bits: int) -> Dyadic:
    with mpmath.workprec(bits + 20):
        th = mpmath.pi * theta.numerator / theta.denominator
        return _mp_trunc((1 - mpmath.cos(th)) / 2, bits)


def gen_ghz(m: int, angles: Sequence | None = None, *, exact: bool = True, bits: int = 64) -> Scenario:
    """m-party GHZ state measured by qubit projectors at the given angles.

    ``angles[i]`` is ``theta`` or ``(theta, phi)`` in units of pi; ``theta = 0``
    is the Z basis.  With ``exact=True`` the projector entries are truncated
    to ``bits`` bits (kept exactly PSD and complete); otherwise each party's
    POVM is analytic and computed to whatever precision is requested.
    """
    if m < 2:
        raise ValueError("GHZ needs at least 2 parties")
    angles = [0] * m if angles is None else list(angles)
    if len(angles) != m:
        raise ValueError(f"{len(angles)} angles for {m} parties")
    povms = []
    for a in angles:
        theta, phi = _angle(a)
        if exact:
            povms.append(Povm(_projector_pair(theta, phi, bits)))
        else:
            povms.append(analytic_projector(theta, phi))
    name = f"ghz{m}" + ("" if all(_angle(a) == (0, 0) for a in angles) else "-angles")
    return Scenario((2,) * m, (2,) * m, ghz_rho(m), tuple(povms), name=name)


# -- random -----------------------------------------------------------------------


def _to_dyadic_hermitian(a: np.ndarray, bits: int) -> list[list[CDyadic]]:
    d = a.shape[0]
    out = [[None] * d for _ in range(d)]
    for r in range(d):
        out[r][r] = CDyadic(truncate(Dyadic.from_float(float(a[r, r].real)), bits))
        for c in range(r + 1, d):
            re = truncate(Dyadic.from_float(float(a[r, c].real)), bits)
            im = truncate(Dyadic.from_float(float(a[r, c].imag)), bits)
            out[r][c] = CDyadic(re, im)
            out[c][r] = CDyadic(re, -im)
    return out


def _random_psd(rng, d: int, rank: int) -> np.ndarray:
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    return g @ g.conj().T


def gen_random(
    m: int,
    dims: Sequence[int],
    outcomes: Sequence[int],
    seed: int,
    *,
    bits: int = 40,
    mix: float = 2.0 ** -6,
) -> Scenario:
    """Random valid scenario, identical for identical arguments.

    rho is a random low-rank state mixed with a little of the maximally mixed
    state; each POVM normalises random PSD parts to sum to the identity, again
    mixed with a little white noise.  Entries are truncated to ``bits`` bits
    and the last diagonal entry of rho / the last POVM element are fixed so
    that the trace and completeness hold exactly.
    """
    dims = tuple(int(x) for x in dims)
    outcomes = tuple(int(x) for x in outcomes)
    if len(dims) != m or len(outcomes) != m:
        raise ValueError("dims and outcomes need one entry per party")
    if min(dims) < 2 or min(outcomes) < 2:
        raise ValueError("dims and outcomes must be at least 2")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), m, *dims, *outcomes]))
    d = int(np.prod(dims))
    sigma = _random_psd(rng, d, int(rng.integers(1, d + 1)))
    sigma /= np.trace(sigma).real
    sigma = (1 - mix) * sigma + mix * np.eye(d) / d
    rho = _to_dyadic_hermitian(sigma, bits)
    rest = sum((rho[r][r].re for r in range(d - 1)), ZERO)
    rho[d - 1][d - 1] = CDyadic(Dyadic(1) - rest)

    povms = []
    for di, ni in zip(dims, outcomes):
        parts = [_random_psd(rng, di, int(rng.integers(1, di + 1))) for _ in range(ni)]
        # a small full-rank share keeps the sum invertible when the parts are low rank
        parts = [a + 0.05 * np.trace(a).real / di * np.eye(di) for a in parts]
        total = sum(parts)
        w, v = np.linalg.eigh(total)
        inv_sqrt = v @ np.diag(w ** -0.5) @ v.conj().T
        elems = []
        for j in range(ni - 1):
            e = inv_sqrt @ parts[j] @ inv_sqrt
            e = (1 - mix) * (e + e.conj().T) / 2 + mix * np.eye(di) / ni
            elems.append(_to_dyadic_hermitian(e, bits))
        last = [[CDyadic(1 if r == c else 0) for c in range(di)] for r in range(di)]
        for el in elems:
            for r in range(di):
                for c in range(di):
                    last[r][c] = last[r][c] - el[r][c]
        elems.append(last)
        povms.append(Povm(tuple(tuple(tuple(row) for row in el) for el in elems)))
    name = f"random-m{m}-seed{seed}"
    return Scenario(dims, outcomes, tuple(tuple(row) for row in rho), tuple(povms), name=name)


# -- file format ------------------------------------------------------------------


def _dump_component(x: Dyadic) -> dict:
    return {"bits": hex(x.mantissa), "exp": x.exponent}


def _dump_matrix(mat) -> list:
    return [[[_dump_component(e.re), _dump_component(e.im)] for e in row] for row in mat]


class _Ingest:
    def __init__(self, bits: int):
        self.bits = bits
        self.inexact = False

    def component(self, obj) -> Dyadic:
        if isinstance(obj, dict):
            if "bits" in obj:
                return Dyadic(int(obj["bits"], 0), int(obj.get("exp", 0)))
            return Dyadic.from_json(obj)
        if isinstance(obj, bool):
            raise ValueError(f"not a number: {obj!r}")
        if isinstance(obj, int):
            return Dyadic(obj)
        if isinstance(obj, str):
            value = Fraction(obj.strip())
        elif isinstance(obj, float):
            value = Fraction(obj)
        else:
            raise ValueError(f"cannot read {obj!r} as a number")
        den = value.denominator
        if den & (den - 1) == 0:
            return Dyadic.from_fraction(value)
        self.inexact = True
        return Dyadic.from_rational_truncated(value, self.bits)

    def entry(self, obj) -> CDyadic:
        if isinstance(obj, (list, tuple)):
            if len(obj) != 2:
                raise ValueError(f"complex entry must be [re, im], got {obj!r}")
            return CDyadic(self.component(obj[0]), self.component(obj[1]))
        return CDyadic(self.component(obj))

    def matrix(self, rows) -> tuple:
        return tuple(tuple(self.entry(e) for e in row) for row in rows)


def scenario_to_json(s: Scenario) -> dict:
    povms = []
    for p in s.povms:
        if p.exact:
            povms.append([_dump_matrix(el) for el in p.elements])
        elif p.label.startswith("projective("):
            theta, phi = _analytic_angles(p)
            povms.append({"projective": {"theta": str(theta), "phi": str(phi)}})
        else:
            raise ValueError(f"cannot serialize analytic POVM {p.label!r}")
    return {
        "name": s.name,
        "dims": list(s.dims),
        "outcomes": list(s.outcomes),
        "rho": _dump_matrix(s.rho),
        "povms": povms,
    }


def _analytic_angles(p: AnalyticPovm) -> tuple[Fraction, Fraction]:
    inner = p.label[len("projective("):-1]
    parts = dict(kv.split("=") for kv in inner.split(", "))
    return Fraction(parts["theta"].removesuffix("pi")), Fraction(parts["phi"].removesuffix("pi"))


def scenario_from_json(obj: dict, ingest_bits: int = INGEST_BITS) -> Scenario:
    ing = _Ingest(ingest_bits)
    povms = []
    for p in obj["povms"]:
        if isinstance(p, dict) and "projective" in p:
            spec = p["projective"]
            povms.append(analytic_projector(Fraction(spec["theta"]), Fraction(spec.get("phi", "0"))))
        else:
            povms.append(Povm(tuple(ing.matrix(el) for el in p)))
    rho = ing.matrix(obj["rho"])
    return Scenario(
        tuple(obj["dims"]), tuple(obj["outcomes"]), rho, tuple(povms),
        inexact=ing.inexact, name=obj.get("name", ""),
    )


def dump_scenario(s: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_json(s), fh, indent=1)
        fh.write("\n")


def load_scenario(path, ingest_bits: int = INGEST_BITS) -> Scenario:
    with open(path) as fh:
        return scenario_from_json(json.load(fh), ingest_bits)
