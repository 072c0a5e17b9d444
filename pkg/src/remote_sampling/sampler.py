"""Rejection samplers driven by certified probability approximations.

``vn_sample`` is plain von Neumann rejection with exactly known
probabilities.  ``sample_modified`` only ever sees ``t``-bit approximations
``p_X(t)`` and asks its hooks for one more bit of precision whenever the
accept/reject decision cannot be certified yet.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Protocol, Sequence

from .approx import ApproxProbabilityTable, Proposal, build_proposal
from .dyadic import Dyadic
from .randomness import LazyUniform, ky_sample

DEFAULT_BUDGET = 128
DEFAULT_UNIFORM_BITS = 256


class Decision(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    NEED_MORE_BITS = "need_more_bits"


class SamplingBudgetExceeded(RuntimeError):
    """Precision grew past ``t0 + budget``; approximations are probably broken."""


class RefinementHooks(Protocol):
    def get_table(self, t0: int) -> ApproxProbabilityTable: ...

    def refine(self, x: int, t: int) -> Dyadic: ...


def decide(u_t: Dyadic, t: int, p_t: Dyadic, cq: Dyadic) -> Decision:
    """Accept/reject test with ``t`` known digits of ``U``.

    Accept when ``(U[t] + 2**-t) Cq_X <= p_X(t) - 2**-t``, reject when
    ``U[t] Cq_X > p_X(t) + 2**-t``.
    """
    # integer form of both tests, everything scaled by 2**(t + f)
    ce, pe = cq.exponent, p_t.exponent + t
    f = max(0, -ce, -pe)
    if u_t.exponent + t < 0:
        raise ValueError(f"U[t] must have at most {t} fractional bits")
    a = u_t.mantissa << (u_t.exponent + t)
    c = cq.mantissa << (ce + f)
    p = p_t.mantissa << (pe + f)
    one = 1 << f
    if (a + 1) * c <= p - one:
        return Decision.ACCEPT
    if a * c > p + one:
        return Decision.REJECT
    return Decision.NEED_MORE_BITS


def decide_uniform(u: Dyadic, t: int, p_t: Dyadic, cq: Dyadic) -> Decision:
    """Same test when ``U`` itself is treated as known exactly."""
    eps = Dyadic(1, -t)
    ucq = u * cq
    if ucq <= p_t - eps:
        return Decision.ACCEPT
    if ucq > p_t + eps:
        return Decision.REJECT
    return Decision.NEED_MORE_BITS


@dataclass
class RejectionState:
    t0: int
    x: int = -1
    u: LazyUniform = field(default_factory=LazyUniform)
    t: int = 0
    rounds: int = 0
    loop_t: list = field(default_factory=list)


def step_discrete(state: RejectionState, p_t: Dyadic, cq: Dyadic) -> Decision:
    """One decision of the discrete-randomness loop; ``state.u`` must hold ``state.t`` bits."""
    return decide(state.u.value(state.t), state.t, p_t, cq)


@dataclass
class SampleStats:
    outcome: int = -1
    t0: int = 0
    C: Dyadic | None = None
    rounds: int = 0  # S
    loop_t: list = field(default_factory=list)  # T_1..T_S
    proposal_bits: list = field(default_factory=list)  # V_1..V_S
    random_bits: int = 0  # R
    refinements: int = 0

    def to_json(self) -> dict:
        return {
            "outcome": self.outcome,
            "t0": self.t0,
            "C": float(self.C) if self.C is not None else None,
            "S": self.rounds,
            "T": list(self.loop_t),
            "V": list(self.proposal_bits),
            "R": self.random_bits,
            "refinements": self.refinements,
        }


def vn_sample(p: Sequence, q: Proposal, src) -> tuple[int, SampleStats]:
    """Von Neumann rejection with exact ``p`` (dyadics or fractions).

    ``U`` is still drawn one bit at a time; digits are added until
    ``U C q_X`` is certainly below or above ``p_X``.
    """
    stats = SampleStats(t0=q.t0, C=q.C)
    start = src.count
    while True:
        stats.rounds += 1
        x, v = ky_sample(q, src)
        stats.proposal_bits.append(v)
        px = Fraction(p[x]) if not isinstance(p[x], Dyadic) else p[x].to_fraction()
        cq = q.scaled(x).to_fraction()
        u = LazyUniform()
        t = 0
        while True:
            t += 1
            u_t = u.extend(src, t).to_fraction()
            if (u_t + Fraction(1, 1 << t)) * cq <= px:
                stats.loop_t.append(t)
                stats.outcome = x
                stats.random_bits = src.count - start
                return x, stats
            if u_t * cq > px:
                stats.loop_t.append(t)
                break


def sample_round(
    hooks: RefinementHooks,
    src,
    proposal: Proposal,
    table: ApproxProbabilityTable,
    *,
    model: str = "discrete",
    budget: int = DEFAULT_BUDGET,
    uniform_bits: int = DEFAULT_UNIFORM_BITS,
) -> tuple[Decision, int, int, int]:
    """One proposal and its accept/reject loop.

    Returns ``(verdict, x, t, v)``: the final verdict, the proposed outcome,
    the precision at which the loop stopped and the bits spent on the
    proposal.  Rounds are independent, so a full run is a sequence of
    rejected rounds followed by one accepted round.
    """
    t0 = table.t
    discrete = model == "discrete"
    x, v = ky_sample(proposal, src)
    on_propose = getattr(hooks, "on_propose", None)
    if on_propose is not None:
        on_propose(x)
    cq = proposal.scaled(x)
    p_t = table.values[x]
    u = LazyUniform()
    u.extend(src, t0 if discrete else uniform_bits)
    u_exact = None if discrete else u.value()
    t = t0
    while True:
        if discrete:
            verdict = decide(u.value(t), t, p_t, cq)
        else:
            verdict = decide_uniform(u_exact, t, p_t, cq)
        if verdict is not Decision.NEED_MORE_BITS:
            return verdict, x, t, v
        if t >= t0 + budget:
            raise SamplingBudgetExceeded(f"outcome {x}: no decision by t={t}")
        t += 1
        if discrete:
            u.extend(src, t)
        p_t = hooks.refine(x, t)


def sample_modified(
    hooks: RefinementHooks,
    src,
    t0: int,
    *,
    model: str = "discrete",
    budget: int = DEFAULT_BUDGET,
    uniform_bits: int = DEFAULT_UNIFORM_BITS,
) -> tuple[int, SampleStats]:
    """Rejection sampling from ``t``-bit approximations.

    ``model="discrete"`` draws one digit of ``U`` per value of ``t``;
    ``model="uniform"`` draws ``uniform_bits`` digits up front and then
    treats ``U`` as exact.  ``hooks.refine(x, t)`` must return a ``t``-bit
    approximation of ``p_x``; ``hooks.on_propose(x)``, if present, is called
    for every proposal.
    """
    if model not in ("discrete", "uniform"):
        raise ValueError(f"unknown randomness model {model!r}")
    table = hooks.get_table(t0)
    proposal = getattr(hooks, "proposal_for", build_proposal)(table)
    stats = SampleStats(t0=t0, C=proposal.C)
    start = src.count
    while True:
        stats.rounds += 1
        verdict, x, t, v = sample_round(hooks, src, proposal, table, model=model, budget=budget,
                                        uniform_bits=uniform_bits)
        stats.proposal_bits.append(v)
        stats.loop_t.append(t)
        stats.refinements += t - t0
        if verdict is Decision.ACCEPT:
            stats.outcome = x
            stats.random_bits = src.count - start
            return x, stats


class TableHooks:
    """Hooks backed by a function ``approx(x, t)`` computed locally (no communication)."""

    def __init__(self, approx, n: int, outcomes=None):
        self.approx = approx
        self.n = n
        self.outcomes = tuple(outcomes) if outcomes is not None else (n,)
        self.calls = 0

    def get_table(self, t0: int) -> ApproxProbabilityTable:
        return ApproxProbabilityTable(t0, tuple(self.approx(x, t0) for x in range(self.n)), self.outcomes)

    def refine(self, x: int, t: int) -> Dyadic:
        self.calls += 1
        return self.approx(x, t)
