import random
from fractions import Fraction
from math import sqrt

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import F, dyadics
from remote_sampling import bounds
from remote_sampling.approx import Proposal, proposal_from_probabilities
from remote_sampling.dyadic import Dyadic, ONE, ZERO, clamp, truncate
from remote_sampling.quantum import exact_distribution
from remote_sampling.randomness import BitSource, LazyUniform, ScriptedBits
from remote_sampling.sampler import (
    Decision,
    RejectionState,
    SamplingBudgetExceeded,
    TableHooks,
    decide,
    decide_uniform,
    sample_modified,
    step_discrete,
    vn_sample,
)
from remote_sampling.scenarios import gen_ghz, gen_random


def oracle_decide(u_t: Fraction, t: int, p_t: Fraction, cq: Fraction) -> Decision:
    eps = Fraction(1, 1 << t)
    if (u_t + eps) * cq <= p_t - eps:
        return Decision.ACCEPT
    if u_t * cq > p_t + eps:
        return Decision.REJECT
    return Decision.NEED_MORE_BITS


def truncation_hooks(p):
    return TableHooks(lambda x, t: truncate(p[x], t), len(p))


@settings(max_examples=500)
@given(st.integers(0, 30), st.data(), dyadics(40, 0, 1), dyadics(40, 0, 3))
def test_decide_matches_rational_evaluation(t, data, p_t, cq):
    u = Dyadic(data.draw(st.integers(0, (1 << t) - 1)), -t)
    assert decide(u, t, p_t, cq) == oracle_decide(F(u), t, F(p_t), F(cq))


def test_decide_rejects_overlong_prefix():
    with pytest.raises(ValueError):
        decide(Dyadic(1, -5), 3, ONE, ONE)


def test_decide_point_mass_example():
    t0 = 2
    cq = ONE + Dyadic(1, -t0)
    for t in range(t0, 12):
        for a in range(1 << t):
            u = Dyadic(a, -t)
            accept = (F(u) + Fraction(1, 1 << t)) * F(cq) <= 1 - Fraction(1, 1 << t)
            got = decide(u, t, ONE, cq)
            assert (got is Decision.ACCEPT) == accept
            if got is Decision.REJECT:
                assert F(u) * F(cq) > 1 + Fraction(1, 1 << t)


def test_step_discrete_and_uniform_variants():
    state = RejectionState(t0=3)
    state.u = LazyUniform.from_bits([0, 0, 1])
    state.t = 3
    assert step_discrete(state, Dyadic(1, -1), ONE) is Decision.ACCEPT
    assert decide_uniform(Dyadic(7, -3), 3, Dyadic(1, -1), ONE) is Decision.REJECT
    assert decide_uniform(Dyadic(1, -1), 3, Dyadic(1, -1), ONE) is Decision.NEED_MORE_BITS


@settings(max_examples=400)
@given(st.integers(1, 16), dyadics(30, 0, 1), st.integers(0, 5), st.data())
def test_coupling_with_exact_test(t, p, t0, data):
    """Accept/reject with t-bit data never contradicts the exact test ``U Cq <= p``."""
    cq = truncate(p, t0) + Dyadic(1, -t0)
    err = data.draw(st.integers(-(1 << 8), 1 << 8))
    p_t = clamp(p + Dyadic(err, -(t + 8)), ZERO, ONE)
    u = Dyadic(data.draw(st.integers(0, (1 << t) - 1)), -t)
    verdict = decide(u, t, p_t, cq)
    if verdict is Decision.ACCEPT:
        # every completion U < U[t] + 2^-t passes
        assert (F(u) + Fraction(1, 1 << t)) * F(cq) <= F(p)
    elif verdict is Decision.REJECT:
        assert F(u) * F(cq) > F(p)
    else:
        band = F(u) * F(cq) - F(p_t)
        assert -(1 + F(cq)) * Fraction(1, 1 << t) < band <= Fraction(1, 1 << t)


# -- full samplers ----------------------------------------------------------------------


def test_point_mass_accepts_first_proposal():
    p = [ZERO, ONE, ZERO, ZERO]
    src = BitSource(1)
    for _ in range(200):
        x, st_ = sample_modified(truncation_hooks(p), src, 2)
        assert x == 1 and st_.outcome == 1
    # weights (1/4, 5/4, 1/4, 1/4): C = 2, so the first proposal is accepted half the time
    hits = 0
    for _ in range(400):
        _, st_ = sample_modified(truncation_hooks(p), src, 2)
        hits += st_.rounds == 1
    assert abs(hits - 200) < 4 * 10


def test_budget_exceeded():
    zero = [ZERO, ZERO]
    for model in ("discrete", "uniform"):
        with pytest.raises(SamplingBudgetExceeded):
            sample_modified(truncation_hooks(zero), ScriptedBits([0] * 2000), 1, model=model, budget=20)


def test_unknown_model():
    with pytest.raises(ValueError):
        sample_modified(truncation_hooks([ONE]), BitSource(0), 0, model="gaussian")


def test_stats_accounting():
    s = gen_random(2, (2, 2), (2, 2), 1)
    p = exact_distribution(s)
    src = BitSource(9)
    for _ in range(300):
        hooks = truncation_hooks(p)
        before = src.count
        x, stt = sample_modified(hooks, src, 2)
        assert stt.random_bits == src.count - before
        assert stt.refinements == hooks.calls == sum(t - 2 for t in stt.loop_t)
        assert stt.rounds == len(stt.loop_t) == len(stt.proposal_bits)
        assert all(t >= 2 for t in stt.loop_t)


@pytest.mark.parametrize("model", ["discrete", "uniform"])
def test_bell_distribution_and_loop_bound(model):
    s = gen_ghz(2, [Fraction(1, 3), Fraction(1, 8)])
    p = exact_distribution(s)
    t0 = 2
    src = BitSource(31)
    n = 20_000
    counts = [0] * 4
    loops, rounds = [], []
    hooks = truncation_hooks(p)
    for _ in range(n):
        x, stt = sample_modified(hooks, src, t0, model=model)
        counts[x] += 1
        loops.extend(stt.loop_t)
        rounds.append(stt.rounds)
    tv = 0.5 * sum(abs(c / n - float(q)) for c, q in zip(counts, p))
    assert tv < 0.02
    mean_t = sum(loops) / len(loops)
    sd = sqrt(sum((t - mean_t) ** 2 for t in loops) / (len(loops) - 1))
    assert mean_t <= float(bounds.mean_loop_bound(t0, model)) + 3 * sd / sqrt(len(loops))
    C = float(proposal_from_probabilities(p, t0).C)
    assert abs(sum(rounds) / n - C) < 0.05
    # indecision shrinks geometrically
    for s_ in range(t0 + 1, t0 + 8):
        frac = sum(t > s_ for t in loops) / len(loops)
        assert frac <= float(bounds.tail_bound(s_, t0, model)) + 3 * sqrt(0.25 / len(loops))


def test_vn_sample_with_c_one_always_accepts():
    p = [Dyadic(1, -1), Dyadic(1, -2), Dyadic(1, -2)]
    q = Proposal(0, p)
    assert q.C == 1
    src = BitSource(4)
    for _ in range(200):
        _, stt = vn_sample(p, q, src)
        assert stt.rounds == 1


def test_vn_sample_distribution():
    p = [Fraction(1, 3), Fraction(2, 3)]
    q = Proposal(0, [ONE, ONE])
    src = BitSource(12)
    n = 20_000
    hits = sum(vn_sample(p, q, src)[0] for _ in range(n))
    assert abs(hits / n - 2 / 3) < 3 * sqrt(2 / 9 / n) + 1e-3


def test_first_round_verdict_coincides_with_vn():
    """Same bits: the certified sampler and exact rejection agree on the first proposal.

    Later rounds are not comparable because the two draw different numbers
    of digits of U before deciding.
    """
    s = gen_random(2, (2, 2), (2, 2), 6)
    p = exact_distribution(s)
    t0 = 2
    q = proposal_from_probabilities(p, t0)
    rng = random.Random(3)
    for _ in range(300):
        bits = [rng.getrandbits(1) for _ in range(4000)]
        a, sa = sample_modified(truncation_hooks(p), ScriptedBits(bits), t0)
        b, sb = vn_sample(p, q, ScriptedBits(bits))
        assert sa.proposal_bits[0] == sb.proposal_bits[0]
        assert (sa.rounds == 1) == (sb.rounds == 1)
        if sa.rounds == 1:
            assert a == b
