"""Experiment harness: scenario selection, batch runs, statistics and bound checks."""
from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from math import sqrt

import numpy as np
from scipy import stats as sps

from . import bounds
from .dyadic import ceil_lg
from .protocol import LeaderCache, T0Policy, run_protocol, source_for
from .quantum import Scenario, born_distribution, validate
from .randomness import PRNG_NAME, BitSource
from .scenarios import gen_ghz, gen_random, load_scenario

CHI2_ALPHA = 0.001
TV_LIMIT = 0.01
SIGMAS = 3.0
ZERO_PROB = 1e-12  # oracle probabilities below this are treated as impossible outcomes


# -- scenario specs ---------------------------------------------------------------


def parse_angles(text: str) -> list:
    """``"0,1/2@1/3"`` -> ``[0, ("1/2", "1/3")]``: theta[@phi] in units of pi."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "@" in part:
            theta, phi = part.split("@")
            out.append((Fraction(theta), Fraction(phi)))
        else:
            out.append(Fraction(part))
    return out


def scenario_from_spec(spec: str) -> Scenario:
    """Load a scenario file, or build one from a generator spec.

    Specs: ``bell``; ``ghz:M[:ANGLES][:analytic]``;
    ``random:M:DIMS:OUTCOMES:SEED`` with ``DIMS`` like ``2x3``.
    """
    if os.path.exists(spec):
        return load_scenario(spec)
    parts = spec.split(":")
    family = parts[0]
    if family == "bell":
        return gen_ghz(2)
    if family == "ghz":
        if len(parts) < 2:
            raise ValueError("ghz spec needs a party count: ghz:M")
        m = int(parts[1])
        rest = parts[2:]
        analytic = bool(rest) and rest[-1] == "analytic"
        if analytic:
            rest = rest[:-1]
        angles = parse_angles(rest[0]) if rest and rest[0] else None
        return gen_ghz(m, angles, exact=not analytic)
    if family == "random":
        if len(parts) != 5:
            raise ValueError("random spec is random:M:DIMS:OUTCOMES:SEED")
        m = int(parts[1])
        dims = [int(x) for x in parts[2].split("x")]
        outs = [int(x) for x in parts[3].split("x")]
        return gen_random(m, dims, outs, int(parts[4]))
    raise ValueError(f"no scenario file or generator matches {spec!r}")


# -- configuration and report -----------------------------------------------------


@dataclass
class RunConfig:
    scenario: str = "bell"  # file path or generator spec
    runs: int = 1000
    seed: int = 0
    t0_offset: int = 0
    t0: int | None = None  # fixed t0, overrides the offset
    mode: str = "truncation"  # or "approximation"
    model: str = "discrete"  # or "uniform"
    transport: str = "memory"  # or "socket"
    reuse: bool = True
    workers: int = 1
    report: str | None = None
    csv: str | None = None

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.mode not in ("truncation", "approximation"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.model not in ("discrete", "uniform"):
            raise ValueError(f"unknown randomness model {self.model!r}")
        if self.transport not in ("memory", "socket"):
            raise ValueError(f"unknown transport {self.transport!r}")

    @property
    def t0_policy(self) -> T0Policy:
        return T0Policy(offset=self.t0_offset, fixed=self.t0)


@dataclass
class BoundRow:
    name: str
    formula: str
    bound: float
    empirical: float
    slack: float = 0.0  # 3 standard errors for statistical rows, 0 for exact ones
    passed: bool = True
    enforced: bool = True

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class RunRow:
    run: int
    outcome: int
    S: int
    T: list
    V: list
    R: int
    Z: int
    setup: int
    refinement: int
    control: int
    saved: int
    C: Fraction
    H: float
    meter_errors: list
    fresh: bool = False  # some custodian answered refinements with fresh approximations


@dataclass
class RunReport:
    config: dict
    scenario: dict
    t0: int
    n: int
    frequencies: list
    oracle: list
    tv: float
    chi2: float
    chi2_p: float
    impossible_hits: int
    T: dict
    S: dict
    Z: dict
    random_bits: dict
    bounds: list
    elapsed: float
    rows: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.bounds if b.enforced)

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "scenario": self.scenario,
            "t0": self.t0,
            "n": self.n,
            "frequencies": self.frequencies,
            "oracle": self.oracle,
            "tv_distance": self.tv,
            "chi2": self.chi2,
            "chi2_p": self.chi2_p,
            "impossible_outcome_hits": self.impossible_hits,
            "T": self.T,
            "S": self.S,
            "Z": self.Z,
            "random_bits": self.random_bits,
            "bounds": [b.to_json() for b in self.bounds],
            "passed": self.passed,
            "elapsed_seconds": self.elapsed,
            "prng": PRNG_NAME,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run", "outcome", "S", "T_max", "Z", "R"])
            for r in self.rows:
                w.writerow([r.run, r.outcome, r.S, max(r.T), r.Z, r.R])


# -- statistics -------------------------------------------------------------------


def mean_se(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=float)
    if a.size < 2:
        return float(a.mean()), 0.0
    return float(a.mean()), float(a.std(ddof=1) / sqrt(a.size))


def tv_distance(freq, p) -> float:
    n = sum(freq)
    return 0.5 * sum(abs(f / n - q) for f, q in zip(freq, p))


def chi_square(freq, p) -> tuple[float, float, int]:
    """Pearson chi-square over outcomes with positive probability.

    Returns ``(statistic, p_value, hits)`` where ``hits`` counts samples of
    outcomes whose probability is (numerically) zero; any such hit is a
    failure, reported as p-value 0.
    """
    n = sum(freq)
    hits = sum(f for f, q in zip(freq, p) if q < ZERO_PROB)
    obs = np.array([f for f, q in zip(freq, p) if q >= ZERO_PROB], dtype=float)
    exp = np.array([q for q in p if q >= ZERO_PROB], dtype=float)
    if hits:
        return float("inf"), 0.0, hits
    if obs.size < 2:
        return 0.0, 1.0, 0
    exp = exp / exp.sum() * n
    res = sps.chisquare(obs, exp)
    return float(res.statistic), float(res.pvalue), 0


def _stat_row(name, formula, bound, values, enforced=True) -> BoundRow:
    mean, se = mean_se(values)
    slack = SIGMAS * se
    return BoundRow(name, formula, float(bound), mean, slack, mean <= float(bound) + slack, enforced)


def _exact_row(name, formula, bound, worst, ok) -> BoundRow:
    return BoundRow(name, formula, float(bound), float(worst), 0.0, bool(ok))


# -- running ----------------------------------------------------------------------


def _one_run(scenario, cfg: RunConfig, i: int, cache, sources) -> RunRow:
    src = BitSource(cfg.seed, stream=i)
    _, rec = run_protocol(
        scenario,
        cfg.t0_policy,
        src,
        cfg.transport,
        mode=cfg.mode,
        model=cfg.model,
        reuse=cfg.reuse,
        cache=cache,
        sources=sources,
        keep_transcript=False,
    )
    return summarize_run(rec, i)


def meter_errors(rec) -> list[str]:
    """Every way this run's meter departs from the closed-form costs.

    A round costs ``m + sum d_i^2`` when every custodian truncates, and the
    fresh-approximation cost for the custodians that cannot.
    """
    errs = []
    delta = bounds.setup_bits(rec.t0, rec.dims, rec.outcomes)
    if rec.meter.setup != delta:
        errs.append(f"setup {rec.meter.setup} != delta {delta}")
    expected_total = 0
    for rnd in rec.meter.rounds:
        g = bounds.mixed_round_bits(rnd.t, rec.dims, rec.fresh)
        expected_total += g
        if len(rnd.contacted) == rec.m and rnd.bits != g:
            errs.append(f"round t={rnd.t} cost {rnd.bits} != {g}")
        if rnd.bits + rnd.saved != g:
            errs.append(f"round t={rnd.t}: {rnd.bits} sent + {rnd.saved} cached != {g}")
    if rec.meter.refinement + rec.meter.saved != expected_total:
        errs.append("refinement total mismatch")
    if len(rec.meter.rounds) != sum(t - rec.t0 for t in rec.stats.loop_t):
        errs.append("round count differs from sum of (T_i - t0)")
    return errs


def summarize_run(rec, i: int) -> RunRow:
    st = rec.stats
    return RunRow(
        run=i,
        outcome=rec.flat,
        S=st.rounds,
        T=list(st.loop_t),
        V=list(st.proposal_bits),
        R=st.random_bits,
        Z=rec.meter.z,
        setup=rec.meter.setup,
        refinement=rec.meter.refinement,
        control=rec.meter.control,
        saved=rec.meter.saved,
        C=st.C.to_fraction(),
        H=_proposal_entropy(rec),
        meter_errors=meter_errors(rec),
        fresh=any(rec.fresh),
    )


_ENTROPY_MEMO: dict = {}


def _proposal_entropy(rec) -> float:
    prop = rec.proposal
    key = id(prop)
    hit = _ENTROPY_MEMO.get(key)
    if hit is None or hit[0] is not prop:
        hit = _ENTROPY_MEMO[key] = (prop, bounds.entropy(prop.q_vector()))
    return hit[1]


def run_experiment(cfg: RunConfig, scenario: Scenario | None = None) -> RunReport:
    """N independent protocol runs, each on its own substream of ``cfg.seed``."""
    if scenario is None:
        scenario = scenario_from_spec(cfg.scenario)
    report = validate(scenario)
    if not report.ok:
        raise ValueError(f"invalid scenario: {report.structural or [str(v) for v in report.violations[:3]]}")
    cache = LeaderCache()
    sources = None if cfg.transport == "socket" else [source_for(p) for p in scenario.povms]
    start = time.perf_counter()
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(lambda i: _one_run(scenario, cfg, i, cache, sources), range(cfg.runs)))
    else:
        rows = [_one_run(scenario, cfg, i, cache, sources) for i in range(cfg.runs)]
    elapsed = time.perf_counter() - start
    return build_report(cfg, scenario, rows, elapsed)


def build_report(cfg: RunConfig, scenario: Scenario, rows: list[RunRow], elapsed: float) -> RunReport:
    n, m = scenario.n, scenario.m
    dims, outs = scenario.dims, scenario.outcomes
    t0 = cfg.t0_policy(n)
    oracle = [float(iv.mid) for iv in born_distribution(scenario)]
    freq = [0] * n
    for r in rows:
        freq[r.outcome] += 1
    tv = tv_distance(freq, oracle)
    chi2, chi2_p, hits = chi_square(freq, oracle)
    loops = [t for r in rows for t in r.T]
    vs = [v for r in rows for v in r.V]
    big = len(rows) >= 10_000

    rows_out = []
    rows_out.append(BoundRow("TV distance", "TV(empirical, oracle) < 0.01", TV_LIMIT, tv, 0.0, tv < TV_LIMIT, big))
    rows_out.append(BoundRow(
        "chi-square p-value", "p > 0.001 (impossible outcomes never sampled)",
        CHI2_ALPHA, chi2_p, 0.0, chi2_p > CHI2_ALPHA and not hits, big,
    ))
    if cfg.model == "uniform":
        rows_out.append(_stat_row("E(T)", "t0 + 3 (exact uniform U)", bounds.mean_loop_bound(t0, "uniform"), loops))
    else:
        rows_out.append(_stat_row("E(T)", "t0 + 3 + 2^-t0 (random bits)", bounds.mean_loop_bound(t0, "discrete"), loops))
    c_up = bounds.rejection_constant_upper(t0, n)
    cs = [r.C for r in rows]
    rows_out.append(_exact_row("C", "1 <= C <= 1 + 2^(1-t0) n", c_up, max(cs), min(cs) >= 1 and max(cs) <= c_up))
    if t0 == ceil_lg(n):
        rows_out.append(_exact_row("C at t0 = ceil(lg n)", "1 <= C <= 3", 3, max(cs), min(cs) >= 1 and max(cs) <= 3))
    rows_out.append(_stat_row("E(S)", "E(S) = C <= 1 + 2^(1-t0) n", c_up, [r.S for r in rows]))
    errs = sum(len(r.meter_errors) for r in rows)
    fresh = cfg.mode == "approximation" or any(r.fresh for r in rows)
    if not fresh:
        meter_formula = "setup = delta(t0); refinement round = m + sum d_i^2"
    else:
        meter_formula = ("setup = delta(t0); round producing p(t) = m + (t+2+ceil(2lg d)+2ceil(lg m)) sum d_i^2 "
                         "(d_i^2 for custodians that truncate)")
    rows_out.append(_exact_row("meter exactness", meter_formula, 0, errs, errs == 0))
    zs = [r.Z for r in rows]
    if not fresh:
        rows_out.append(_stat_row(
            "E(Z)", "delta(t0) + (E(T) bound - t0)(1 + 2^(1-t0) n) gamma",
            bounds.expected_bits_bound(t0, dims, outs, cfg.model), zs,
        ))
        if t0 == ceil_lg(n):
            factor = "9" if cfg.model == "uniform" else "3(3 + 1/n)"
            rows_out.append(_stat_row(
                "E(Z) at t0 = ceil(lg n)",
                f"(ceil lg n + ceil 2lg d + 2 ceil lg m + 2) sum n_i d_i^2 + {factor} (m + sum d_i^2)",
                bounds.tradeoff_bound(dims, outs, cfg.model), zs,
            ))
    else:
        rows_out.append(_stat_row(
            "E(Z)", "delta(t0) + (1 + 2^(1-t0) n) sum_t gamma(t) P(T >= t)",
            bounds.expected_bits_bound_fresh(t0, dims, outs, cfg.model), zs,
        ))
    h = float(np.mean([r.H for r in rows]))
    rows_out.append(_stat_row("E(V)", "Knuth-Yao: 2 + H(q)", 2 + h, vs))
    if cfg.model == "discrete":
        rows_out.append(_stat_row(
            "E(R)", "(1 + 2^(1-t0) n)(lg n + t0 + 5 + 2^-t0)",
            bounds.random_bits_bound(t0, n), [r.R for r in rows],
        ))

    def summary(values):
        mean, se = mean_se(values)
        return {"mean": mean, "stderr": se, "max": max(values), "min": min(values)}

    return RunReport(
        config=asdict(cfg),
        scenario={"name": scenario.name, "m": m, "dims": list(dims), "outcomes": list(outs),
                  "d": scenario.d, "exact": scenario.exact, "inexact_ingest": scenario.inexact},
        t0=t0,
        n=n,
        frequencies=freq,
        oracle=oracle,
        tv=tv,
        chi2=chi2,
        chi2_p=chi2_p,
        impossible_hits=hits,
        T=summary(loops),
        S=summary([r.S for r in rows]),
        Z={
            "setup": summary([r.setup for r in rows]),
            "refinement": summary([r.refinement for r in rows]),
            "control": summary([r.control for r in rows]),
            "total": summary(zs),
            "saved_by_cache": summary([r.saved for r in rows]),
            "delta": bounds.setup_bits(t0, dims, outs),
            "gamma": bounds.round_bits(dims),
        },
        random_bits={"total": sum(r.R for r in rows), **summary([r.R for r in rows]),
                      "proposal_bits": summary(vs)},
        bounds=rows_out,
        elapsed=elapsed,
        rows=rows,
    )


def write_report(report: RunReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_json(), fh, indent=1, default=float)
        fh.write("\n")


# -- sweeps -----------------------------------------------------------------------


def fit_exponent(xs, ys) -> float:
    """Least-squares slope of log y against log x."""
    slope, _ = np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)
    return float(slope)


def sweep(base: RunConfig, over: str, values, family: str = "ghz") -> dict:
    """Mean Z (and friends) as ``m`` or the t0 offset varies."""
    points = []
    for v in values:
        if over == "m":
            cfg = RunConfig(**{**asdict(base), "scenario": f"{family}:{v}" if family == "ghz" else
                               f"random:{v}:{'x'.join(['2'] * v)}:{'x'.join(['2'] * v)}:{base.seed}"})
        elif over == "t0":
            cfg = RunConfig(**{**asdict(base), "t0_offset": int(v), "t0": None})
        else:
            raise ValueError(f"cannot sweep over {over!r}")
        rep = run_experiment(cfg)
        points.append({
            over: v,
            "t0": rep.t0,
            "mean_Z": rep.Z["total"]["mean"],
            "mean_setup": rep.Z["setup"]["mean"],
            "mean_refinement": rep.Z["refinement"]["mean"],
            "mean_S": rep.S["mean"],
            "mean_T": rep.T["mean"],
            "mean_R": rep.random_bits["mean"],
            "passed": rep.passed,
        })
    out = {"over": over, "family": family, "points": points}
    if over == "m" and len(points) >= 2:
        out["fit_exponent"] = fit_exponent([p["m"] for p in points], [p["mean_Z"] for p in points])
    return out
