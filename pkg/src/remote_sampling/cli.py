"""Command-line entry point: validate, sample, bench, sweep, gen."""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .harness import (
    RunConfig,
    parse_angles,
    run_experiment,
    scenario_from_spec,
    sweep,
    write_report,
)
from .protocol import run_protocol
from .quantum import born_distribution, validate
from .randomness import BitSource
from .scenarios import dump_scenario, gen_ghz, gen_random


def _dims(text: str) -> list[int]:
    return [int(x) for x in text.replace("x", ",").split(",") if x]


def _range(text: str) -> list[int]:
    """``"2..6"`` or ``"2,3,5"``."""
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


def _add_run_options(p: argparse.ArgumentParser, runs: int | None = None):
    p.add_argument("--scenario", default="bell",
                   help="scenario file, or generator spec: bell | ghz:M[:ANGLES][:analytic] | "
                        "random:M:DIMS:OUTCOMES:SEED (angles theta[@phi] in units of pi)")
    p.add_argument("--seed", type=int, default=0)
    if runs is not None:
        p.add_argument("-n", "--runs", type=int, default=runs)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--t0", type=int, default=None, help="fixed t0")
    g.add_argument("--t0-offset", type=int, default=0, help="t0 = ceil(lg n) + offset")
    p.add_argument("--mode", choices=["truncation", "approximation"], default="truncation")
    p.add_argument("--model", choices=["discrete", "uniform"], default="discrete",
                   help="random-bit U (discrete) or a 256-bit pre-drawn U (uniform)")
    p.add_argument("--transport", choices=["memory", "socket"], default="memory")
    p.add_argument("--no-reuse", action="store_true",
                   help="restart refinements from the initial truncations at every proposal")


def _config(args, **extra) -> RunConfig:
    return RunConfig(
        scenario=args.scenario,
        runs=getattr(args, "runs", 1),
        seed=args.seed,
        t0=args.t0,
        t0_offset=args.t0_offset,
        mode=args.mode,
        model=args.model,
        transport=args.transport,
        reuse=not args.no_reuse,
        **extra,
    )


def _emit(obj, path=None):
    text = json.dumps(obj, indent=1, default=float)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_validate(args) -> int:
    scenario = scenario_from_spec(args.scenario)
    tol = Fraction(1, 1 << args.tolerance_bits)
    report = validate(scenario, tol)
    out = report.to_json()
    out["scenario"] = scenario.name
    out["inexact_ingest"] = scenario.inexact
    if report.ok and args.oracle:
        out["oracle"] = {",".join(map(str, x)): float(iv.mid)
                         for x, iv in zip(scenario.all_outcomes(), born_distribution(scenario))}
    _emit(out)
    return 0 if report.ok else 1


def cmd_sample(args) -> int:
    cfg = _config(args)
    scenario = scenario_from_spec(cfg.scenario)
    outcome, rec = run_protocol(
        scenario, cfg.t0_policy, BitSource(cfg.seed), cfg.transport,
        mode=cfg.mode, model=cfg.model, reuse=cfg.reuse,
    )
    out = rec.to_json(include_control=True)
    out["transcript"] = [r.to_json() for r in rec.meter.transcript]
    if args.frames:
        out["transcript_hex"] = rec.meter.transcript_bytes().hex()
    _emit(out, args.out)
    return 0


def cmd_bench(args) -> int:
    cfg = _config(args, workers=args.workers, report=args.out, csv=args.csv)
    report = run_experiment(cfg)
    if cfg.report:
        write_report(report, cfg.report)
    if cfg.csv:
        report.write_csv(cfg.csv)
    if not cfg.report or args.verbose:
        _emit(report.to_json())
    for b in report.bounds:
        state = "pass" if b.passed else ("FAIL" if b.enforced else "fail (not enforced)")
        print(f"{state:>20}  {b.name}: {b.empirical:.6g} vs {b.bound:.6g} (+{b.slack:.3g})  [{b.formula}]",
              file=sys.stderr)
    return 0 if report.passed else 1


def cmd_sweep(args) -> int:
    cfg = _config(args)
    values = _range(args.values)
    result = sweep(cfg, args.over, values, family=args.family)
    _emit(result, args.out)
    return 0 if all(p["passed"] for p in result["points"]) else 1


def cmd_gen(args) -> int:
    if args.family == "ghz":
        angles = parse_angles(args.angles) if args.angles else None
        scenario = gen_ghz(args.m, angles, exact=not args.analytic)
    else:
        dims = _dims(args.dims) if args.dims else [2] * args.m
        outs = _dims(args.outcomes) if args.outcomes else [2] * args.m
        scenario = gen_random(args.m, dims, outs, args.seed)
    if args.out:
        dump_scenario(scenario, args.out)
    else:
        from .scenarios import scenario_to_json

        _emit(scenario_to_json(scenario))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="remote-sampling", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario's invariants")
    p.add_argument("scenario")
    p.add_argument("--tolerance-bits", type=int, default=30, help="tolerance 2^-bits")
    p.add_argument("--oracle", action="store_true", help="also print Born probabilities")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sample", help="one protocol run with its transcript")
    _add_run_options(p)
    p.add_argument("--frames", action="store_true", help="include the raw frame bytes (hex)")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("bench", help="N runs, statistics and bound checks")
    _add_run_options(p, runs=1000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--out", help="JSON report path")
    p.add_argument("--csv", help="per-run CSV path")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="mean costs as m or the t0 offset varies")
    _add_run_options(p, runs=1000)
    p.add_argument("--over", choices=["m", "t0"], default="m")
    p.add_argument("--values", default="2..6", help="e.g. 2..6 or -2,0,2")
    p.add_argument("--family", choices=["ghz", "random"], default="ghz")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen", help="write a scenario file")
    p.add_argument("family", choices=["ghz", "random"])
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--angles", help="ghz: theta[@phi] per party, units of pi")
    p.add_argument("--analytic", action="store_true", help="ghz: approximation-only entries")
    p.add_argument("--dims")
    p.add_argument("--outcomes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_gen)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
