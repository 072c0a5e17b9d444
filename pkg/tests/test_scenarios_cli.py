import csv
import json
from fractions import Fraction

import pytest

from remote_sampling import bounds
from remote_sampling.cli import main
from remote_sampling.dyadic import Dyadic
from remote_sampling.harness import (
    RunConfig,
    chi_square,
    fit_exponent,
    parse_angles,
    run_experiment,
    scenario_from_spec,
    tv_distance,
)
from remote_sampling.protocol import run_protocol
from remote_sampling.quantum import exact_distribution, validate
from remote_sampling.randomness import BitSource
from remote_sampling.scenarios import (
    dump_scenario,
    gen_ghz,
    gen_random,
    load_scenario,
    scenario_from_json,
    scenario_to_json,
)

HALF = Dyadic(1, -1)


# -- generators ---------------------------------------------------------------------------


def test_ghz_z_basis():
    assert exact_distribution(gen_ghz(2)) == [HALF, 0, 0, HALF]
    p = exact_distribution(gen_ghz(3))
    assert p[0] == p[7] == HALF and all(v == 0 for v in p[1:7])


def test_ghz_angles_sum_to_one_and_validate():
    for angles in ([Fraction(1, 3), Fraction(2, 7)], [(Fraction(1, 5), Fraction(1, 3)), Fraction(3, 4)]):
        s = gen_ghz(2, angles)
        assert validate(s).ok
        assert sum(exact_distribution(s), Dyadic(0)) == 1


def test_ghz_correlation_matches_cosine():
    # <Z(a) Z(b)> on the Bell state is cos(pi (a - b)) for real rotations in the x-z plane
    import math

    a, b = Fraction(1, 3), Fraction(1, 7)
    p = [float(v) for v in exact_distribution(gen_ghz(2, [a, b]))]
    corr = p[0] - p[1] - p[2] + p[3]
    assert abs(corr - math.cos(math.pi * float(a - b))) < 1e-15


def test_ghz_errors():
    with pytest.raises(ValueError):
        gen_ghz(1)
    with pytest.raises(ValueError):
        gen_ghz(3, [0, 0])


@pytest.mark.parametrize("dims,outs", [((2, 2), (2, 2)), ((3, 2), (2, 4)), ((2, 2, 2), (3, 2, 2)), ((4, 3), (2, 3))])
def test_random_scenarios_are_valid(dims, outs):
    for seed in range(6):
        s = gen_random(len(dims), dims, outs, seed)
        assert validate(s, Fraction(1, 1 << 40)).ok, seed
        assert sum(exact_distribution(s), Dyadic(0)) == 1


def test_random_is_deterministic():
    a = gen_random(2, (2, 3), (2, 2), 17)
    b = gen_random(2, (2, 3), (2, 2), 17)
    c = gen_random(2, (2, 3), (2, 2), 18)
    assert a == b and a != c
    with pytest.raises(ValueError):
        gen_random(2, (1, 3), (2, 2), 0)


# -- file format -------------------------------------------------------------------------------


@pytest.mark.parametrize("scenario", [
    gen_random(2, (2, 3), (3, 2), 4),
    gen_ghz(3, [Fraction(1, 4), 0, (Fraction(1, 3), Fraction(1, 5))]),
    gen_ghz(2, [Fraction(1, 3), Fraction(1, 5)], exact=False),
], ids=["random", "ghz3", "analytic"])
def test_dump_and_reload_reproduce_transcripts(tmp_path, scenario):
    path = tmp_path / "s.json"
    dump_scenario(scenario, path)
    again = load_scenario(path)
    assert not again.inexact
    for seed in range(3):
        a = run_protocol(scenario, src=BitSource(seed))[1]
        b = run_protocol(again, src=BitSource(seed))[1]
        assert a.meter.transcript_bytes() == b.meter.transcript_bytes()


def test_decimal_strings_are_flagged_inexact():
    obj = scenario_to_json(gen_ghz(2))
    obj["rho"][0][0] = ["0.5", 0]
    assert not scenario_from_json(obj).inexact
    obj["rho"][1][1] = ["0.1", 0]
    s = scenario_from_json(obj)
    assert s.inexact
    assert abs(float(s.rho[1][1].re) - 0.1) < 2 ** -63


# -- harness --------------------------------------------------------------------------


def test_parse_angles_and_specs():
    assert parse_angles("0,1/2@1/3") == [Fraction(0), (Fraction(1, 2), Fraction(1, 3))]
    assert scenario_from_spec("bell").name == "ghz2"
    assert not scenario_from_spec("ghz:3:1/4,0,1/3:analytic").exact
    assert scenario_from_spec("random:2:2x3:2x2:5") == gen_random(2, (2, 3), (2, 2), 5)
    for bad in ("nope", "ghz", "random:2:2x2"):
        with pytest.raises(ValueError):
            scenario_from_spec(bad)


def test_statistics_helpers():
    assert tv_distance([50, 50], [0.5, 0.5]) == 0
    assert tv_distance([100, 0], [0.5, 0.5]) == 0.5
    _, p, hits = chi_square([10, 0, 10], [0.5, 0.0, 0.5])
    assert hits == 0 and p > 0.9
    _, p, hits = chi_square([10, 1, 10], [0.5, 0.0, 0.5])
    assert hits == 1 and p == 0
    assert abs(fit_exponent([1, 2, 4], [3, 12, 48]) - 2) < 1e-12


def test_bound_formulas():
    # m = 2, d_i = n_i = 2, t0 = 2: (2 + 4 + 2 + 2) * 16 + 3 (3 + 1/4) * 10
    assert bounds.tradeoff_bound((2, 2), (2, 2)) == 160 + Fraction(195, 2)
    assert bounds.tradeoff_bound((2, 2), (2, 2), "uniform") == 160 + 90
    assert bounds.setup_bits(2, (2, 2), (2, 2)) == 160
    assert bounds.expected_bits_bound(2, (2, 2), (2, 2)) == 160 + (3 + Fraction(1, 4)) * 3 * 10
    assert bounds.rejection_constant_upper(2, 4) == 3
    assert bounds.tail_bound(3, 2, "uniform") == 1
    assert bounds.tail_bound(5, 2, "uniform") == Fraction(1, 4)
    assert bounds.tail_bound(5, 2, "discrete") == Fraction(1, 4) + Fraction(1, 16)
    assert abs(bounds.proposal_bits_bound([0.5, 0.25, 0.25]) - 3.5) < 1e-12


def test_run_experiment_report():
    cfg = RunConfig(scenario="random:2:2x2:2x3:1", runs=300, seed=4)
    rep = run_experiment(cfg)
    assert sum(rep.frequencies) == 300
    assert rep.passed
    names = {b.name for b in rep.bounds}
    assert {"E(T)", "C", "C at t0 = ceil(lg n)", "E(S)", "meter exactness", "E(Z)", "E(V)", "E(R)"} <= names
    assert all(b.formula for b in rep.bounds)
    json.dumps(rep.to_json(), default=float)


def test_workers_do_not_change_results():
    a = run_experiment(RunConfig(scenario="bell", runs=200, seed=2))
    b = run_experiment(RunConfig(scenario="bell", runs=200, seed=2, workers=3))
    assert a.frequencies == b.frequencies and a.Z == b.Z


def test_run_config_validation():
    for bad in ({"runs": 0}, {"mode": "x"}, {"model": "x"}, {"transport": "x"}):
        with pytest.raises(ValueError):
            RunConfig(**bad)


# -- CLI ------------------------------------------------------------------------------------


def test_cli_validate(capsys):
    assert main(["validate", "bell", "--oracle"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["ok"] and out["oracle"]["0,0"] == 0.5


def test_cli_validate_failure(tmp_path, capsys):
    obj = scenario_to_json(gen_ghz(2))
    obj["rho"][0][0] = [1, 0]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(obj))
    assert main(["validate", str(path)]) == 1
    assert not json.loads(capsys.readouterr().out)["ok"]


def test_cli_sample(tmp_path):
    out = tmp_path / "run.json"
    assert main(["sample", "--scenario", "ghz:3", "--seed", "5", "--frames", "-o", str(out)]) == 0
    rec = json.loads(out.read_text())
    assert rec["custodian_outputs"] == rec["outcome"]
    assert rec["bits"]["setup"] == 360
    assert rec["transcript"][-1]["kind"] == "FINAL_OUTPUT"
    assert bytes.fromhex(rec["transcript_hex"])


def test_cli_bench_single_run(tmp_path):
    rep, table = tmp_path / "r.json", tmp_path / "r.csv"
    code = main(["bench", "--scenario", "bell", "-n", "1", "-o", str(rep), "--csv", str(table)])
    report = json.loads(rep.read_text())
    assert sum(report["frequencies"]) == 1
    assert code == (0 if report["passed"] else 1)
    rows = list(csv.reader(table.open()))
    assert rows[0] == ["run", "outcome", "S", "T_max", "Z", "R"] and len(rows) == 2


def test_cli_bench_modes(tmp_path):
    for extra in (["--mode", "approximation"], ["--model", "uniform"], ["--no-reuse"], ["--t0", "4"],
                  ["--transport", "socket", "-n", "5"]):
        rep = tmp_path / "r.json"
        assert main(["bench", "--scenario", "bell", "-n", "200", "-o", str(rep), *extra]) == 0, extra


def test_cli_gen_and_sweep(tmp_path, capsys):
    path = tmp_path / "g.json"
    assert main(["gen", "ghz", "--m", "2", "--angles", "1/3,1/5@1/2", "-o", str(path)]) == 0
    assert validate(load_scenario(path)).ok
    assert main(["gen", "random", "--m", "2", "--dims", "2x3", "--outcomes", "2,2", "--seed", "3"]) == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["dims"] == [2, 3]
    sweep_out = tmp_path / "sw.json"
    assert main(["sweep", "--values", "2..3", "-n", "100", "-o", str(sweep_out)]) == 0
    sw = json.loads(sweep_out.read_text())
    assert [p["m"] for p in sw["points"]] == [2, 3] and "fit_exponent" in sw


def test_cli_errors(capsys):
    assert main(["validate", "no-such-thing"]) == 2
    assert "error" in capsys.readouterr().err
