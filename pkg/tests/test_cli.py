import json

import pytest

from tollkit import BasisFunction, GameInstance, build_tax_profile
from tollkit.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_two_by_two(tmp_path):
    b = BasisFunction.monomial(1)
    inst = GameInstance.build([b], [[1.0], [1.0]], [[[0], [1]], [[0], [1]]])
    path = tmp_path / "instance.json"
    inst.save(path)
    return inst, path


class TestAnalyzeBasis:
    def test_linear_monomial(self, capsys):
        code, out, _ = run_cli(capsys, "analyze-basis", "--monomial", "1")
        assert code == 0
        payload = json.loads(out)
        assert payload["rho_report"]["rho"] == pytest.approx(2.0, rel=1e-9)
        assert payload["mu"] == pytest.approx(2.0, rel=1e-6)
        assert payload["bell"] == pytest.approx(2.0, rel=1e-9)

    def test_constant_monomial(self, capsys):
        code, out, _ = run_cli(capsys, "analyze-basis", "--monomial", "0")
        payload = json.loads(out)
        assert code == 0
        assert payload["rho_report"]["rho"] == pytest.approx(1.0, rel=1e-9)

    def test_affine_table_needs_extension_flag_for_mu(self, capsys):
        code, out, _ = run_cli(capsys, "analyze-basis", "--table", "2,3")
        payload = json.loads(out)
        assert code == 0
        assert payload["rho_report"]["rho"] == pytest.approx(1.5, rel=1e-9)
        assert payload["mu"] is None
        assert payload["mu_status"] == "unsupported-basis"

        code, out, _ = run_cli(capsys, "analyze-basis", "--table", "2,3",
                               "--monomial-like")
        payload = json.loads(out)
        assert payload["mu"] == pytest.approx(2.0, rel=1e-6)

    def test_bell_table_csv(self, capsys, tmp_path):
        out_dir = tmp_path / "out"
        code, out, _ = run_cli(capsys, "analyze-basis", "--monomial", "2",
                               "--bell-table", "4", "--out", str(out_dir))
        assert code == 0
        rows = (out_dir / "bell_table.csv").read_text().strip().splitlines()
        assert rows[0] == "degree,rho"
        values = [float(r.split(",")[1]) for r in rows[1:]]
        assert values == pytest.approx([1.0, 2.0, 5.0, 15.0, 52.0], rel=1e-6)

    def test_missing_basis_is_parse_error(self, capsys):
        code, _, err = run_cli(capsys, "analyze-basis")
        assert code == 2
        assert "basis" in err

    def test_invalid_table_is_parse_error(self, capsys):
        code, _, _ = run_cli(capsys, "analyze-basis", "--table", "3,1")
        assert code == 2


class TestDesign:
    def test_two_by_two_bundle(self, capsys, tmp_path):
        _, path = write_two_by_two(tmp_path)
        out_dir = tmp_path / "out"
        code, out, _ = run_cli(capsys, "design", str(path), "--out", str(out_dir))
        assert code == 0
        bundle = json.loads((out_dir / "design_bundle.json").read_text())
        stages = bundle["stages"]
        assert stages["relaxation"]["status"] == "ok"
        assert stages["relaxation"]["objective"] == pytest.approx(4.0, rel=1e-6)
        assert stages["taxes"]["status"] == "ok"
        assert stages["audit"]["status"] == "ok" and stages["audit"]["passed"]
        assert stages["poa"]["status"] == "ok"
        assert stages["poa"]["poa"] <= 2.0 + 1e-3
        assert stages["smoothness"]["status"] == "ok"
        assert stages["smoothness"]["passed"]

    def test_single_strategy_instance(self, capsys, tmp_path):
        b = BasisFunction.monomial(1)
        inst = GameInstance.build([b], [[1.0]], [[[0]], [[0]]])
        path = tmp_path / "single.json"
        inst.save(path)
        code, out, _ = run_cli(capsys, "design", str(path))
        bundle = json.loads(out)
        assert code == 0
        assert bundle["stages"]["taxes"]["status"] == "ok"
        assert bundle["stages"]["poa"]["poa"] == 1.0

    def test_nonconvergent_records_infinite_rho(self, capsys, tmp_path):
        # A steep table has its kernel peak far past a tiny term cap, so the
        # scan cannot settle and the stage reports an unbounded factor.
        b = BasisFunction.table([float(3 ** x) for x in range(1, 13)])
        inst = GameInstance.build([b], [[1.0]], [[[0]], [[0]]])
        path = tmp_path / "steep.json"
        inst.save(path)
        code, out, _ = run_cli(capsys, "design", str(path), "--i-max", "64")
        assert code == 0
        bundle = json.loads(out)
        statuses = {s.get("status") for s in bundle["stages"].values()}
        assert "infinite-rho" in statuses
        assert bundle["stages"]["smoothness"]["status"] == "skipped"

    def test_missing_file_exits_two(self, capsys, tmp_path):
        code, _, _ = run_cli(capsys, "design", str(tmp_path / "nope.json"))
        assert code == 2


class TestLearn:
    def test_smoke_single_round(self, capsys, tmp_path):
        inst, path = write_two_by_two(tmp_path)
        taxes = build_tax_profile(inst, [1.0, 1.0])
        taxes_path = tmp_path / "taxes.json"
        taxes.save(taxes_path)
        out_dir = tmp_path / "runs"
        code, out, _ = run_cli(capsys, "learn", str(path), "--taxes",
                               str(taxes_path), "--rounds", "1",
                               "--seeds", "0", "--out", str(out_dir))
        assert code == 0
        trace = (out_dir / "trace-0.jsonl").read_text().strip().splitlines()
        assert len(trace) == 2
        summary = (out_dir / "learn_summary.csv").read_text().splitlines()
        assert summary[0] == "seed,rounds,max_average_regret,best_sc,ratio"
        assert len(summary) == 2

    def test_three_seeds_meet_factor_bound(self, capsys, tmp_path):
        inst, path = write_two_by_two(tmp_path)
        taxes = build_tax_profile(inst, [1.0, 1.0])
        taxes_path = tmp_path / "taxes.json"
        taxes.save(taxes_path)
        out_dir = tmp_path / "runs"
        code, out, _ = run_cli(capsys, "learn", str(path), "--taxes",
                               str(taxes_path), "--rounds", "5000",
                               "--seeds", "0,1,2", "--out", str(out_dir))
        assert code == 0
        payload = json.loads(out)
        for run in payload["runs"]:
            assert run["ratio"] <= 2.0 + 0.05

    def test_deterministic_rerun_equality(self, capsys, tmp_path):
        inst, path = write_two_by_two(tmp_path)
        taxes = build_tax_profile(inst, [1.0, 1.0])
        taxes_path = tmp_path / "taxes.json"
        taxes.save(taxes_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out_dir in (out_a, out_b):
            code, _, _ = run_cli(capsys, "learn", str(path), "--taxes",
                                 str(taxes_path), "--rounds", "50",
                                 "--seeds", "0,1", "--out", str(out_dir))
            assert code == 0
        for name in ("trace-0.jsonl", "trace-1.jsonl", "learn_summary.csv"):
            assert (out_a / name).read_text() == (out_b / name).read_text()


class TestForge:
    def test_random_instance_valid(self, capsys, tmp_path):
        out_dir = tmp_path / "out"
        code, out, _ = run_cli(capsys, "forge", "random", "--players", "3",
                               "--resources", "3", "--monomial", "1",
                               "--seed", "7", "--out", str(out_dir))
        assert code == 0
        instance = GameInstance.load(out_dir / "instance.json")
        assert instance.num_players == 3

    def test_partition_reference_parameters(self, capsys, tmp_path):
        out_dir = tmp_path / "out"
        code, out, _ = run_cli(capsys, "forge", "partition", "--n", "120",
                               "--beta", "4", "--h", "3", "--k", "2",
                               "--eta", "0.9", "--monomial", "1",
                               "--out", str(out_dir))
        assert code == 0
        payload = json.loads(out)
        assert payload["p1_passed"] is True
        assert payload["p2_margin"] >= 0

    def test_partition_failure_exits_four(self, capsys):
        code, _, err = run_cli(capsys, "forge", "partition", "--n", "6",
                               "--beta", "4", "--h", "3", "--k", "2",
                               "--eta", "0.01", "--monomial", "1")
        assert code == 4
        assert "construction-failed" in err

    def test_reduce_size_contract(self, capsys, tmp_path):
        from tollkit import LabelCoverInstance
        lc = LabelCoverInstance(num_left=2, num_right=1, edges=((0, 0), (1, 0)),
                                h=2, alpha=1, beta=1,
                                pi={(0, 0): (0,), (1, 0): (0,)})
        lc_path = tmp_path / "lc.json"
        lc.save(lc_path)
        out_dir = tmp_path / "out"
        code, out, _ = run_cli(capsys, "forge", "reduce", "--labelcover",
                               str(lc_path), "--n", "8", "--k", "1",
                               "--eta", "0.5", "--beta", "2",
                               "--monomial", "1", "--out", str(out_dir))
        assert code == 0
        instance = GameInstance.load(out_dir / "instance.json")
        assert instance.num_players == 2
        assert instance.num_resources == 8


class TestExperimentConfig:
    def test_snapshot_written_with_out(self, capsys, tmp_path):
        out_dir = tmp_path / "out"
        code, _, _ = run_cli(capsys, "forge", "random", "--players", "2",
                             "--resources", "2", "--monomial", "1",
                             "--seed", "3", "--out", str(out_dir))
        assert code == 0
        config = json.loads((out_dir / "config-forge-random.json").read_text())
        assert config["seed"] == 3
        assert "forge" in config["argv"]

    def test_config_replay_bit_identical(self, capsys, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        code, _, _ = run_cli(capsys, "forge", "random", "--players", "3",
                             "--resources", "3", "--monomial", "2",
                             "--seed", "11", "--out", str(first))
        assert code == 0
        code, _, _ = run_cli(capsys, "--config",
                             str(first / "config-forge-random.json"),
                             "--out", str(second))
        assert code == 0
        assert ((first / "instance.json").read_text()
                == (second / "instance.json").read_text())

    def test_round_trip(self):
        from tollkit.cli import ExperimentConfig
        config = ExperimentConfig(argv=("oracle", "x.json"), seed=4, out="runs")
        assert ExperimentConfig.from_json(config.to_json()) == config

    def test_missing_config_file(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "--config", str(tmp_path / "none.json"))
        assert code == 2

    def test_seed_accepted_everywhere(self, capsys, tmp_path):
        _, path = write_two_by_two(tmp_path)
        assert run_cli(capsys, "analyze-basis", "--monomial", "1",
                       "--seed", "5")[0] == 0
        assert run_cli(capsys, "design", str(path), "--seed", "5")[0] == 0
        assert run_cli(capsys, "oracle", str(path), "--seed", "5")[0] == 0


class TestReportRoundTrips:
    def test_smoothness_and_coarse_correlated(self):
        from tollkit import (CoarseCorrelatedReport, SmoothnessResult,
                             check_smoothness, coarse_correlated_check,
                             multiplicative_weights_run, solve_relaxation)
        b = BasisFunction.monomial(1)
        inst = GameInstance.build([b], [[1.0], [1.0]], [[[0], [1]], [[0], [1]]])
        prof = solve_relaxation(inst)
        taxes = build_tax_profile(inst, prof.loads)
        smooth = check_smoothness(inst, taxes, prof, 2.0)
        assert SmoothnessResult.from_json(smooth.to_json()) == smooth
        trace = multiplicative_weights_run(inst, taxes, rounds=50, seed=0)
        cce = coarse_correlated_check(inst, taxes, prof, 2.0, trace)
        assert CoarseCorrelatedReport.from_json(cce.to_json()) == cce


class TestOracle:
    def test_poa_report(self, capsys, tmp_path):
        _, path = write_two_by_two(tmp_path)
        code, out, _ = run_cli(capsys, "oracle", str(path))
        assert code == 0
        payload = json.loads(out)
        assert payload["poa"] == 1.0
        assert payload["num_pure_ne"] == 2

    def test_taxed_oracle(self, capsys, tmp_path):
        inst, path = write_two_by_two(tmp_path)
        taxes = build_tax_profile(inst, [1.0, 1.0])
        taxes_path = tmp_path / "taxes.json"
        taxes.save(taxes_path)
        code, out, _ = run_cli(capsys, "oracle", str(path), "--taxes",
                               str(taxes_path))
        assert code == 0
        assert json.loads(out)["poa"] == 1.0

    def test_enumeration_cap_exits_three(self, capsys, tmp_path):
        _, path = write_two_by_two(tmp_path)
        code, _, err = run_cli(capsys, "oracle", str(path), "--enum-cap", "1")
        assert code == 3
