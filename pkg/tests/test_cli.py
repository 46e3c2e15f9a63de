import csv
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from lamdis.cli import main
from lamdis.environments import fixture_path


@pytest.fixture
def runner():
    return CliRunner()


def read_csv(path):
    with open(path, newline="") as fp:
        return list(csv.reader(fp))


def test_validate_ok_fixture(runner):
    result = runner.invoke(main, ["validate", str(fixture_path("tiger_modified"))])
    assert result.exit_code == 0
    assert "5 states" in result.output


def test_validate_json_mode(runner):
    result = runner.invoke(main, ["validate", "--json", str(fixture_path("grid_4x3"))])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["ok"] is True
    assert payload["n_states"] == 12


def test_validate_parse_error_exit_2(runner, tmp_path):
    bad = tmp_path / "bad.POMDP"
    bad.write_text("discount: 0.9\nvalues: reward\nstates: 2\nactions: 1\n"
                   "observations: 1\nT: 0 : 0 : 1 nope\n")
    result = runner.invoke(main, ["validate", str(bad)])
    assert result.exit_code == 2
    assert "line 6" in result.output


def test_validate_domain_failure_exit_1(runner, tmp_path):
    bad = tmp_path / "rows.POMDP"
    bad.write_text(
        "discount: 0.9\nvalues: reward\nstates: 2\nactions: 1\nobservations: 2\n"
        "start: uniform\n"
        "T: 0 : 0 : 1 0.5\n"  # row sums to 0.5
        "T: 0 : 1 : 1 1.0\n"
        "O: * identity\n"
    )
    result = runner.invoke(main, ["validate", str(bad)])
    assert result.exit_code == 1
    assert "T rows stochastic" in result.output
    assert "T[0,0,:]" in result.output


def test_validate_missing_file_exit_3(runner):
    result = runner.invoke(main, ["validate", "/nonexistent/file.POMDP"])
    assert result.exit_code == 3


def test_discrep_parity_all_zero(runner, tmp_path):
    result = runner.invoke(main, [
        "discrep", "--env", "parity", "--policies", "random:30:7",
        "--lambdas", "0,1", "--out", str(tmp_path), "--no-plot",
    ])
    assert result.exit_code == 0, result.output
    rows = read_csv(tmp_path / "discrep.csv")
    assert rows[0] == ["policy_id", "lambda_discrepancy"]
    data = {r[0]: float(r[1]) for r in rows[1:]}
    assert all(v < 1e-8 for k, v in data.items() if k.startswith("random"))
    assert set(data) >= {"min", "max", "mean"}


def test_discrep_tmaze_all_positive(runner, tmp_path):
    result = runner.invoke(main, [
        "discrep", "--env", "tmaze", "--policies", "random:30:7",
        "--out", str(tmp_path), "--no-plot",
    ])
    assert result.exit_code == 0
    rows = read_csv(tmp_path / "discrep.csv")
    vals = [float(r[1]) for r in rows[1:] if r[0].startswith("random")]
    assert min(vals) > 1e-6


def test_discrep_equal_lambdas_zero(runner, tmp_path):
    result = runner.invoke(main, [
        "discrep", "--env", "tmaze", "--policies", "random:5:1",
        "--lambdas", "0.4,0.4", "--out", str(tmp_path), "--no-plot",
    ])
    assert result.exit_code == 0
    rows = read_csv(tmp_path / "discrep.csv")
    assert all(float(r[1]) == 0.0 for r in rows[1:])


def test_discrep_rerun_is_byte_identical(runner, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        result = runner.invoke(main, [
            "discrep", "--env", "tiger_modified", "--policies", "random:10:3",
            "--out", str(out), "--no-plot",
        ])
        assert result.exit_code == 0
    assert (a / "discrep.csv").read_bytes() == (b / "discrep.csv").read_bytes()
    ma = json.loads((a / "discrep.manifest.json").read_text())
    mb = json.loads((b / "discrep.manifest.json").read_text())
    ma.pop("timestamp"), mb.pop("timestamp")
    assert ma == mb


def test_manifest_references_all_outputs(runner, tmp_path):
    result = runner.invoke(main, [
        "discrep", "--env", "parity", "--policies", "random:5:1",
        "--out", str(tmp_path),
    ])
    assert result.exit_code == 0
    manifest = json.loads((tmp_path / "discrep.manifest.json").read_text())
    produced = {p.name for p in tmp_path.iterdir()} - {"discrep.manifest.json"}
    assert set(manifest["outputs"]) == produced
    assert (tmp_path / "discrep.png").exists()


def test_sweep_po_csv_schema_and_zero_at_origin(runner, tmp_path):
    result = runner.invoke(main, [
        "sweep-po", "--mixes", "0,0.5,1.0", "--out", str(tmp_path), "--no-plot",
    ])
    assert result.exit_code == 0
    rows = read_csv(tmp_path / "sweep_po.csv")
    assert rows[0] == ["pattern", "mix", "lambda_discrepancy"]
    by_pattern = {}
    for pattern, mix, ld in rows[1:]:
        by_pattern.setdefault(pattern, []).append((float(mix), float(ld)))
    assert set(by_pattern) == {"corridor", "junction", "both"}
    for pattern, pts in by_pattern.items():
        assert [m for m, _ in pts] == [0.0, 0.5, 1.0]
        assert pts[0][1] < 1e-9
        lds = [ld for _, ld in pts]
        assert lds == sorted(lds)


def test_parity_sweep_zero_only_at_origin(runner, tmp_path):
    result = runner.invoke(main, [
        "parity-sweep", "--perturbation", "start-probs", "--grid", "0,0.05",
        "--n-policies", "20", "--out", str(tmp_path), "--no-plot",
    ])
    assert result.exit_code == 0
    rows = read_csv(tmp_path / "parity_sweep_start_probs.csv")
    assert rows[0] == ["perturbation", "epsilon", "max_ld", "mean_ld"]
    assert float(rows[1][2]) < 1e-8
    assert float(rows[2][2]) > 1e-6


def test_sample_check_episodes_zero_exit_2(runner):
    result = runner.invoke(main, [
        "sample-check", "--env", "tiger_modified", "--episodes", "0",
    ])
    assert result.exit_code == 2


def test_sample_check_block_mdp_consistent_with_zero(runner, tmp_path):
    fixture = tmp_path / "block.POMDP"
    from lamdis.cassandra import serialize_pomdp
    from lamdis.environments import random_block_mdp

    fixture.write_text(serialize_pomdp(random_block_mdp(4, 2, seed=0, gamma=0.8)))
    result = runner.invoke(main, [
        "sample-check", "--file", str(fixture), "--policy", "random:3",
        "--episodes", "4000", "--horizon", "60", "--n-boot", "30",
        "--out", str(tmp_path), "--no-plot",
    ])
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "sample_check.json").read_text())
    assert payload["closed_ld"] < 1e-8
    assert payload["consistent_with_zero"] is True


def test_optimize_mem_smoke(runner, tmp_path):
    result = runner.invoke(main, [
        "optimize-mem", "--env", "parity", "--n-mem", "2", "--seeds", "0",
        "--mem-steps", "30", "--policy-steps", "30", "--n-policies", "5",
        "--pre-augment", "--out", str(tmp_path), "--no-plot",
    ])
    assert result.exit_code == 0, result.output
    rows = read_csv(tmp_path / "optimize_mem_summary.csv")
    assert rows[0][:4] == ["n_mem", "seed", "initial_ld", "final_ld"]
    assert len(rows) == 2
    report = json.loads((tmp_path / "optimize_mem_m2_s0.json").read_text())
    assert report["schema"] == "lamdis.optimize.v1"
    assert len(report["mem_trace"]) == 31


def test_unknown_env_usage_error(runner):
    result = runner.invoke(main, ["discrep", "--env", "pocman"])
    assert result.exit_code == 2
