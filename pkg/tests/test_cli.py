import json

import pytest

from relbc.cli import ExperimentConfig, ConfigError, dispatch


def run(capsys, *argv):
    code = dispatch(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_no_subcommand_is_usage_error(capsys):
    code, _, err = run(capsys)
    assert code == 1


def test_simulate_no_loss(capsys):
    code, out, _ = run(
        capsys, "simulate", "--protocol", "fq", "--k", "10", "--q", "97",
        "--p", "0", "--seed", "1", "--trials", "200",
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["p_ok_mc"] == 1.0


def test_simulate_requires_seed(capsys):
    code, _, err = run(capsys, "simulate", "--protocol", "fq", "--p", "0")
    assert code == 1
    assert "seed" in err


def test_simulate_validation_reports_field(capsys):
    code, _, err = run(
        capsys, "simulate", "--protocol", "tree", "--p", "2.0", "--seed", "1"
    )
    assert code == 1
    assert "p:" in err


def test_simulate_csv_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        code, _, _ = run(
            capsys, "simulate", "--protocol", "tree", "--k", "8", "--q", "101",
            "--p", "0.02", "--m", "2", "--seed", "9", "--trials", "500",
            "--out-csv", str(out),
        )
        assert code == 0
    assert a.read_bytes() == b.read_bytes()


def test_output_dir_env_override(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("RELBC_OUT_DIR", str(tmp_path))
    code, _, _ = run(
        capsys, "simulate", "--protocol", "fq", "--k", "3", "--q", "5",
        "--p", "0", "--seed", "1", "--trials", "50", "--out-csv", "sub/row.csv",
    )
    assert code == 0
    assert (tmp_path / "sub" / "row.csv").exists()


def test_bind_oracle_single(capsys):
    code, out, _ = run(capsys, "bind-oracle", "--protocol", "single", "--q", "2")
    assert code == 0
    assert json.loads(out)["sum"] == 1.5


def test_bind_oracle_budget_refusal_exit_2(capsys):
    code, _, err = run(capsys, "bind-oracle", "--protocol", "tree", "--q", "7")
    assert code == 2
    assert "refused" in err


def test_chsh_uniform(capsys):
    code, out, _ = run(capsys, "chsh", "--q", "2", "--uniform")
    assert code == 0
    doc = json.loads(out)
    assert doc["value_float"] == 0.75
    assert doc["bound"] == pytest.approx(1.5)
    assert doc["gap"] == pytest.approx(0.75)


def test_chsh_custom_distribution(capsys):
    code, out, _ = run(capsys, "chsh", "--q", "3", "--y-dist", "1,0,0")
    assert code == 0
    assert json.loads(out)["value_float"] == 1.0


def test_chsh_bad_distribution(capsys):
    code, _, err = run(capsys, "chsh", "--q", "3", "--y-dist", "1,1")
    assert code == 1
    assert "y-dist" in err


def test_bounds_table_and_inversion(capsys):
    code, out, _ = run(
        capsys, "bounds", "--k", "1,2", "--q", "2,97", "--invert-epsilon", "0.5"
    )
    assert code == 0
    rows = json.loads(out)
    grid = [r for r in rows if "epsilon_bound" in r]
    inv = [r for r in rows if "min_q" in r]
    assert len(grid) == 4 and len(inv) == 2
    assert inv[0]["min_q"] == pytest.approx(25 * 1 / (2 * 0.25))


def test_pretty_rendering(capsys):
    code, out, _ = run(capsys, "bounds", "--k", "1", "--q", "2", "--pretty")
    assert code == 0
    assert "epsilon_bound" in out and "{" not in out


def test_verify_transcript_roundtrip(capsys, tmp_path):
    tr_path = tmp_path / "run.json"
    code, _, _ = run(
        capsys, "simulate", "--protocol", "tree", "--k", "5", "--q", "97",
        "--p", "0", "--seed", "3", "--trials", "10",
        "--transcript-out", str(tr_path), "--commit-bit", "1",
    )
    assert code == 0
    code, out, _ = run(capsys, "verify-transcript", str(tr_path))
    assert code == 0
    doc = json.loads(out)
    assert doc["outcome"] == "accept"
    assert doc["revealed"] == 1


def test_verify_transcript_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "verify-transcript", str(tmp_path / "nope.json"))
    assert code == 1


def test_verify_transcript_detects_tampering(capsys, tmp_path):
    tr_path = tmp_path / "run.json"
    run(
        capsys, "simulate", "--protocol", "fq", "--k", "4", "--q", "11",
        "--p", "0", "--seed", "5", "--trials", "10",
        "--transcript-out", str(tr_path),
    )
    doc = json.loads(tr_path.read_text())
    doc["reveals"][0]["claim"] = (doc["reveals"][0]["claim"] + 1) % 11
    tr_path.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "verify-transcript", str(tr_path))
    assert code == 0
    assert json.loads(out)["outcome"] == "reject"


def test_config_file_with_flag_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "protocol": "fq", "k": 5, "q": 97, "p": 0.0, "m": 1,
        "seed": 2, "trials": 100,
    }))
    code, out, _ = run(capsys, "simulate", "--config", str(cfg), "--trials", "40")
    assert code == 0
    assert json.loads(out)["trials"] == 40


def test_experiment_config_validation_collects_errors():
    cfg = ExperimentConfig(
        protocol="bogus", k=0, q=4, p=0.5, m=1, n_stations=3,
        prune_lag=2, seed=None, trials=10,
    )
    with pytest.raises(ConfigError) as exc:
        cfg.validate()
    msg = str(exc.value)
    assert "protocol" in msg and "k:" in msg and "q:" in msg and "seed" in msg
