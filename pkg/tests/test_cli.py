from pathlib import Path

import pytest

from phibranch.cli import run_command
from phibranch.output import read_branch_csv

from conftest import CONFIGS


def test_degree_command(capsys):
    assert run_command(["degree", "--problem", "ex53", "--box", "-1,1,-1,1"]) == 0
    assert capsys.readouterr().out.strip() == "degree = 1"
    assert run_command(["degree", "--map", "minus_identity", "--box", "-1,1"]) == 0
    assert capsys.readouterr().out.strip() == "degree = -1"
    assert run_command(["degree", "--map", "minus_identity", "--box=-1,1,-1,1"]) == 0
    assert capsys.readouterr().out.strip() == "degree = 1"


def test_degree_errors(capsys):
    # zero on the boundary is a domain error
    assert run_command(["degree", "--map", "identity", "--box", "0,1,-1,1"]) == 1
    assert "BoundaryZero" in capsys.readouterr().err
    assert run_command(["degree", "--box", "-1,1,-1,1"]) == 2
    assert run_command(["degree", "--problem", "ex53", "--box", "-1,1"]) == 2
    assert run_command(["degree", "--problem", "ex53", "--box", "1,0,-1,1"]) == 2


def test_usage_errors(capsys):
    assert run_command([]) == 2
    assert run_command(["bogus"]) == 2
    assert run_command(["solve", "--problem", "ex52"]) == 2
    assert run_command(["solve", "--lambda", "0"]) == 2
    assert run_command(["--help"]) == 0
    capsys.readouterr()


def test_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[problem]\nid = ex53\n[grid]\nn = -4\n")
    assert run_command(["trace", "--config", str(cfg)]) == 2
    assert "line 4" in capsys.readouterr().err
    assert run_command(["trace", "--config", str(tmp_path / "none.cfg")]) == 2


def test_solve_converges(tmp_path, capsys):
    assert run_command(["solve", "--problem", "ex53", "--lambda", "0", "--n", "32", "--output", str(tmp_path)]) == 0
    assert "c1_norm" in capsys.readouterr().out
    assert (tmp_path / "solution.csv").exists()


def test_solve_beyond_lambda_hat(capsys):
    code = run_command(["solve", "--problem", "ex52", "--lambda", "5", "--n", "32", "--starts", "3"])
    assert code == 1
    assert "NoConvergence" in capsys.readouterr().err


def test_solve_out_of_interval(capsys):
    assert run_command(["solve", "--problem", "ex53", "--lambda", "1.5", "--n", "16"]) == 1
    assert "LambdaOutOfDomain" in capsys.readouterr().err


def test_trace_and_diagram(tmp_path, capsys):
    out = tmp_path / "run"
    assert run_command(["trace", "--config", str(CONFIGS / "ex52.cfg"), "--n", "32", "--output", str(out)]) == 0
    err = capsys.readouterr().err
    assert "total degree 1" in err and "UnboundedInX_BoundedLambda" in err
    table = read_branch_csv(out / "branch.csv")
    assert max(abs(table.lambdas)) <= 1.001
    assert (out / "diagram.svg").exists()
    svg = tmp_path / "again.svg"
    assert run_command(["diagram", str(out / "branch.csv"), "--output", str(svg), "--problem", "ex52",
                        "--ceiling", "50"]) == 0
    text = svg.read_text()
    assert text.count("guide-lambda-hat") == 2 and "guide-ceiling" in text
    assert run_command(["diagram", str(out / "branch.csv"), "--output", str(svg),
                        "--lambda-interval", "-1,1"]) == 0
    assert svg.read_text().count("guide-interval") == 2
    assert run_command(["diagram", str(out / "branch.csv"), "--lambda-interval", "1"]) == 2
    assert run_command(["diagram", str(tmp_path / "missing.csv")]) == 1


def test_trace_problem_mismatch(capsys):
    assert run_command(["trace", "--config", str(CONFIGS / "ex52.cfg"), "--problem", "ex53"]) == 2


def test_seed_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PHIBRANCH_SEED", "not-a-number")
    assert run_command(["solve", "--problem", "ex53", "--lambda", "0", "--n", "16"]) == 2
