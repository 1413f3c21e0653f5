import json
import subprocess
import sys

import pytest

from resman.cli import EXIT_ERROR, EXIT_INVALID, EXIT_OK, main


@pytest.fixture
def bad_config(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"latency": {"f_LM": {"S1": 350, "S2": 1800, "S3": 3600}}}))
    return str(path)


def test_validate_default(capsys):
    assert main(["validate"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "ok C_CP * C_BS refines C_LM" in out
    assert "ok C_LM * C_EC refines C_MC" in out


def test_validate_mutated(bad_config, capsys):
    assert main(["validate", "--config", bad_config]) == EXIT_INVALID
    out = capsys.readouterr().out
    assert "FAIL C_CP * C_BS refines C_LM" in out
    assert "at S1: deadline 400 > 350" in out


def test_run_refuses_invalid_config(bad_config):
    assert main(["run", "--config", bad_config]) == EXIT_INVALID


def test_run_and_compare(tmp_path, capsys):
    paths = []
    for arch in ("hierarchical", "centralized", "decentralized"):
        path = tmp_path / f"{arch}.jsonl"
        assert main(["run", "--arch", arch, "--out", str(path)]) == EXIT_OK
        paths.append(str(path))
    capsys.readouterr()
    assert main(["compare", *paths]) == EXIT_OK
    out = capsys.readouterr().out
    assert "messages 21/48 (56% saved)" in out
    assert "messages 21/108 (81% saved)" in out


def test_run_stdout_csv(capsys):
    assert main(["run", "--format", "csv", "--accounting", "physical"]) == EXIT_OK
    captured = capsys.readouterr()
    assert captured.out.splitlines()[-1].endswith(",23,13,,,0,29.5")
    assert "note: messages = 23" in captured.err


def test_trace(tmp_path):
    path = tmp_path / "t.jsonl"
    assert main(["trace", "--out", str(path)]) == EXIT_OK
    records = [json.loads(line)["record"] for line in path.read_text().splitlines()[1:]]
    assert records.count("message") == 23 and records.count("decision") == 13


def test_runtime_errors(tmp_path, capsys):
    assert main(["compare", str(tmp_path / "missing.jsonl"), "x"]) == EXIT_ERROR
    assert main(["run", "--scenario", str(tmp_path / "missing.json")]) == EXIT_ERROR
    (tmp_path / "s.json").write_text("{")
    assert main(["run", "--scenario", str(tmp_path / "s.json")]) == EXIT_ERROR
    assert "error:" in capsys.readouterr().err


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "resman.cli", "validate"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
