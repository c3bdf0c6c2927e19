import dataclasses
import json
import shutil
import subprocess
from importlib import resources
from pathlib import Path

import jsonschema
import pytest

from chorcc import corpus, serial
from chorcc import syntax as s
from chorcc.cli import EXIT_DEADLOCK, EXIT_FAIL, EXIT_PASS, EXIT_USAGE, main

SCHEMA = json.loads(resources.files("chorcc").joinpath("schemas/cli-output.schema.json").read_text())


@pytest.fixture
def ring(tmp_path) -> Path:
    return Path(shutil.copy(corpus.load("ring").path, tmp_path / "ring.chor"))


@pytest.fixture
def exchange(tmp_path) -> Path:
    return Path(shutil.copy(corpus.load("exchange").path, tmp_path / "exchange.chor"))


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--json")
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    assert doc["exit_code"] == code
    return code, doc


def test_equiv_run_passes(capsys, ring):
    code, out, _ = run(capsys, "run", "--mode", "equiv", ring, "--params", "n=4")
    assert code == EXIT_PASS
    assert "EQUAL" in out.splitlines()


def test_missing_input_is_a_usage_error(capsys, tmp_path):
    code, _, err = run(capsys, "parse", tmp_path / "missing.chor")
    assert code == EXIT_USAGE
    assert "cannot read" in err


def test_parse_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.chor"
    bad.write_text("choreography X() { run { endpoint a: ; } }")
    code, doc = run_json(capsys, "check", bad)
    assert code == EXIT_USAGE and doc["diagnostics"]


def test_bad_flags_are_a_usage_error(capsys, ring):
    assert run(capsys, "run", ring, "--mode", "nope")[0] == EXIT_USAGE
    assert run(capsys, "run", ring, "--params", "n")[0] == EXIT_USAGE


def test_ill_formed_program_fails_the_check(capsys, tmp_path, exchange):
    bad = tmp_path / "bad.chor"
    bad.write_text(exchange.read_text().replace("endpoint a: a.bump();", "endpoint a: a.nope();"))
    code, doc = run_json(capsys, "check", bad)
    assert code == EXIT_FAIL
    assert doc["result"]["errors"] >= 1


def test_failing_check_exits_one(capsys, tmp_path, exchange):
    bad = tmp_path / "bad.chor"
    bad.write_text(exchange.read_text().replace("endpoint a: a.bump();", "endpoint a: b.y := 9; endpoint a: a.bump();"))
    code, doc = run_json(capsys, "run", bad, "--mode", "ir")
    assert code == EXIT_FAIL
    kinds = [f["kind"] for f in doc["result"]["ir"]["failures"]]
    assert kinds.count("CONFINEMENT") == 1


def test_deadlock_exits_two(capsys, tmp_path, exchange):
    out_dir = tmp_path / "eps"
    assert run(capsys, "project-ep", exchange, "--all", "--out", out_dir)[0] == EXIT_PASS
    a = serial.from_json((out_dir / "a.ep.json").read_text())
    (out_dir / "a.ep.json").write_text(serial.to_json(dataclasses.replace(a, body=s.Block())))
    code, out, _ = run(capsys, "run", exchange, "--mode", "endpoints", "--programs", out_dir)
    assert code == EXIT_DEADLOCK
    assert out.splitlines()[-1] == "DEADLOCK"


def test_project_ep_all_lists_files(capsys, tmp_path, ring):
    out_dir = tmp_path / "out"
    code, doc = run_json(capsys, "project-ep", "--all", ring, "--out", out_dir)
    assert code == EXIT_PASS
    names = sorted(p.name for p in out_dir.iterdir())
    assert {"F.ep.json", "G.ep.json", "channels.json"} <= set(names)
    assert names == sorted(Path(f).name for f in doc["result"]["files"])
    assert json.loads((out_dir / "channels.json").read_text()) == {"0": {"sender": "F", "receiver": "G"}}


def test_project_ep_single_sort(capsys, tmp_path, ring):
    out_dir = tmp_path / "out"
    assert run(capsys, "project-ep", ring, "--sort", "G", "--out", out_dir)[0] == EXIT_PASS
    assert sorted(p.name for p in out_dir.iterdir()) == ["G.ep.json", "G.ep.txt"]
    assert run(capsys, "project-ep", ring, "--sort", "Q", "--out", out_dir)[0] == EXIT_FAIL


@pytest.mark.parametrize("command", [["project-chor"], ["project-ep", "--all"], ["parse"]])
def test_outputs_are_idempotent(capsys, tmp_path, ring, command):
    first, second = tmp_path / "one", tmp_path / "two"
    for d in (first, second):
        assert run(capsys, *command, ring, "--out", d)[0] == EXIT_PASS
    files = sorted(p.name for p in first.iterdir())
    assert files and files == sorted(p.name for p in second.iterdir())
    for name in files:
        assert (first / name).read_bytes() == (second / name).read_bytes()


@pytest.mark.parametrize("command", [["parse"], ["check"], ["project-chor"], ["run", "--mode", "equiv"]])
def test_json_output_matches_the_schema(capsys, ring, command):
    code, doc = run_json(capsys, *command, ring)
    assert code == EXIT_PASS and doc["status"] == "ok" and doc["error"] is None


def test_random_schedules(capsys, ring):
    code, doc = run_json(capsys, "run", ring, "--mode", "endpoints", "--schedule", "random", "--seeds", "5")
    assert code == EXIT_PASS
    assert [r["seed"] for r in doc["result"]["endpoints"]] == [0, 1, 2, 3, 4]
    assert doc["result"]["distinct_heaps"] == 1


def test_config_supplies_defaults_and_flags_win(capsys, tmp_path, ring):
    cfg = tmp_path / "chorcc.toml"
    cfg.write_text('seeds = 3\nschedule = "random"\n\n[params]\nn = 2\nrounds = 1\n')
    code, doc = run_json(capsys, "run", ring, "--mode", "endpoints", "--config", cfg)
    assert code == EXIT_PASS
    assert doc["result"]["params"] == {"n": 2, "rounds": 1}
    assert len(doc["result"]["endpoints"]) == 3
    code, doc = run_json(capsys, "run", ring, "--mode", "chor", "--config", cfg, "--params", "n=5")
    assert doc["result"]["params"] == {"n": 5, "rounds": 1}


def test_invalid_config_is_a_usage_error(capsys, tmp_path, ring):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("seeds = = 3")
    assert run(capsys, "run", ring, "--config", cfg)[0] == EXIT_USAGE


def test_installed_script(ring):
    exe = shutil.which("chorcc")
    if exe is None:
        pytest.skip("chorcc script is not on PATH")
    proc = subprocess.run([exe, "run", str(ring), "--params", "n=3"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.splitlines()[-1] == "PASS"
