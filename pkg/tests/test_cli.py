import csv
import json
import subprocess
import sys

import pytest

from qspiral.cli import load_problem, main


def _write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


@pytest.fixture
def cubic(tmp_path):
    return _write(tmp_path, "cubic.json", {"q": {"re": 2, "im": 0}, "m": "(1 - x^3)"})


@pytest.fixture
def operator(tmp_path):
    return _write(tmp_path, "op.json", {"q": 2, "coeffs": ["4", "-5", "1"]})


def test_solve_writes_catalog(cubic, tmp_path):
    out = tmp_path / "sol.json"
    assert main(["solve", "--problem", cubic, "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["kind"] == "homogeneous"
    assert payload["catalog"][0]["direction"] == "N*"
    assert payload["catalog"][0]["order"] == 1


def test_verify_homogeneous_passes(cubic, tmp_path):
    out = tmp_path / "v.json"
    assert main(["verify", "--problem", cubic, "--out", str(out), "--points", "40"]) == 0
    report = json.loads(out.read_text())
    assert report["verdict"] == "PASS"
    assert report["residual"]["max_rel_residual"] <= 1e-10


def test_verify_operator(operator, tmp_path):
    out = tmp_path / "v.json"
    assert main(["verify", "--problem", operator, "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["factorization"]["verdict"] == "PASS"


def test_verify_failure_exit_code(tmp_path):
    bad = _write(tmp_path, "bad.json", {"q": 2, "m": "(1 - x^3)",
                                        "tolerances": {"residual": 1e-30}})
    assert main(["verify", "--problem", bad, "--out", str(tmp_path / "v.json"),
                 "--no-catalog"]) == 1


def test_polygon(operator, tmp_path):
    out = tmp_path / "p.json"
    assert main(["polygon", "--problem", operator, "--out", str(out)]) == 0
    slopes = json.loads(out.read_text())["slopes"]
    assert slopes == [{"slope": "0", "multiplicity": 2}]


def test_grid_is_deterministic(tmp_path):
    prob = _write(tmp_path, "sin.json", {"q": 2, "m": "sin(x)", "annulus": [0.4, 2.5],
                                         "grid": [6, 8]})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["--seed", "7", "grid", "--problem", prob, "--out", str(a)]) == 0
    assert main(["--seed", "7", "grid", "--problem", prob, "--out", str(b)]) == 0
    assert a.read_text() == b.read_text()
    lines = a.read_text().splitlines()
    assert lines[0].startswith("# spec_hash=") and "seed=7" in lines[0]
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 48
    assert set(rows[0]) == {"re", "im", "abs_y", "arg_y", "near_singularity"}
    assert any(r["near_singularity"] == "1" for r in rows)


def test_bad_q_is_usage_error(tmp_path):
    prob = _write(tmp_path, "bad.json", {"q": 0.5, "m": "x"})
    assert main(["solve", "--problem", prob]) == 2


def test_missing_file_and_unknown_command(tmp_path):
    assert main(["solve", "--problem", str(tmp_path / "nope.json")]) == 2
    assert main(["frobnicate"]) == 2


def test_problem_kind_inference_and_hash():
    a = load_problem({"q": 2, "m": "x"})
    b = load_problem({"m": "x", "q": 2})
    assert a.kind == "homogeneous" and a.spec_hash == b.spec_hash
    assert load_problem({"q": 2, "m": "x", "r": {"num": [1], "den": [-0.5, 1]}}).kind == "inhomogeneous"
    assert load_problem({"q": 2, "coeffs": ["1", "1"]}).kind == "operator"


def test_selftest_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qspiral.cli", "selftest"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.count("PASS") >= 10
