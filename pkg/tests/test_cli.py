import json
import re
import subprocess
import sys
from pathlib import Path

import pytest

from srkit import __version__
from srkit.algebra import FullMatrix
from srkit.cli import main

CORPUS = Path(__file__).parent / "data" / "formulas.txt"


def run(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = main(argv + ["--out", str(out)])
    return code, (out.read_text() if out.exists() else None)


def strip_timestamp(text):
    return re.sub(r'"timestamp": "[^"]*"', '"timestamp": ""', text)


# ------------------------------------------------------------------ exit codes


def test_unknown_subcommand_exits_2(capsys):
    assert main(["frobnicate"]) == 2


def test_missing_algebra_file_exits_2(tmp_path, capsys):
    code, _ = run(["dist", "--algebra", str(tmp_path / "nope.json")], tmp_path)
    assert code == 2
    assert "does not exist" in capsys.readouterr().err


def test_malformed_algebra_json_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["dist", "--algebra", str(bad)], tmp_path)[0] == 2


def test_nonpositive_budget_exits_2(tmp_path, capsys):
    assert run(["phi", "--algebra", "matrix:2", "--budget", "0"], tmp_path)[0] == 2


def test_parse_error_exits_2(tmp_path, capsys):
    code, _ = run(["parse", "--formula", "sup x. norm("], tmp_path)
    assert code == 2
    assert "offset" in capsys.readouterr().err


def test_invariant_violation_exits_3(tmp_path, capsys):
    # a random matrix element has distance 0, so no maximal-distance witness exists
    code, _ = run(["witness", "--algebra", "matrix:2", "--element", "random"], tmp_path)
    assert code == 3
    assert "invariant violated [dist(a, Lg_n) > 0]" in capsys.readouterr().err


def test_csv_only_where_tabular(tmp_path, capsys):
    assert run(["dist", "--algebra", "matrix:2", "--format", "csv"], tmp_path)[0] == 2


# ------------------------------------------------------------------ commands


def test_dist_report_contents(tmp_path):
    code, text = run(["dist", "--algebra", "disk", "--mesh-res", "32", "--element", "coordinate"], tmp_path)
    assert code == 0
    doc = json.loads(text)
    assert doc["command"] == "dist" and doc["version"] == __version__
    assert doc["config"]["seed"] == 0 and doc["config"]["mesh_res"] == 32
    cert = doc["result"]["certificate"]
    assert cert["lower"] >= 0.9 and cert["upper"] <= 1 + 1e-6 and cert["lower_method"] == "winding"


def test_algebra_spec_file(tmp_path):
    spec = tmp_path / "m3.json"
    spec.write_text(json.dumps(FullMatrix(3).to_doc()))
    code, text = run(["sr", "--algebra", str(spec), "--budget", "8"], tmp_path)
    assert code == 0 and json.loads(text)["result"]["sr"] == "1"


def test_witness_on_disk(tmp_path):
    code, text = run(["witness", "--algebra", "disk", "--mesh-res", "32", "--element", "scaled:2:coordinate"], tmp_path)
    assert code == 0
    res = json.loads(text)["result"]
    assert 0.99 <= res["witness_norm"] <= 1.0
    assert res["witness_certificate"]["lower"] >= 0.9


def test_phi_command(tmp_path):
    code, text = run(["phi", "--algebra", "matrix:3", "--n", "1"], tmp_path)
    assert code == 0
    res = json.loads(text)["result"]
    assert res["phi"]["upper"] <= 0.05 and res["in_band"] is False


def test_kk_command(tmp_path):
    code, text = run(["kk", "--algebra", "directsum:1,1", "--other", "matrix:2", "--budget", "16"], tmp_path)
    assert code == 0
    assert json.loads(text)["result"]["certificate"]["lower"] >= 0.99
    code, text = run(["kk", "--algebra", "matrix:2", "--eps", "0.05"], tmp_path, "b.json")
    assert code == 0
    assert json.loads(text)["result"]["certificate"]["upper"] <= 0.1 + 1e-6


def test_parse_corpus(tmp_path):
    code, text = run(["parse", "--corpus", str(CORPUS)], tmp_path)
    assert code == 0
    res = json.loads(text)["result"]
    assert res["all_round_trip"] and len(res["formulas"]) == 20


def test_verify_lemmas_small(tmp_path):
    code, text = run(["verify-lemmas", "--instances", "20", "--seed", "42"], tmp_path)
    assert code == 0
    suites = json.loads(text)["result"]["suites"]
    assert suites[0]["passed"] == 20 and suites[1]["passed"] == 10


def test_perturb_experiment_csv(tmp_path):
    code, text = run(
        ["perturb-experiment", "--pairs", "3", "--disk-pairs", "0", "--n", "1", "--budget", "4", "--format", "csv"],
        tmp_path, "exp.csv",
    )
    assert code == 0
    lines = text.strip().splitlines()
    assert lines[0].startswith("index,kind,eps") and len(lines) == 4


# ------------------------------------------------------------------ determinism


@pytest.mark.parametrize(
    "argv",
    [
        ["dist", "--algebra", "matrix:3", "--element", "random", "--seed", "5"],
        ["phi", "--algebra", "interval", "--mesh-res", "32", "--budget", "8", "--seed", "2"],
        ["kk", "--algebra", "directsum:1,2", "--eps", "0.2", "--budget", "8", "--seed", "3"],
        ["parse", "--corpus", str(CORPUS)],
    ],
)
def test_reports_identical_modulo_timestamp(argv, tmp_path):
    c1, t1 = run(argv, tmp_path, "a.json")
    c2, t2 = run(argv, tmp_path, "b.json")
    assert c1 == c2 == 0
    assert t1 != strip_timestamp(t1)
    assert strip_timestamp(t1) == strip_timestamp(t2)


def test_module_entry_point(tmp_path):
    out = tmp_path / "p.json"
    proc = subprocess.run(
        [sys.executable, "-m", "srkit", "parse", "--formula", "sup x:ball1(A^1). norm(x)", "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert json.loads(out.read_text())["result"]["all_round_trip"] is True
