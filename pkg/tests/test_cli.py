import json
import subprocess
import sys

import numpy as np
import pytest

from perflat import GainLossRatio, XVar, coin2, lpm_ratio, random_tree
from perflat.cli import main
from perflat.lattice import dump_json


@pytest.fixture
def files(tmp_path):
    space = coin2()
    paths = {
        "space": tmp_path / "coin2.json",
        "glr": tmp_path / "glr.json",
        "lpm": tmp_path / "lpm.json",
        "x": tmp_path / "x.json",
        "dir": tmp_path,
    }
    dump_json(space.to_json(), paths["space"])
    dump_json(GainLossRatio().to_json(), paths["glr"])
    dump_json(lpm_ratio(2.0).to_json(), paths["lpm"])
    dump_json(XVar(space, [3.0, -1.0]).to_json(), paths["x"])
    return {k: str(v) if k != "dir" else v for k, v in paths.items()}


def test_evaluate_prints_two(files, capsys):
    code = main(["evaluate", "--measure", files["glr"], "--space",
                 files["space"], "--var", files["x"], "--t", "0"])
    assert code == 0
    assert capsys.readouterr().out.strip() == "2"


def test_induce_prints_zero(files, capsys):
    code = main(["induce", "--measure", files["glr"], "--space", files["space"],
                 "--var", files["x"], "--t", "0", "--z", "2"])
    assert code == 0
    assert capsys.readouterr().out.strip() == "0"


def test_space_filename_is_not_its_identity(files, tmp_path, capsys):
    # exported variables reference the embedded space name, not the file stem
    renamed = tmp_path / "whatever.json"
    renamed.write_bytes((tmp_path / "coin2.json").read_bytes())
    code = main(["evaluate", "--measure", files["glr"], "--space",
                 str(renamed), "--var", files["x"], "--t", "0"])
    assert code == 0
    assert capsys.readouterr().out.strip() == "2"


def test_validate_space_failure_names_invariant(files, tmp_path, capsys):
    bad = coin2().to_json()
    bad["leaves"][0]["p"] = 0.4
    bad_path = tmp_path / "bad.json"
    dump_json(bad, bad_path)
    code = main(["validate-space", str(bad_path)])
    assert code == 1
    payload = json.loads(capsys.readouterr().out)
    assert "sum to" in payload["error"]["message"]


def test_malformed_json_reports_position(tmp_path, capsys):
    mangled = tmp_path / "mangled.json"
    mangled.write_text('{"times": [0,\n  broken')
    code = main(["validate-space", str(mangled)])
    assert code == 1
    payload = json.loads(capsys.readouterr().out)
    assert payload["error"]["line"] == 2
    assert "column" in payload["error"]


def test_usage_errors_exit_two(files, capsys):
    assert main(["no-such-command"]) == 2
    assert main(["evaluate", "--space", files["space"]]) == 2  # missing flags
    capsys.readouterr()


def test_missing_file_exit_one(files, capsys):
    code = main(["evaluate", "--measure", "nope.json", "--space",
                 files["space"], "--var", files["x"], "--t", "0"])
    assert code == 1
    assert "file not found" in capsys.readouterr().out


def test_bad_tolerance_rejected(files, capsys):
    code = main(["induce", "--measure", files["glr"], "--space", files["space"],
                 "--var", files["x"], "--t", "0", "--z", "2",
                 "--tol-c", "-1"])
    assert code == 1
    assert "tolerance" in capsys.readouterr().out


def test_artifacts_are_byte_identical(files, capsys):
    out1 = files["dir"] / "a1.json"
    out2 = files["dir"] / "a2.json"
    for out in (out1, out2):
        assert main(["check-axioms", "--measure", files["glr"], "--space",
                     files["space"], "--t", "0", "--trials", "40",
                     "--out", str(out)]) == 0
    capsys.readouterr()
    assert out1.read_bytes() == out2.read_bytes()


def test_curve_csv_and_artifact(files, capsys):
    out = files["dir"] / "curve.csv"
    code = main(["curve", "--measure", files["glr"], "--space", files["space"],
                 "--var", files["x"], "--t", "0", "--z-list", "0.5,1,2",
                 "--format", "csv", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "atom_id,z,rho"
    assert len(lines) == 4
    capsys.readouterr()


def test_curve_without_grid_fails(files, capsys):
    code = main(["curve", "--measure", files["glr"], "--space", files["space"],
                 "--var", files["x"], "--t", "0"])
    assert code == 1
    assert "grid" in capsys.readouterr().out


def test_reconstruct_reports_small_gap(files, capsys):
    code = main(["reconstruct", "--measure", files["glr"], "--space",
                 files["space"], "--var", files["x"], "--t", "0"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "2"


def test_dual_agrees_with_bisection(files, capsys):
    out = files["dir"] / "dual.json"
    code = main(["dual", "--space", files["space"], "--var", files["x"],
                 "--t", "0", "--z", "2", "--out", str(out)])
    assert code == 0
    assert capsys.readouterr().out.splitlines()[0] == "0"
    artifact = json.loads(out.read_text())
    assert float(artifact["max_gap"]) <= 1e-6


def test_consistency_writes_witness(tmp_path, capsys):
    tree = random_tree(np.random.default_rng(6))
    space_path = tmp_path / "tree.json"
    lpm_path = tmp_path / "lpm.json"
    dump_json(tree.to_json(), space_path)
    dump_json(lpm_ratio(2.0).to_json(), lpm_path)
    wpath = tmp_path / "w.json"
    code = main(["check-consistency", "--measure", str(lpm_path), "--space",
                 str(space_path), "--trials", "60", "--seed", "0",
                 "--witness-out", str(wpath)])
    assert code == 0  # a counterexample is a finding, not a failure
    assert "counterexample" in capsys.readouterr().out
    w = json.loads(wpath.read_text())
    assert set(w["values"]) == set(tree.leaf_ids)


def test_consistency_consistent_measure_writes_nothing(files, tmp_path, capsys):
    wpath = tmp_path / "w.json"
    code = main(["check-consistency", "--measure", files["glr"], "--space",
                 files["space"], "--trials", "20",
                 "--witness-out", str(wpath)])
    assert code == 0
    assert not wpath.exists()
    capsys.readouterr()


def test_paper_demo_passes(capsys):
    assert main(["paper-demo"]) == 0
    out = capsys.readouterr().out
    assert "[FAIL]" not in out


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "perflat.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "paper-demo" in proc.stdout
