import csv
import io
import json
import subprocess
import sys

import pytest

from flexkit.cli import main
from conftest import DATA

A = str(DATA / "design_a.json")
B = str(DATA / "design_b.json")
ELL = str(DATA / "ellipsoid_2d.json")
BOX = str(DATA / "hyperbox_2d.json")
GAUSS = str(DATA / "gaussian_2d.json")
NET = str(DATA / "three_node_design1.json")
NET_SET = str(DATA / "three_node_ellipsoid.json")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# flexkit ")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_index_json(capsys):
    code, out, _ = run(capsys, "index", "--system", A, "--set", ELL, "--samples", "2000")
    assert code == 0
    data = json.loads(out)
    assert data["provenance"]["command"] == "index"
    assert data["provenance"]["seed"] == 0
    assert "tol-feas" in data["provenance"]["tolerances"]
    assert data["result"]["F"] == 3.57143
    assert data["result"]["active"] == ["f1"]
    assert data["result"]["verification"]["violations"] == 0


def test_sf(capsys):
    code, out, _ = run(capsys, "sf", "--system", A, "--dist", GAUSS, "--samples", "20000", "--seed", "7")
    assert code == 0
    est = json.loads(out)["result"]
    assert abs(est["estimate"] - 0.966) < 0.01
    assert est["samples"] == 20000 and est["seed"] == 7
    assert "elapsed_seconds" not in est


def test_rank_csv(capsys):
    code, out, _ = run(capsys, "rank", "--system", A, "--set", ELL, "--levels", "4", "--format", "csv")
    assert code == 0
    rows = _csv(out)
    assert [r["constraints"] for r in rows] == ["f1", "f2", "f3", "f4"]
    assert [r["F"] for r in rows] == ["3.57143", "6.4", "8", "8.33333"]
    assert rows[0]["increase_pct"] == ""
    assert list(rows[0]) == ["rank", "constraints", "F", "increase_pct"]


def test_center(capsys):
    code, out, _ = run(capsys, "center", "--system", A, "--method", "feasible")
    assert code == 0
    assert json.loads(out)["result"]["theta_bar"] == [4.66667, 4.66667]


def test_compare_csv(capsys, tmp_path):
    target = tmp_path / "table.csv"
    code, _, _ = run(capsys, "compare", "--system", A, "--system", B, "--set", BOX, "--set", ELL,
                     "--dist", GAUSS, "--samples", "5000", "--out", str(target))
    assert code == 0
    rows = _csv(target.read_text())
    assert list(rows[0]) == ["design", "F_box", "F_ellip", "alpha_star_pct", "SF_pct"]
    assert [r["design"] for r in rows] == ["design_a", "design_b"]
    assert rows[1]["F_ellip"] == "6.4"


def test_network_commands(capsys, tmp_path):
    code, out, _ = run(capsys, "network", "build", "--network", NET)
    assert code == 0
    assert len(json.loads(out)["inequalities"]) == 6
    code, out, _ = run(capsys, "network", "rank", "--network", NET, "--set", NET_SET, "--format", "dot")
    assert code == 0
    assert out.startswith("// flexkit ") and "digraph" in out
    code, out, _ = run(capsys, "network", "rank", "--network", NET, "--set", NET_SET, "--format", "csv")
    rows = _csv(out)
    assert rows[0]["component"] == "supplier:2" and rows[0]["F"] == "4.31034"


@pytest.mark.parametrize("argv", [
    ["index", "--system", A, "--set", ELL, "--format", "csv"],
    ["sf", "--system", B, "--dist", GAUSS, "--samples", "3000", "--seed", "3"],
    ["rank", "--system", A, "--set", BOX],
    ["network", "rank", "--network", NET, "--set", NET_SET, "--format", "dot"],
])
def test_byte_identical(capsys, tmp_path, argv):
    outs = []
    for k in range(2):
        path = tmp_path / f"o{k}"
        assert main(argv + ["--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_input_errors(capsys, tmp_path):
    code, _, err = run(capsys, "index", "--system", str(tmp_path / "missing.json"), "--set", ELL)
    assert code == 3 and err.count("\n") == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "index", "--system", bad.as_posix(), "--set", ELL)[0] == 3
    with pytest.raises(SystemExit) as info:
        main(["index", "--system", A])
    assert info.value.code == 3
    with pytest.raises(SystemExit) as info:
        main(["rank", "--system", A, "--set", ELL, "--bogus"])
    assert info.value.code == 3
    odd = tmp_path / "odd.json"
    odd.write_text(json.dumps({"type": "ellipsoid", "mean": [4, 5, 6], "covariance": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}))
    assert run(capsys, "index", "--system", A, "--set", str(odd))[0] == 3


def test_solver_error_exit(capsys, tmp_path):
    outside = tmp_path / "outside.json"
    outside.write_text(json.dumps({"type": "ellipsoid", "mean": [10, 5], "covariance": [[2, 1], [1, 3]]}))
    code, _, err = run(capsys, "index", "--system", A, "--set", str(outside))
    assert code == 2 and "solver error" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "flexkit", "center", "--system", A, "--format", "csv"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.splitlines()[1] == "method,theta1,theta2,psi_at_center"
