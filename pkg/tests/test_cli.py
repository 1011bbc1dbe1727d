import csv
import json
import os
import subprocess
import sys

import pytest

from pucci.cli import main, write_atomic

KERNEL = {"phi": {"family": "power", "beta": 0.5}, "lambda": 1.0, "Lambda": 2.0, "alpha": 1.0}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_verify_kernel(tmp_path):
    c = write(tmp_path, {"command": "verify-kernel", "seed": 3, "kernel": KERNEL})
    out = tmp_path / "vk.json"
    assert main(["verify-kernel", "--config", c, "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["schema_version"] == 1 and rep["seed"] == 3 and rep["pass"] is True
    assert rep["dini_integral"] == pytest.approx(2.0, rel=1e-8)


def test_barrier_outputs_and_determinism(tmp_path):
    doc = {"command": "barrier", "kernel": KERNEL, "barrier": {"r": 1.0, "dim": 1}}
    c = write(tmp_path, doc)
    a, b = tmp_path / "a" / "bar.json", tmp_path / "b" / "bar.json"
    assert main(["barrier", "--config", c, "--out", str(a)]) == 0
    assert main(["barrier", "--config", c, "--out", str(b), "--threads", "1"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".csv").read_bytes() == b.with_suffix(".csv").read_bytes()
    rep = json.loads(a.read_text())
    assert rep["pass"] and rep["grid_min"] >= -1e-6
    rows = list(csv.reader(a.with_suffix(".csv").open()))
    assert rows[0] == ["alpha", "radius", "value", "error", "value_half_h"]


def test_config_error_exit_code(tmp_path, capsys):
    bad = dict(KERNEL, alpha=2.5)
    c = write(tmp_path, {"command": "verify-kernel", "kernel": bad})
    out = tmp_path / "x.json"
    assert main(["verify-kernel", "--config", c, "--out", str(out)]) == 2
    assert "kernel" in capsys.readouterr().err and not out.exists()
    c2 = write(tmp_path, {"command": "barrier", "kernel": KERNEL,
                          "barrier": {"r": 1.0, "p": 2.0, "delta": 0.5}}, "c2.json")
    assert main(["barrier", "--config", c2, "--out", str(out)]) == 2
    assert main(["solve", "--config", c2, "--out", str(out)]) == 2  # command mismatch


def test_missing_config_is_io_error(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "o.csv")]) == 3


def test_unwritable_output_is_io_error(tmp_path):
    c = write(tmp_path, {"command": "verify-kernel", "kernel": KERNEL})
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["verify-kernel", "--config", c, "--out", str(blocker / "sub" / "o.json")]) == 3


def test_solve_and_eval(tmp_path):
    doc = {"command": "solve", "kernel": KERNEL, "seed": 1,
           "solve": {"grid": {"dim": 1, "R": 1.0, "N": 64}, "f": "-1", "g": "0",
                     "operator": {"type": "extremal", "variant": "MPlus"}}}
    out = tmp_path / "sol.csv"
    assert main(["solve", "--config", write(tmp_path, doc), "--out", str(out), "--seed", "9"]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["x0", "value"] and len(rows) == 66
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["seed"] == 9 and summary["residual"] <= summary["tol"]
    pts = tmp_path / "pts.csv"
    pts.write_text("x0\n0.0\n0.5\n")
    ev = {"command": "eval", "kernel": KERNEL,
          "eval": {"grid": {"dim": 1, "R": 2.0, "N": 64}, "u": "(1 - x**2)**2*ball(1)",
                   "operator": {"type": "extremal", "variant": "MMinus", "scale": 1}}}
    eo = tmp_path / "ev.csv"
    assert main(["eval", "--config", write(tmp_path, ev, "ev.json"), "--out", str(eo), "--points", str(pts)]) == 0
    rows = list(csv.reader(eo.open()))
    assert rows[0] == ["x0", "value", "near", "mid", "tail", "err"] and len(rows) == 3


def test_eval_off_grid_point_fails(tmp_path):
    ev = {"command": "eval", "kernel": KERNEL,
          "eval": {"grid": {"dim": 1, "R": 2.0, "N": 64}, "u": "ball(1)", "points": [[0.01]],
                   "operator": {"type": "extremal", "variant": "MPlus"}}}
    out = tmp_path / "ev.csv"
    assert main(["eval", "--config", write(tmp_path, ev), "--out", str(out)]) == 2
    assert not out.exists()


def test_lab_outputs(tmp_path):
    lab = {"grid": {"dim": 1, "R": 2.0, "N": 64}, "g": "ball(2) - ball(1)",
           "operator": {"type": "linear", "c_stable": 1.5, "c_phi": 1.5}, "class": "A4",
           "alphas": [1.0], "phi_families": ["power", "logpower"], "measurements": [{"kind": "harnack"}]}
    d = tmp_path / "lab"
    assert main(["lab", "--config", write(tmp_path, {"command": "lab", "lab": lab}), "--out-dir", str(d)]) == 0
    assert sorted(os.listdir(d)) == ["lab.csv", "logpower_alpha1.json", "power_alpha1.json"]
    rows = list(csv.reader((d / "lab.csv").open()))
    assert rows[0][:3] == ["alpha", "phi_family", "quotient"] and len(rows) == 3


def test_write_atomic_leaves_nothing_on_failure(tmp_path):
    files = {tmp_path / "a.txt": "ok", tmp_path / "b.txt": object()}
    with pytest.raises(TypeError):
        write_atomic(files)
    assert os.listdir(tmp_path) == []


def test_console_script_entry_point(tmp_path):
    c = write(tmp_path, {"command": "verify-kernel", "kernel": KERNEL})
    r = subprocess.run([sys.executable, "-m", "pucci.cli", "verify-kernel", "--config", c,
                        "--out", str(tmp_path / "o.json")], capture_output=True)
    assert r.returncode == 0
