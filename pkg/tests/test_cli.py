import json
import subprocess
import sys

import numpy as np
import pytest

from rknn import cli
from rknn.export import read_points, write_points
from rknn.optimize import OptimizationError


def spec_file(tmp_path, obj, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


TORUS = {"domain": {"kind": "torus", "period": [1.0], "d": 1}, "model": {"s": 2, "k": 2}, "N": 60, "seed": 1}


def test_generate_torus(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["generate", "--spec", spec_file(tmp_path, TORUS), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["rescaled_energy"] == pytest.approx(2.0, abs=1e-6)
    assert set(summary) >= {"final_energy", "rescaled_energy", "separation", "covering_radius", "iterations", "stop_reason"}
    x = read_points(out / "points.csv")
    assert x.shape == (60, 1)
    assert (out / "trace.csv").read_text().startswith("iter,energy,grad_norm,separation\n")
    capsys.readouterr()


def test_generate_is_byte_identical(tmp_path):
    spec = spec_file(tmp_path, TORUS)
    for name, threads in (("a", []), ("b", []), ("c", ["--threads", "2"])):
        assert cli.main(["generate", "--spec", spec, "--out", str(tmp_path / name)] + threads) == 0
    for f in ("points.csv", "trace.csv", "summary.json"):
        ref = (tmp_path / "a" / f).read_bytes()
        assert (tmp_path / "b" / f).read_bytes() == ref
        assert (tmp_path / "c" / f).read_bytes() == ref


def test_seed_flag_overrides_spec(tmp_path):
    spec = spec_file(tmp_path, {**TORUS, "N": 10})
    cli.main(["generate", "--spec", spec, "--out", str(tmp_path / "a"), "--seed", "5"])
    cli.main(["generate", "--spec", spec, "--out", str(tmp_path / "b"), "--seed", "6"])
    assert (tmp_path / "a" / "trace.csv").read_bytes() != (tmp_path / "b" / "trace.csv").read_bytes()


def test_schema_errors_write_nothing(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out = tmp_path / "out"
    assert cli.main(["generate", "--spec", str(bad), "--out", str(out)]) == 1
    assert not out.exists()
    for broken in (
        {**TORUS, "extra": 1},
        {**TORUS, "model": {"s": 2, "k": 0}},
        {**TORUS, "model": {"s": -1, "k": 2}},
        {**TORUS, "optimizer": {"shrink": 2}},
        {**TORUS, "model": {"s": 2, "k": 2, "field": {"kind": "builtin", "name": "V=sin"}}},
        {"domain": {"kind": "box", "bounds": [[1, 0]]}, "model": {"s": 2, "k": 2}, "N": 5},
        {**TORUS, "outputs": {"ply": "p.ply"}},
    ):
        assert cli.main(["generate", "--spec", spec_file(tmp_path, broken), "--out", str(out)]) == 1
        assert not out.exists()
    assert "rknn:" in capsys.readouterr().err


def test_runtime_error_exit_code(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise OptimizationError("no finite start")

    monkeypatch.setattr(cli, "minimize", boom)
    out = tmp_path / "out"
    assert cli.main(["generate", "--spec", spec_file(tmp_path, TORUS), "--out", str(out)]) == 2
    assert not out.exists()
    assert "no finite start" in capsys.readouterr().err


def test_density_weight_and_field_specs(tmp_path):
    spec = {
        "domain": {"kind": "box", "bounds": [[0, 1]]},
        "model": {"s": 2, "k": 2, "weight": {"kind": "density", "density": "rho=2x-floored"}},
        "N": 40,
        "optimizer": {"max_iters": 300},
    }
    assert cli.main(["generate", "--spec", spec_file(tmp_path, spec), "--out", str(tmp_path / "a")]) == 0
    spec = {
        "domain": {"kind": "box", "bounds": [[0, 1]]},
        "model": {"s": 1, "k": 1, "field": {"kind": "builtin", "name": "V=x"}},
        "N": 40,
        "init": "stratified",
        "optimizer": {"max_iters": 300, "coarsen": 2, "coarse_min": 10, "smoothing": [0.1]},
    }
    assert cli.main(["generate", "--spec", spec_file(tmp_path, spec), "--out", str(tmp_path / "b")]) == 0


def test_sphere_ply(tmp_path):
    spec = {"domain": {"kind": "sphere", "radius": 1.0, "p": 3}, "model": {"s": 2, "k": 4}, "N": 30,
            "optimizer": {"max_iters": 100}, "outputs": {"ply": "cloud.ply"}}
    assert cli.main(["generate", "--spec", spec_file(tmp_path, spec), "--out", str(tmp_path / "o")]) == 0
    lines = (tmp_path / "o" / "cloud.ply").read_text().splitlines()
    assert lines[0] == "ply" and "element vertex 30" in lines
    assert len(lines) == lines.index("end_header") + 31


def test_sweep(tmp_path):
    out = tmp_path / "sw"
    spec = spec_file(tmp_path, TORUS)
    assert cli.main(["sweep", "--spec", spec, "--out", str(out), "--N", "20", "40", "80"]) == 0
    fit = json.loads((out / "fit.json").read_text())
    assert fit["C_hat"] == pytest.approx(2.0, abs=1e-6)
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0].startswith("N,") and len(rows) == 4
    assert (out / "N40" / "points.csv").exists()
    assert cli.main(["sweep", "--spec", spec, "--out", str(tmp_path / "e")]) == 1
    assert not (tmp_path / "e").exists()


def test_verify(tmp_path, capsys):
    assert cli.main(["verify", "circle-exact", "--out", str(tmp_path)]) == 0
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["passed"] and verdict["suite"] == "circle-exact"
    assert json.loads((tmp_path / "circle-exact.json").read_text())["passed"]
    assert cli.main(["verify", "no-such-suite"]) == 1


def test_calibrate_flags_missing_oracle(tmp_path, capsys):
    reg = tmp_path / "reg.json"
    args = ["calibrate", "--s", "4", "--d", "3", "--k", "4", "--N", "8", "16", "27", "--max-iters", "50",
            "--registry", str(reg)]
    assert cli.main(args) == 0
    assert cli.main(args) == 0
    entries = json.loads(reg.read_text())
    assert len(entries) == 1
    (entry,) = entries.values()
    assert entry["provenance"] == "no oracle" and entry["method"] == "calibrated"
    capsys.readouterr()


def test_calibrate_usage_errors():
    assert cli.main(["calibrate", "--s", "2", "--d", "1", "--k", "2", "--N", "40", "80"]) == 1
    assert cli.main(["calibrate", "--s", "2", "--d", "1"]) == 1
    assert cli.main([]) == 1


def test_registry_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv("RKNN_REGISTRY", str(tmp_path / "env.json"))
    assert cli.make_parser().parse_args(["verify", "circle-exact"]).registry == str(tmp_path / "env.json")


def test_points_round_trip(tmp_path):
    x = np.random.default_rng(0).random((50, 3)) * np.array([1e-300, 1.0, 1e300])
    write_points(tmp_path / "p.csv", x)
    assert np.array_equal(read_points(tmp_path / "p.csv"), x)


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "rknn.cli", "verify", "nope"], capture_output=True, text=True)
    assert r.returncode == 1 and "unknown suite" in r.stderr
