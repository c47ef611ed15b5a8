"""CLI: exit codes, config validation, reproducible artifacts."""

import json
import os
import subprocess
import sys

import pytest

from blochlab.cli import main
from blochlab.config import ConfigError, load

BASE = {
    "lattice": [[1.0]],
    "potential": [[1, 0.35, 0.15], [-1, 0.35, -0.15],
                  [2, 0.2, 0.0], [-2, 0.2, 0.0]],
    "cutoff": 40.0,
    "band": 0,
    "grid": [16],
    "fields": {"preset": "zero", "params": {}},
    "eps": [0.125],
    "seed": 0,
}


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_selftest_exit_zero(tmp_path):
    out = str(tmp_path / "runs")
    assert main(["selftest", "--config", _write(tmp_path, BASE),
                 "--out", out]) == 0
    data = json.loads((tmp_path / "runs" / "selftest.json").read_text())
    assert all(c["passed"] for c in data["checks"])
    manifest = json.loads((tmp_path / "runs" / "manifest.json").read_text())
    assert manifest["subcommand"] == "selftest"
    assert manifest["checks"][0]["passed"]


def test_malformed_json_exit_one(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{ not json ")
    assert main(["bands", "--config", str(p), "--out",
                 str(tmp_path / "r")]) == 1


def test_unknown_key_exit_one_with_path(tmp_path, capsys):
    cfg = dict(BASE)
    cfg["bogus_key"] = 1
    assert main(["bands", "--config", _write(tmp_path, cfg),
                 "--out", str(tmp_path / "r")]) == 1
    err = capsys.readouterr().err
    assert "bogus_key" in err


def test_bad_eps_rejected(tmp_path):
    cfg = dict(BASE)
    cfg["eps"] = [0.7]
    with pytest.raises(ConfigError):
        load(_write(tmp_path, cfg))


def test_bands_artifacts_byte_identical(tmp_path):
    cfgp = _write(tmp_path, BASE)
    out1, out2 = str(tmp_path / "r1"), str(tmp_path / "r2")
    assert main(["bands", "--config", cfgp, "--out", out1]) == 0
    assert main(["bands", "--config", cfgp, "--out", out2]) == 0
    b1 = open(os.path.join(out1, "bands.json"), "rb").read()
    b2 = open(os.path.join(out2, "bands.json"), "rb").read()
    assert b1 == b2
    m1 = json.loads(open(os.path.join(out1, "manifest.json")).read())
    m2 = json.loads(open(os.path.join(out2, "manifest.json")).read())
    assert m1["config_hash"] == m2["config_hash"]
    assert m1["outputs"] == [os.path.join(out1, "bands.json")]


def test_out_env_var(tmp_path, monkeypatch):
    target = tmp_path / "envruns"
    monkeypatch.setenv("BLOCHLAB_OUT", str(target))
    monkeypatch.chdir(tmp_path)
    assert main(["selftest", "--config", _write(tmp_path, BASE)]) == 0
    assert (target / "selftest.json").exists()


def test_flow_subcommand_writes_trajectory(tmp_path):
    cfg = dict(BASE)
    cfg["fields"] = {"preset": "custom-fourier",
                     "params": {"phi_modes": [[[0.785398163397448], [0.2, 0.1]]]}}
    cfg["flow"] = {"mode": "corrected", "t_final": 0.5, "step": 0.005,
                   "z0": [[0.0, 0.3]]}
    out = str(tmp_path / "r")
    assert main(["flow", "--config", _write(tmp_path, cfg),
                 "--out", out]) == 0
    text = open(os.path.join(out, "flow_000.csv")).read()
    header = [ln for ln in text.splitlines() if not ln.startswith("#")][0]
    assert header.split(",")[:3] == ["t", "r_1", "kappa_1"]


def test_hall_two_level_subcommand(tmp_path):
    cfg = dict(BASE)
    cfg["lattice"] = [[1.0, 0.0], [0.0, 1.0]]
    cfg["potential"] = []
    cfg["grid"] = [8, 8]
    cfg["hall"] = {"model": "two-level", "m": -1.0, "grid": [24, 24],
                   "e_field": [0.3, -0.2]}
    out = str(tmp_path / "r")
    assert main(["hall", "--config", _write(tmp_path, cfg),
                 "--out", out]) == 0
    res = json.loads(open(os.path.join(out, "hall.json")).read())
    assert abs(res["chern"] - 1.0) < 1e-6
    assert abs(res["current"][0] + 0.2) < 1e-2
    assert abs(res["current"][1] + 0.3) < 1e-2


def test_strict_flag_escalates(tmp_path):
    cfg = dict(BASE)
    cfg["cutoff"] = 7.0   # far too small for the mode-2 potential
    code = main(["bands", "--config", _write(tmp_path, cfg),
                 "--out", str(tmp_path / "r"), "--strict"])
    assert code == 1


def test_console_script_entrypoint():
    proc = subprocess.run([sys.executable, "-m", "blochlab.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "bands" in proc.stdout and "egorov-quantum" in proc.stdout


def test_missing_required_key_rejected(tmp_path):
    cfg = dict(BASE)
    del cfg["lattice"]
    with pytest.raises(ConfigError):
        load(_write(tmp_path, cfg))
