import json
import subprocess
import sys

import pytest

from momentctl.cli import main
from momentctl.io import read_csv

SMALL = """[run]
system = dolecki
precision = extended
[truncation]
N = 2
K = 30
[tpn]
samples = 12
N = 1..2
alpha = 0.5
[spectral_const]
N = 1..4
[time]
T_list = 1, 0.5
"""


@pytest.fixture()
def cfg(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return str(p)


@pytest.mark.parametrize("cmd,artifact", [
    ("spectrum", "spectrum.csv"), ("classify", "classify.json"), ("group", "groups.json"),
    ("biortho", "biortho_norms.csv"), ("tpn-check", "tpn.csv"),
    ("spectral-const", "spectral_const.csv"), ("t0", "t0.csv"), ("control", "control.csv"),
    ("simulate", "simulate.csv"), ("lr-cost", "lr_cost.csv")])
def test_subcommands_write_hashed_artifacts(cfg, tmp_path, cmd, artifact):
    out = tmp_path / "out"
    assert main([cmd, "--config", cfg, "--out", str(out)]) == 0
    path = out / artifact
    if artifact.endswith(".csv"):
        h, header, rows = read_csv(path)
        assert h and header and rows
    else:
        d = json.load(open(path))
        h = d["config_hash"]
        assert d["provenance"]["config_hash"] == h
    assert len(h) == 16


def test_simulate_is_deterministic(cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out", str(a)]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(b), "--workers", "3"]) == 0
    assert (a / "simulate.csv").read_bytes() == (b / "simulate.csv").read_bytes()
    summ = json.load(open(a / "simulate.json"))
    assert summ["retained_residual"] <= 1e-10


def test_tpn_workers_do_not_change_results(cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["tpn-check", "--config", cfg, "--out", str(a)]) == 0
    assert main(["tpn-check", "--config", cfg, "--out", str(b), "--workers", "4"]) == 0
    assert (a / "tpn.csv").read_bytes() == (b / "tpn.csv").read_bytes()


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nfoo = 1\n")
    assert main(["spectrum", "--config", str(bad)]) == 2
    zero = tmp_path / "zero.ini"
    zero.write_text("[run]\nsystem = boundary\n[potential]\nspec = zero\n[truncation]\nK = 30\n")
    assert main(["t0", "--config", str(zero), "--out", str(tmp_path / "o")]) == 4
    dbl = tmp_path / "dbl.ini"
    dbl.write_text("[run]\nsystem = boundary\n[truncation]\nN = 6\n")
    assert main(["biortho", "--config", str(dbl), "--out", str(tmp_path / "o")]) == 3
    rat = tmp_path / "rat.ini"
    rat.write_text("[run]\nsystem = dolecki\n[domain]\nx0 = pi/2\n[truncation]\nK = 30\n")
    assert main(["t0", "--config", str(rat), "--out", str(tmp_path / "o")]) == 4


def test_usage_errors_exit_64():
    for argv in (["bogus"], [], ["spectrum", "--precision", "quad"]):
        r = subprocess.run([sys.executable, "-m", "momentctl", *argv], capture_output=True)
        assert r.returncode == 64


def test_biortho_block_moments_when_eps_set(cfg, tmp_path):
    p = tmp_path / "eps.ini"
    # [time] is the last section of SMALL, so eps lands there
    p.write_text(open(cfg).read().replace("K = 30", "K = 30\nK_max = 3") + "eps = 0.1\n")
    out = tmp_path / "out"
    assert main(["biortho", "--config", str(p), "--out", str(out)]) == 0
    d = json.load(open(out / "block_moment.json"))
    assert d["groups"] == [1, 2, 3] and d["residual"] <= 1e-6
