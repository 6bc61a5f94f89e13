import json
import math

import numpy as np
import pytest

from momentctl.config import ExperimentConfig, load_config, parse_box, parse_floats, parse_ints
from momentctl.errors import ContractError
from momentctl.io import read_csv, write_csv, write_json


def test_defaults_validate_and_hash_stable():
    a, b = load_config(), load_config()
    assert a.hash == b.hash and len(a.hash) == 16
    assert a.n_sim == 2 * a.N


def test_hash_ignores_output_location_and_workers(tmp_path):
    a = load_config(None, {"out": str(tmp_path), "workers": 4})
    assert a.hash == load_config().hash
    assert load_config(None, {"precision": "extended"}).hash != a.hash


def test_parsers():
    assert parse_floats("pi/2, 2*pi/3, 1e-3") == pytest.approx([math.pi / 2, 2 * math.pi / 3, 1e-3])
    assert parse_ints("1..3, 7") == [1, 2, 3, 7]
    assert parse_box("0.3,1.1; 0, pi/2") == ((0.3, 1.1), (0.0, math.pi / 2))
    with pytest.raises(ContractError):
        parse_box("0.3")


def test_ini_roundtrip(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[run]\nsystem = dolecki  # pointwise\nprecision = extended\n"
                 "[domain]\nomega = 0, pi/2\nx0 = 1\n[truncation]\nN = 5\n"
                 "[tpn]\nN = 1..3\n")
    cfg = load_config(str(p))
    assert cfg.system == "dolecki" and cfg.precision == "extended"
    assert cfg.omega == ((0.0, math.pi / 2),)
    assert cfg.N == 5 and cfg.tpn_N == (1, 2, 3)
    assert cfg.source == str(p)


@pytest.mark.parametrize("text", ["[bogus]\nx = 1\n", "[run]\nfoo = 1\n",
                                  "[time]\nT = -1\n", "[truncation]\nvartheta = 1.5\n",
                                  "[domain]\nomega = 2, 1\n", "[truncation]\nK = abc\n"])
def test_invalid_configs(tmp_path, text):
    p = tmp_path / "bad.ini"
    p.write_text(text)
    with pytest.raises(ContractError):
        load_config(str(p))


def test_missing_file():
    with pytest.raises(ContractError):
        load_config("/nonexistent/config.ini")


def test_dim_broadcasts_default_window():
    cfg = load_config(None, {"system": "heat", "dim": 2, "omega": ((0.3, 1.1),)})
    assert isinstance(cfg, ExperimentConfig)


def test_csv_and_json_writers(tmp_path):
    p = write_csv(tmp_path / "a.csv", ["k", "v", "flag"], [(1, 0.1, True), (2, np.float64(1e-300), False)],
                  "abc")
    raw = open(p, "rb").read()
    assert b"\r" not in raw
    h, header, rows = read_csv(p)
    assert h == "abc" and header == ["k", "v", "flag"]
    assert float(rows[1][1]) == 1e-300 and rows[0][2] == "1"
    q = write_json(tmp_path / "a.json", {"x": np.arange(2), "y": float("inf")}, "abc", {"seed": 0})
    d = json.load(open(q))
    assert d["config_hash"] == "abc" and d["x"] == [0, 1] and d["y"] == "inf"
