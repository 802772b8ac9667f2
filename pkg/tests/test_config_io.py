import json
import math

import numpy as np
import pytest

from cslheat.config import load_config, parse_config
from cslheat.errors import ConfigError, DataError
from cslheat.fitting import DecaySeries
from cslheat.io import format_csv, ingest_series, to_json, write_series

TRAP = """
[trap A]
f1_Hz = 20.5
f2_Hz = 22.0
f3_Hz = 30.0
depth_nK = 158
n0 = 7e4
f0 = 0.76
tau_n_s = 17.5
tau_f_s = 96
tau_cool_s = 62
"""


def test_defaults_and_trap():
    cfg = parse_config(TRAP)
    assert cfg.seed == 0 and cfg.mc_samples == 2000 and cfg.a_csl == 1e-7
    assert cfg.species.name == "Cs-133" and cfg.weighting == "unweighted"
    assert cfg.tau_1 == (320.0, 0.0)
    (tc,) = cfg.traps
    assert tc.name == "A"
    assert tc.fitted["tau_n"] == (17.5, 0.0)
    assert tc.trap.frequencies == (20.5, 22.0, 30.0)
    assert cfg.simulate is None
    assert len(cfg.source_hash) == 64


@pytest.mark.parametrize(
    "text,match",
    [
        ("[run]\nseeed = 1\n", "unknown key 'seeed'"),
        ("[runn]\n", "unknown section"),
        (TRAP + "colour = blue\n", "unknown key 'colour'"),
        ("[run]\nseed = x\n", "not a valid int"),
        ("[run]\nseed = -1\n", "seed"),
        ("[run]\nweighting = median\n", "weighting"),
        ("[run]\nspecies = Xe-999\n", "unknown species"),
        ("[environment]\ntau_1_s = 0\n", "positive"),
        (TRAP.replace("tau_f_s = 96\n", ""), "tau_f"),
        (TRAP.replace("f0 = 0.76", "f0 = 1.3"), "f0"),
        (TRAP + "number_data = n.csv\n", "either number_data"),
        (TRAP.replace("depth_nK = 158\n", ""), "depth_nK"),
        ("[simulate]\nmode = warp\nlambda_per_s = 1\nt_max_s = 1\n", "mode"),
        ("[simulate]\nmode = cloud\n", "missing required"),
        ("not an ini file", "malformed"),
    ],
)
def test_rejections(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_inline_species_and_sigma_keys(tmp_path):
    text = """
[species]
name = Rb-87
mass_number = 87
mass_kg = 1.443e-25
scattering_length_m = 5.3e-9
""" + TRAP + "k3c_m6_per_s = 1e-41\nk3c_sigma_m6_per_s = 2e-42\ntau_n_sigma_s = 0.5\n"
    path = tmp_path / "c.ini"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg.species.mass_number == 87
    assert cfg.traps[0].fitted["k3c"] == (1e-41, 2e-42)
    assert cfg.traps[0].fitted["tau_n"] == (17.5, 0.5)
    assert cfg.output_dir == tmp_path / "out"


def test_data_paths_resolved(tmp_path):
    text = "[trap B]\nf1_Hz = 1\nf2_Hz = 1\nf3_Hz = 1\ndepth_nK = 100\nnumber_data = d/n.csv\nfraction_data = f.csv\n"
    cfg = parse_config(text, tmp_path)
    assert cfg.traps[0].number_data == tmp_path / "d" / "n.csv"
    assert cfg.traps[0].fitted == {}


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.ini")


def test_shipped_configs_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    assert len(load_config(root / "four_traps.ini").traps) == 4
    assert all(t.number_data.exists() for t in load_config(root / "synthetic" / "synthetic.ini").traps)


# ---------------------------------------------------------------------------
# series ingestion


def write(tmp_path, text, name="s.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_two_rows(tmp_path):
    s = ingest_series(write(tmp_path, "t_s,value\n0,100\n1,90\n"))
    assert len(s) == 2 and s.kind == "particle_number"
    assert s.values.tolist() == [100.0, 90.0]


def test_sigma_column_and_blank_lines(tmp_path):
    s = ingest_series(write(tmp_path, "t_s,value,sigma\n0,0.7,0.01\n\n2,0.6,0.01\n"), "condensate_fraction")
    assert s.sigma.tolist() == [0.01, 0.01]


@pytest.mark.parametrize(
    "text,match",
    [
        ("t_s,value\n", "no data rows"),
        ("t_s,value\n0,1\n1,2\n1,3\n", r":4: duplicated timestamp"),
        ("t_s,value\n0,1\n2,2\n1,3\n", r":4: time goes backwards"),
        ("t_s,value\n0,1\n1,x\n", r":3: non-numeric"),
        ("t_s,value\n0,1\n1,2,3\n", r":3: expected 2 columns"),
        ("t_s,value\n0,1\n1,nan\n", r":3: non-finite"),
        ("time,N\n0,1\n1,2\n", r":1: header"),
        ("t_s,value\n0,1\n", "at least 2"),
        ("", "empty"),
        ("t_s,value\n0,1\n1,-2\n", "positive"),
    ],
)
def test_ingest_errors(tmp_path, text, match):
    with pytest.raises(DataError, match=match):
        ingest_series(write(tmp_path, text))


def test_ingest_not_utf8(tmp_path):
    p = tmp_path / "b.csv"
    p.write_bytes(b"t_s,value\n0,\xff\n")
    with pytest.raises(DataError, match="UTF-8"):
        ingest_series(p)


def test_series_round_trip(tmp_path):
    s = DecaySeries(np.array([0.0, 0.1, 0.3]), np.array([1e5, 9.1e4, 7.77e4]), sigma=np.array([1.0, 2.0, 3.0]))
    write_series(tmp_path / "r.csv", s)
    back = ingest_series(tmp_path / "r.csv")
    assert np.array_equal(back.t, s.t) and np.array_equal(back.values, s.values) and np.array_equal(back.sigma, s.sigma)


def test_json_and_csv_formatting():
    text = to_json({"b": np.float64(1.5), "a": [np.int64(2), math.inf], "c": np.bool_(True)})
    assert text.endswith("\n")
    assert json.loads(text) == {"a": [2, "inf"], "b": 1.5, "c": True}
    assert list(json.loads(text)) == ["a", "b", "c"]
    assert format_csv(["x", "y"], [(1, 0.1), ("s", 2)]) == "x,y\n1.0,0.1\ns,2.0\n"
