import csv
import subprocess
import sys

import pytest

from gibbslab.cli import ExperimentConfig, main, parse_config
from gibbslab.errors import ConfigError


def _rows(path):
    lines = path.read_text().splitlines()
    assert lines[-1].startswith("# config_hash=")
    return list(csv.DictReader(lines[:-1]))


def _cfg(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return str(p)


def test_parse_config_and_hash():
    a = parse_config("K = 2\ntaus = 1,2  # comment\n")
    assert a.K == 2 and a.taus == (1.0, 2.0)
    assert a.hash() != ExperimentConfig().hash()
    assert a.hash() == parse_config("taus=1,2\nK=2").hash()


@pytest.mark.parametrize("text,msg", [("bogus = 1", "bogus"), ("K = two", "K"), ("K", "key=value")])
def test_parse_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_config_error_exit(tmp_path):
    assert main(["coeffs", "--config", _cfg(tmp_path, "nope = 3"), "--out", str(tmp_path)]) == 3
    assert main(["coeffs", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == 3
    assert main(["coeffs", "--config", _cfg(tmp_path, "regime = weird"), "--out", str(tmp_path)]) == 3


def test_resource_cap_exit(tmp_path):
    assert main(["pairings-dump", "--config", _cfg(tmp_path, "pair_m = 9"), "--out", str(tmp_path)]) == 4
    cfg = _cfg(tmp_path, "K = 3\ncap = 12\ndim_cap = 100\nmonomial_len = 2")
    assert main(["oracle-suite", "--config", cfg, "--out", str(tmp_path)]) == 4


def test_invariant_exit(tmp_path):
    # a one-iteration cap cannot reach the fixed point
    assert main(["counterterm", "--config", _cfg(tmp_path, "max_iter = 1\ngrid_N = 15"), "--out", str(tmp_path)]) == 2


def test_pairings_dump(tmp_path):
    assert main(["pairings-dump", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "pairings.txt").read_text().splitlines()
    assert len(text) == 4 and text[-1].endswith("count=3")


def test_coeffs_gaps_shrink(tmp_path):
    cfg = _cfg(tmp_path, "taus = 10,100,1000\nM = 3")
    assert main(["coeffs", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "coeffs.csv")
    for m in ("1", "2"):
        gaps = [float(r["gap"]) for r in rows if r["m"] == m]
        assert gaps[0] > gaps[1] > gaps[2]


def test_borel_toy(tmp_path):
    assert main(["borel-toy", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "borel_toy.csv")
    assert [float(r["z"]) for r in rows] == [0.02, 0.05, 0.1]
    assert all(abs(float(r["error"])) < 1e-3 for r in rows)


def test_counterterm_outputs(tmp_path):
    assert main(["counterterm", "--config", _cfg(tmp_path, "grid_N = 15"), "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "counterterm.csv")
    assert float(rows[-1]["residual"]) <= 1e-8
    assert len(_rows(tmp_path / "counterterm_field.csv")) == 15


def test_growth_and_seed_flag(tmp_path):
    cfg = _cfg(tmp_path, "taus = 10,100,1000\ngrowth_K = 50")
    assert main(["growth", "--config", cfg, "--out", str(tmp_path), "--seed", "5"]) == 0
    assert "seed=5" in (tmp_path / "growth.csv").read_text().splitlines()[-1]


def test_converge_is_deterministic(tmp_path):
    cfg = _cfg(tmp_path, "samples = 4000\nM = 2")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["converge", "--config", cfg, "--out", str(a), "--threads", "2"]) == 0
    assert main(["converge", "--config", cfg, "--out", str(b)]) == 0
    ra, rb = _rows(a / "converge.csv"), _rows(b / "converge.csv")
    assert ra == rb
    s2 = [float(r["s2_distance"]) for r in ra]
    assert s2[0] > s2[1] > s2[2]


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "gibbslab.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "oracle-suite" in out.stdout and "growth_K" in out.stdout
