import csv

import pytest

from gsmdetect import cli
from gsmdetect.cli import (CSV_HEADER, PRESETS, ParseError, ValidationError, emit_csv, main,
                           parse_config, preset_spec)
from gsmdetect.gsm import SystemConfig
from gsmdetect.sim import ExperimentSpec, run_sweep

FIG2_CFG = """\
# fig2 geometry
n_t = 4
n_a = 2
n_r = 4
modulation = qpsk
detectors = ml, pbld
snr_db = 0, 5, 10
runs = 3
uses_per_run = 10
delta = 0
c_lo_frac = 0.25
c_hi_frac = 0.125
rho_lo_db = 0
rho_hi_db = 30
lmin_scale = db
seed = 11
"""


def _write(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_fig2(tmp_path):
    spec = parse_config(_write(tmp_path, FIG2_CFG))
    assert spec.system.n_c == 4 and spec.system.bits_per_use == 6
    assert spec.detectors == ("ml", "pbld")
    assert spec.snr_grid_db == (0.0, 5.0, 10.0)
    assert spec.master_seed == 11 and spec.runs == 3
    assert spec.delta_rx is None


def test_delta_rx_key(tmp_path):
    spec = parse_config(_write(tmp_path, "n_t = 4\nn_a = 2\nn_r = 4\ndelta = 0.5\ndelta_rx = 0.2\n"))
    assert (spec.delta, spec.delta_rx) == (0.5, 0.2)


def test_validation_error(tmp_path):
    with pytest.raises(ValidationError, match="N_R >= N_A required"):
        parse_config(_write(tmp_path, "n_t = 4\nn_a = 2\nn_r = 1\n"))
    with pytest.raises(ValidationError):
        parse_config(_write(tmp_path, "n_t = 4\nn_a = 2\nn_r = 4\nc_lo_frac = 0.1\n"))


@pytest.mark.parametrize("text,line", [
    ("n_t = 4\nn_a = 2\nn_r = 4\nn_a = 2\n", 4),
    ("n_t = 4\nfoo = 1\n", 2),
    ("n_t = 4\n\nn_a 2\n", 3),
    ("n_t = four\n", 1),
    ("n_t = 4\nlmin_scale = log\n", 2),
    ("n_t = 4\nseed = -1\n", 2),
    ("n_t = 4\nmodulation = 8psk\n", 2),
])
def test_parse_errors(tmp_path, text, line):
    with pytest.raises(ParseError) as err:
        parse_config(_write(tmp_path, text))
    assert err.value.lineno == line


def test_missing_keys(tmp_path):
    with pytest.raises(ParseError):
        parse_config(_write(tmp_path, "n_t = 4\n"))


@pytest.mark.parametrize("name,n_c,bits", [("fig2", 4, 6), ("fig3", 64, 10), ("fig4a", 32, 13),
                                           ("fig4b", 32, 11), ("fig5", 32, 13)])
def test_preset_captions(name, n_c, bits):
    spec = preset_spec(name, "desk")
    assert (spec.system.n_c, spec.system.bits_per_use) == (n_c, bits)
    assert spec.runs == 2000 and spec.uses_per_run == 100
    assert spec.snr_grid_db == (0.0, 4.0, 8.0, 12.0, 16.0)
    assert spec.delta == (0.5 if name == "fig5" else 0.0)
    assert preset_spec(name, "full").runs == 20000
    assert set(PRESETS) == {"fig2", "fig3", "fig4a", "fig4b", "fig5"}


def test_preset_unknown():
    with pytest.raises(ValidationError):
        preset_spec("fig9")
    with pytest.raises(ValidationError):
        preset_spec("fig2", "huge")


def _small(detectors=("pbld", "ml"), snrs=(0.0, 5.0, 10.0)):
    return ExperimentSpec(SystemConfig(4, 2, 4), detectors=detectors, snr_grid_db=snrs,
                          runs=2, uses_per_run=5)


def test_csv_rows(tmp_path):
    out = tmp_path / "r.csv"
    emit_csv(run_sweep(_small()), out)
    rows = list(csv.reader(out.open()))
    assert tuple(rows[0]) == CSV_HEADER
    assert [(r[0], r[1]) for r in rows[1:]] == [
        ("ml", "0.0"), ("ml", "5.0"), ("ml", "10.0"),
        ("pbld", "0.0"), ("pbld", "5.0"), ("pbld", "10.0")]
    for r in rows[1:]:
        assert float(r[2]) == int(r[4]) / int(r[3])
        assert (r[5] == "nan") == (r[0] != "pbld")
        assert float(r[8]) > 0
    assert all(r[8] == "1.0" for r in rows[1:4])


def test_csv_no_baseline_and_empty(tmp_path):
    out = tmp_path / "r.csv"
    emit_csv(run_sweep(_small(detectors=("pbld",))), out)
    rows = list(csv.reader(out.open()))
    assert all(r[8] == "nan" for r in rows[1:])
    emit_csv(run_sweep(_small(detectors=())), out)
    assert out.read_text() == ",".join(CSV_HEADER) + "\n"


def test_shortest_round_trip():
    assert cli._fmt(0.1) == "0.1"
    assert cli._fmt(1 / 3) == repr(1 / 3)
    assert float(cli._fmt(2 / 7)) == 2 / 7
    assert cli._fmt(12) == "12"
    assert cli._fmt(float("nan")) == "nan"


def test_main_run_deterministic(tmp_path, monkeypatch):
    monkeypatch.delenv("GSMDETECT_SEED", raising=False)
    cfg = _write(tmp_path, FIG2_CFG)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(b), "--threads", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_seed_env_override(tmp_path, monkeypatch):
    cfg = _write(tmp_path, FIG2_CFG)
    paths = {}
    for seed in ("11", "12"):
        monkeypatch.setenv("GSMDETECT_SEED", seed)
        paths[seed] = tmp_path / f"{seed}.csv"
        assert main(["run", "--config", str(cfg), "--out", str(paths[seed])]) == 0
    monkeypatch.delenv("GSMDETECT_SEED")
    base = tmp_path / "base.csv"
    main(["run", "--config", str(cfg), "--out", str(base)])
    assert base.read_bytes() == paths["11"].read_bytes()
    assert base.read_bytes() != paths["12"].read_bytes()
    monkeypatch.setenv("GSMDETECT_SEED", "nope")
    assert main(["run", "--config", str(cfg), "--out", str(base)]) == 1


def test_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "x.csv")
    assert main(["preset", "--name", "fig9", "--out", out]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.cfg"), "--out", out]) == 1
    bad = _write(tmp_path, "n_t = 4\nn_a = 2\nn_r = 1\n")
    assert main(["run", "--config", str(bad), "--out", out]) == 1
    assert "N_R >= N_A required" in capsys.readouterr().err
    good = _write(tmp_path, FIG2_CFG, "good.cfg")
    assert main(["run", "--config", str(good), "--out", str(tmp_path / "no" / "x.csv")]) == 2
    assert main(["run", "--config", str(good), "--out", out, "--threads", "0"]) == 1


def test_selftest(capsys):
    assert main(["selftest"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and not any(l.startswith("FAIL") for l in lines)


def test_preset_happy_path(tmp_path, monkeypatch):
    # shrink the desk scale so the happy path stays quick
    monkeypatch.setitem(cli.SCALES, "desk", (2, (0.0, 8.0)))
    out = tmp_path / "fig2.csv"
    assert main(["preset", "--name", "fig2", "--scale", "desk", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 1 + 3 * 2
