import hashlib
import json
import math

import numpy as np
import pytest

from mmwvar import __version__
from mmwvar.cli import build_parser, main

from .conftest import write_prices


def run(*args):
    return main([str(a) for a in args])


def load(path):
    return json.loads(path.read_text())


@pytest.fixture
def toy_csv(tmp_path):
    # three returns: 100 ln(110/100), 100 ln(99/110), 100 ln(108.9/99)
    return write_prices(tmp_path / "toy.csv", ["2021-01-04", "2021-01-05", "2021-01-06", "2021-01-07"], [100.0, 110.0, 99.0, 108.9])


def test_stats_toy(toy_csv, tmp_path, capsys):
    out = tmp_path / "o"
    assert run("stats", "--input", toy_csv, "--out", out) == 0
    doc = load(out / "stats.json")
    r = [100 * math.log(1.1), 100 * math.log(0.9), 100 * math.log(1.1)]
    mean = sum(r) / 3
    sd = math.sqrt(sum((v - mean) ** 2 for v in r) / 2)
    assert doc["stats"]["n"] == 3
    assert doc["stats"]["mean"] == pytest.approx(mean, abs=1e-12)
    assert doc["stats"]["std_dev"] == pytest.approx(sd, abs=1e-12)
    assert doc["stats"]["min"] == pytest.approx(r[1], abs=1e-12)
    assert doc["version"] == __version__
    assert doc["input_sha256"] == hashlib.sha256(toy_csv.read_bytes()).hexdigest()
    assert doc["config"]["subcommand"] == "stats" and doc["seed"] == 0
    text = capsys.readouterr().out
    assert "kurtosis" in text and "std_dev" in text


def test_empty_and_malformed_inputs(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert run("stats", "--input", empty, "--out", tmp_path / "o") != 0
    bad = tmp_path / "bad.csv"
    bad.write_text("When,Price\n2020-01-01,1\n")
    assert run("fit", "--input", bad, "--out", tmp_path / "o") != 0
    assert "error:" in capsys.readouterr().err


def test_config_validation(price_csv, tmp_path):
    for extra in (["--alpha", "0.5"], ["--alpha", "0"], ["--window", "1"], ["--method", "mc"], ["--n-sim", "10"]):
        assert run("var", "--input", price_csv, "--out", tmp_path / "o", *extra) == 2
    with pytest.raises(SystemExit):
        build_parser().parse_args(["fit", "--input", "x", "--g", "two"])


def test_fit_all_auto(tmp_path, two_mmw):
    x = two_mmw.sample(1500, seed=21) - 10.0
    prices = 100.0 * np.exp(np.cumsum(np.r_[0.0, x / 100.0]))
    dates = [str(np.datetime64("2010-01-01") + i) for i in range(prices.size)]
    src = write_prices(tmp_path / "p.csv", dates, prices)
    out = tmp_path / "o"
    assert run("fit", "--input", src, "--out", out, "--family", "all", "--g", "auto", "--g-max", "3", "--n-starts", "2") == 0
    fams = {f: load(out / f"model_{f}.json") for f in ("mmw", "gmm", "tmm")}
    summary = load(out / "fit.json")
    assert summary["best_bic_family"] == "mmw"
    assert fams["mmw"]["g"] == 2
    for d in fams.values():
        assert set(d["bic_by_g"]) == {"1", "2", "3"}
        assert "config" in d and "input_sha256" in d
    header = (out / "density.csv").read_text().splitlines()[0]
    assert header == "x,pdf_gmm,pdf_tmm,pdf_mmw"
    hist = (out / "histogram.csv").read_text().splitlines()
    assert len(hist) == 51
    counts = sum(int(row.split(",")[2]) for row in hist[1:])
    assert counts == 1500


def test_fit_single_mmw_closed_form(price_csv, tmp_path):
    out = tmp_path / "o"
    assert run("fit", "--input", price_csv, "--out", out, "--family", "mmw", "--g", "1") == 0
    d = load(out / "model_mmw.json")
    assert d["g"] == 1 and d["weights"] == [1.0]
    assert not (out / "model_gmm.json").exists()
    comp = d["components"][0]
    rows = (out / "density.csv").read_text().splitlines()[1:]
    x, f = (float(v) for v in rows[len(rows) // 2].split(","))
    y = d["c"] - x
    k, s = comp["shape"], comp["scale"]
    assert f == pytest.approx((k / s) * (y / s) ** (k - 1) * math.exp(-((y / s) ** k)), rel=1e-12)


def test_var_summary(price_csv, tmp_path):
    out = tmp_path / "o"
    code = run("var", "--input", price_csv, "--out", out, "--g", "1", "--alpha", "0.01", "--alpha", "0.05", "--n-sim", "200000")
    assert code == 0
    doc = load(out / "var.json")
    est = doc["var_estimates"]
    for fam in ("mmw", "gmm", "tmm"):
        assert sorted(est[fam]) == ["0.01", "0.05"]
        for cell in est[fam].values():
            assert cell["agree_3se"] is True
            assert cell["cdf-bisection"]["loss"] == -cell["cdf-bisection"]["var"]
    assert sorted(est["historical"]) == ["0.01", "0.05"]
    lines = (out / "var_curve.csv").read_text().splitlines()
    assert len(lines) == 101
    assert lines[0].startswith("alpha,var_hist,var_gmm_cdf")


def test_var_from_model_file(price_csv, tmp_path):
    out = tmp_path / "o"
    assert run("fit", "--input", price_csv, "--out", out, "--family", "mmw", "--g", "1") == 0
    assert run("var", "--input", price_csv, "--out", out, "--model", out / "model_mmw.json", "--method", "cdf-bisection") == 0
    doc = load(out / "var.json")
    m = load(out / "model_mmw.json")
    comp = m["components"][0]
    expected = m["c"] - comp["scale"] * (-math.log(0.05)) ** (1 / comp["shape"])
    assert doc["var_estimates"]["mmw"]["0.05"]["cdf-bisection"]["var"] == pytest.approx(expected, abs=1e-12)


def test_backtest_counts_and_determinism(price_csv, tmp_path, monkeypatch):
    args = ("backtest", "--input", price_csv, "--g", "1", "--n-starts", "1", "--alpha", "0.05")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run(*args, "--out", out1) == 0
    monkeypatch.setenv("MMWVAR_OUT_DIR", str(out2))
    assert run(*args) == 0
    a, b = (out1 / "backtest.json").read_bytes(), (out2 / "backtest.json").read_bytes()
    assert a == b
    doc = json.loads(a)
    assert {r["family"] for r in doc["reports"]} == {"mmw", "gmm", "tmm"}
    for r in doc["reports"]:
        assert len(r["forecasts"]) == 320 - 250
    rows = (out1 / "forecasts_alpha0.05.csv").read_text().splitlines()
    assert rows[0] == "date,realized,var_gmm,var_tmm,var_mmw,var_hist"
    assert len(rows) == 71


@pytest.mark.parametrize("cmd", ["stats", "fit", "var"])
def test_rerun_byte_identical(cmd, price_csv, tmp_path):
    base = (cmd, "--input", price_csv, "--g", "2", "--n-starts", "2", "--n-sim", "20000", "--seed", "9")
    assert run(*base, "--out", tmp_path / "a") == 0
    assert run(*base, "--out", tmp_path / "b") == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
