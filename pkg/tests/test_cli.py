import csv
import json

import numpy as np
import pytest

from pricediffusion import ModelParams, last_period_price, MarketSpec, predict
from pricediffusion.cli import main
from pricediffusion.io import read_dataset


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def synthetic_csv(tmp_path):
    prices = np.linspace(6.0, 2.0, 20)
    F = predict(ModelParams(0.5, 2.0, 1.0), 0.01, prices[1:])
    lines = ["period,price,adoption_fraction"]
    lines += [f"{2000 + i},{float(prices[i])!r},{float(F[i])!r}" for i in range(20)]
    return write_lines(tmp_path / "synthetic.csv", lines)


# ---------------------------------------------------------------- ingestion

def test_population_form_is_converted(tmp_path):
    path = write_lines(tmp_path / "d.csv", [
        "period,price,cumulative_adopters,population",
        "1,5,10,1000", "2,4,30,1000", "3,3,80,1000", "4,3,150,1000"])
    series = read_dataset(path)
    np.testing.assert_allclose(series.adoption, [0.01, 0.03, 0.08, 0.15])
    assert series.periods == ("1", "2", "3", "4")


@pytest.mark.parametrize("bad_row, fragment", [
    ("3,abc,0.3", "row 4"),
    ("3,3", "row 4"),
    ("3,-1,0.3", "row 4"),
])
def test_schema_errors_name_the_row(tmp_path, capsys, bad_row, fragment):
    path = write_lines(tmp_path / "bad.csv", [
        "period,price,adoption_fraction", "1,5,0.1", "2,4,0.2", bad_row, "4,3,0.4"])
    assert main(["fit", str(path), "--out-dir", str(tmp_path / "o")]) == 2
    assert fragment in capsys.readouterr().err


def test_unknown_header_rejected(tmp_path, capsys):
    path = write_lines(tmp_path / "bad.csv", ["year,cost,share", "1,2,0.1"])
    assert main(["fit", str(path)]) == 2
    assert "header" in capsys.readouterr().err


def test_three_rows_rejected(tmp_path, capsys):
    path = write_lines(tmp_path / "short.csv", [
        "period,price,adoption_fraction", "1,5,0.1", "2,4,0.2", "3,3,0.3"])
    assert main(["fit", str(path), "--out-dir", str(tmp_path)]) == 2
    assert "at least 4 periods" in capsys.readouterr().err


def test_constant_series_rejected(tmp_path, capsys):
    path = write_lines(tmp_path / "flat.csv", ["period,price,adoption_fraction"]
                       + [f"{i},3,0.2" for i in range(5)])
    assert main(["fit", str(path), "--out-dir", str(tmp_path)]) == 2


# ---------------------------------------------------------------- fit

def test_fit_synthetic_fixture(tmp_path, synthetic_csv):
    out = tmp_path / "fit"
    assert main(["fit", str(synthetic_csv), "--out-dir", str(out)]) == 0
    res = json.loads((out / "fit.json").read_text())
    assert res["params"]["p"] == pytest.approx(0.5, abs=1e-3)
    assert res["params"]["q"] == pytest.approx(2.0, abs=1e-3)
    assert res["params"]["alpha"] == pytest.approx(1.0, abs=1e-3)
    assert res["nrmse"] <= 1e-6 and len(res["residuals"]) == 20
    table = read_csv(out / "fit_series.csv")
    assert set(table) == {"period", "data_F", "model_F"}
    np.testing.assert_allclose(table["data_F"], table["model_F"], atol=1e-7)


def test_fit_fixed_parameter(tmp_path, synthetic_csv):
    out = tmp_path / "fit"
    assert main(["fit", str(synthetic_csv), "--out-dir", str(out), "--free", "p,q",
                 "--fix", "alpha=1", "--starts", "4"]) == 0
    res = json.loads((out / "fit.json").read_text())
    assert res["params"]["alpha"] == 1.0
    assert res["multistart_best_of"] == 4


# ---------------------------------------------------------------- price

def test_price_outputs_decreasing_path(tmp_path):
    out = tmp_path / "price"
    assert main(["price", "--p", "1", "--q", "1", "--cost", "1", "--horizon", "8",
                 "--grid-points", "1001", "--out-dir", str(out)]) == 0
    for name in ("values.csv", "policies.csv", "rollout.csv", "structure.json"):
        assert (out / name).is_file()
    roll = read_csv(out / "rollout.csv")
    assert list(roll) == ["t", "F", "price", "new_adopters", "profit", "F_next"]
    assert np.all(np.diff(roll["price"]) < 0)
    report = json.loads((out / "structure.json").read_text())
    assert report["asserted"] is True and report["passed"] is True
    assert len(report["stage_bounds"]) == 8


def test_price_increasing_path_high_peer_effects(tmp_path):
    assert main(["price", "--q", "5", "--horizon", "4", "--grid-points", "1001",
                 "--out-dir", str(tmp_path)]) == 0
    assert np.all(np.diff(read_csv(tmp_path / "rollout.csv")["price"]) > 0)


def test_price_single_stage_is_closed_form(tmp_path):
    assert main(["price", "--horizon", "1", "--grid-points", "11",
                 "--out-dir", str(tmp_path)]) == 0
    pol = read_csv(tmp_path / "policies.csv")
    expect = last_period_price(MarketSpec(ModelParams(1, 1), 1.0, 1), pol["F"])
    np.testing.assert_array_equal(pol["price_0"], expect)


def test_price_population_columns(tmp_path):
    assert main(["price", "--horizon", "2", "--grid-points", "101", "--population", "1000",
                 "--out-dir", str(tmp_path)]) == 0
    roll = read_csv(tmp_path / "rollout.csv")
    np.testing.assert_allclose(roll["new_adopters_count"], 1000 * roll["new_adopters"])


def test_price_with_price_sensitivity(tmp_path):
    assert main(["price", "--alpha", "2", "--cost", "0.5", "--horizon", "1",
                 "--grid-points", "11", "--out-dir", str(tmp_path)]) == 0
    roll = read_csv(tmp_path / "rollout.csv")
    # alpha = 2 with cost 0.5 is the unit problem with cost 1, prices halved
    unit = last_period_price(MarketSpec(ModelParams(1, 1), 1.0, 1), 0.0)
    assert roll["price"][0] == pytest.approx(unit / 2, rel=1e-15)


def test_invalid_parameters_exit_two(tmp_path, capsys):
    assert main(["price", "--q", "-1", "--out-dir", str(tmp_path)]) == 2
    assert main(["price", "--f0", "1.5", "--out-dir", str(tmp_path)]) == 2
    assert main(["simulate", "--out-dir", str(tmp_path)]) == 2


# ---------------------------------------------------------------- rebate

def test_rebate_single_period_above_threshold(tmp_path):
    assert main(["rebate", "--beta", "0.7", "--out-dir", str(tmp_path),
                 "--rebate-points", "8", "--grid-points", "11"]) == 0
    eq = json.loads((tmp_path / "equilibrium.json").read_text())
    assert eq["r_star"] == 0.0
    assert eq["beta_0"] == pytest.approx(0.61184, abs=1e-4)
    assert eq["beta_hat"] == pytest.approx(0.053926, abs=1e-5)
    assert len(read_csv(tmp_path / "scan.csv")["r"]) == 8


def test_rebate_single_period_root(tmp_path):
    assert main(["rebate", "--beta", "0.3", "--out-dir", str(tmp_path),
                 "--rebate-points", "8", "--grid-points", "11"]) == 0
    eq = json.loads((tmp_path / "equilibrium.json").read_text())
    assert eq["r_star"] == pytest.approx(0.9419885484062840, abs=1e-12)
    assert eq["root_residual"] <= 1e-9


def test_rebate_sweep_monotone(tmp_path):
    assert main(["rebate", "--sweep-beta", "0.02,0.05,0.1,0.2,0.4,0.8",
                 "--out-dir", str(tmp_path)]) == 0
    sweep = read_csv(tmp_path / "sweep.csv")
    assert np.all(np.diff(sweep["r_star"]) <= 0)
    assert sweep["r_star"][-1] == 0.0


def test_rebate_multi_period_scan(tmp_path):
    assert main(["rebate", "--beta", "0.05", "--horizon", "2", "--grid-points", "201",
                 "--rebate-points", "16", "--out-dir", str(tmp_path)]) == 0
    eq = json.loads((tmp_path / "equilibrium.json").read_text())
    assert eq["scan_local_maxima"] == 1 and "beta_0" not in eq
    assert len(read_csv(tmp_path / "trajectory.csv")["price"]) == 2


# ---------------------------------------------------------------- simulate

def test_simulate_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["price", "--q", "5", "--horizon", "6", "--grid-points", "501",
                 "--out-dir", str(a)]) == 0
    assert main(["simulate", "--cost", "1", "--q", "5", "--prices-file",
                 str(a / "rollout.csv"), "--out-dir", str(b)]) == 0
    x, y = read_csv(a / "rollout.csv"), read_csv(b / "trajectory.csv")
    for col in ("F", "price", "new_adopters", "profit", "F_next"):
        np.testing.assert_allclose(x[col], y[col], rtol=1e-12, atol=1e-12)


def test_simulate_flat_when_saturated(tmp_path):
    assert main(["simulate", "--f0", "1", "--prices", "3,3,3", "--out-dir", str(tmp_path)]) == 0
    tr = read_csv(tmp_path / "trajectory.csv")
    assert np.all(tr["F"] == 1.0) and np.all(tr["profit"] == 0.0)


def test_simulate_s_shape(tmp_path):
    assert main(["simulate", "--p", "-4", "--q", "8", "--prices", ",".join(["0.1"] * 30),
                 "--out-dir", str(tmp_path)]) == 0
    new = read_csv(tmp_path / "trajectory.csv")["new_adopters"]
    peak = int(np.argmax(new))
    assert 0 < peak < len(new) - 1


def test_simulate_prices_file_plain_lines(tmp_path):
    path = write_lines(tmp_path / "p.txt", ["2.5", "2.0", "1.5"])
    assert main(["simulate", "--prices-file", str(path), "--out-dir", str(tmp_path)]) == 0
    assert len(read_csv(tmp_path / "trajectory.csv")["t"]) == 3


# ---------------------------------------------------------------- plumbing

def test_outputs_are_deterministic(tmp_path, synthetic_csv):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["fit", str(synthetic_csv), "--starts", "3", "--seed", "5",
                     "--out-dir", str(out)]) == 0
        assert main(["price", "--horizon", "3", "--grid-points", "201",
                     "--out-dir", str(out)]) == 0
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert runs[0] == runs[1]


def test_config_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid_points": 21, "price": {"horizon": 3, "q": 0.5}}))
    out = tmp_path / "o"
    assert main(["price", "--config", str(cfg), "--q", "0.8", "--out-dir", str(out)]) == 0
    pol = read_csv(out / "policies.csv")
    assert len(pol["F"]) == 21 and "price_2" in pol
    expect = last_period_price(MarketSpec(ModelParams(1, 0.8), 1.0, 1), 1.0)
    assert pol["price_2"][-1] == pytest.approx(expect, rel=1e-15)


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"price": {"bogus": 1}}))
    assert main(["price", "--config", str(cfg)]) == 2
    assert "bogus" in capsys.readouterr().err


def test_json_format(tmp_path):
    assert main(["simulate", "--prices", "2,2", "--p", "1", "--cost", "1", "--format", "json",
                 "--out-dir", str(tmp_path)]) == 0
    records = json.loads((tmp_path / "trajectory.json").read_text())
    assert [r["t"] for r in records] == [0, 1]
    assert records[1]["F_next"] == pytest.approx(0.5065080247139863, rel=1e-15)
    # 17 significant digits survive a text round trip bit for bit
    assert records[1]["F_next"] == 0.5065080247139863
