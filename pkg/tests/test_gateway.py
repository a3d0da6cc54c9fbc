import math
from datetime import date

import numpy as np
import pytest

from momentvar import cli
from momentvar.errors import InvalidInputError, MissingDataError
from momentvar.gateway.config import empty_config, load_config, parse_config
from momentvar.gateway.filtering import FilterPolicy, OptionRow, filter_options, read_option_csv
from momentvar.gateway.ingest import SchemaError, load_ticks, parse_timestamp, split_sessions
from momentvar.gateway.pipeline import run_pipeline
from momentvar.gateway.reports import read_jsonl, thin_indices, to_jsonable, write_csv
from momentvar.options import CALL, PUT


def write_ticks(tmp_path, lines, header="timestamp,price"):
    p = tmp_path / "ticks.csv"
    p.write_text("\n".join([header, *lines]) + "\n")
    return p


class TestIngest:
    def test_two_rows(self, tmp_path):
        ing = load_ticks(write_ticks(tmp_path, ["0,100", "300,101"]), bar_seconds=300)
        np.testing.assert_allclose(ing.series.logprice, [0.0, math.log(1.01)])
        assert ing.audit.bars == 2 and ing.audit.gaps == 0

    def test_constant_prices(self, tmp_path):
        ing = load_ticks(write_ticks(tmp_path, [f"{60 * i},50" for i in range(30)]), bar_seconds=300)
        assert np.all(ing.series.logprice == 0.0)

    def test_last_tick_in_bar_wins(self, tmp_path):
        ing = load_ticks(write_ticks(tmp_path, ["0,100", "100,105", "299,102", "300,103"]), bar_seconds=300)
        np.testing.assert_allclose(ing.prices, [102, 103])
        assert ing.audit.rows_used == 4

    def test_duplicate_timestamp_last_wins(self, tmp_path):
        ing = load_ticks(write_ticks(tmp_path, ["0,100", "0,99", "300,101"]), bar_seconds=300)
        np.testing.assert_allclose(ing.prices, [99, 101])
        assert ing.audit.duplicates_replaced == 1
        assert ing.audit.rejected == {"duplicate_timestamp": 1}
        assert ing.audit.balanced

    def test_rejections_balance(self, tmp_path):
        rows = ["0,100", "60,-1", "120,0", "abc,3", "180", "400,101", "200,100", "700,nan"]
        ing = load_ticks(write_ticks(tmp_path, rows), bar_seconds=300)
        a = ing.audit
        assert a.rejected == {"nonpositive_price": 2, "unparseable": 3, "out_of_order": 1}
        assert a.rows_in == 8 and a.rows_used == 2
        assert a.balanced

    def test_gaps_recorded(self, tmp_path):
        ing = load_ticks(write_ticks(tmp_path, ["0,100", "300,101", "1500,102", "1800,101"]), bar_seconds=300)
        assert ing.series.gaps == (2,)
        assert ing.audit.gaps == 1

    def test_bad_header(self, tmp_path):
        with pytest.raises(SchemaError):
            load_ticks(write_ticks(tmp_path, ["0,100"], header="time,px"))

    def test_needs_two_bars(self, tmp_path):
        with pytest.raises(InvalidInputError):
            load_ticks(write_ticks(tmp_path, ["0,100", "10,101"]), bar_seconds=300)

    @pytest.mark.parametrize("text, expected", [
        ("86400", 86400.0),
        ("1970-01-02T00:00:00Z", 86400.0),
        ("1970-01-02 00:00:00", 86400.0),
        ("1970-01-02T01:00:00+01:00", 86400.0),
    ])
    def test_timestamps(self, text, expected):
        assert parse_timestamp(text) == expected

    def test_split_sessions(self, tmp_path):
        day = 86_400
        rows = [f"{t},{100 + i}" for i, t in enumerate([0, 300, 600, day, day + 300, day + 600])]
        ing = load_ticks(write_ticks(tmp_path, rows), bar_seconds=300)
        sessions = split_sessions(ing.series)
        assert len(sessions) == 2
        assert all(s.logprice[0] == 0.0 for s in sessions)


def row(strike, right, quote=date(2025, 1, 1), expiry=date(2025, 3, 1), price=1.0, spot=100.0):
    return OptionRow(quote, expiry, strike, right, price, price, spot, 0.0)


class TestFilter:
    def test_itm_rejected(self):
        rows = [row(80, PUT, price=0.5), row(90, PUT), row(110, CALL), row(120, PUT, price=20.0)]
        res = filter_options(rows)
        assert res.audit.rejected == {"itm": 1}
        assert [r.strike for r in res.rows] == [80, 90, 110]

    def test_short_maturity(self):
        rows = [row(k, PUT, expiry=date(2025, 1, 10), price=p) for k, p in ((80, 0.5), (90, 1.0), (95, 2.0))]
        res = filter_options(rows)
        assert res.audit.rejected == {"short_maturity": 3}
        assert res.slices == []

    def test_weekday(self):
        thursday = date(2025, 1, 2)
        rows = [row(k, PUT, quote=thursday, price=p) for k, p in ((80, 0.5), (90, 1.0), (95, 2.0))]
        assert filter_options(rows).audit.rejected == {"weekday": 3}
        assert len(filter_options(rows, FilterPolicy(weekday=None)).slices) == 1
        assert FilterPolicy(weekday="thursday").weekday == 3

    def test_buckets(self):
        pol = FilterPolicy()
        assert pol.bucket(0.9) == "0.85-1.00"
        assert pol.bucket(0.5) == "<0.85"
        assert pol.bucket(1.15) == ">=1.15"

    def test_parity_conversion(self):
        # ITM call at K=90 becomes a put priced C - (S - K)
        rows = [row(80, PUT, price=0.5), row(90, CALL, price=11.0), row(110, CALL)]
        res = filter_options(rows, FilterPolicy(otm_only=False))
        sl = res.slices[0]
        assert sl.rights == (PUT, PUT, CALL)
        assert sl.prices[1] == pytest.approx(1.0)

    def test_golden_file_idempotent_and_balanced(self, golden_options_csv):
        rows = read_option_csv(golden_options_csv)
        first = filter_options(rows)
        second = filter_options(first.rows)
        assert first.audit.balanced and second.audit.balanced
        assert second.rows == first.rows
        assert second.audit.rejected == {}
        assert sum(first.audit.buckets.values()) == first.audit.rows_used

    def test_bad_csv(self, tmp_path):
        p = tmp_path / "o.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(SchemaError):
            read_option_csv(p)


class TestConfig:
    def test_parse(self):
        cfg = parse_config("seed = 3  # comment\nhedge.kinds = tmv\nfilter.otm_only = no\n", env={})
        assert cfg["seed"] == 3
        assert cfg["hedge.kinds"] == ["tmv"]
        assert cfg["filter.otm_only"] is False
        assert cfg["heston.kappa"] == 2.0 and not cfg.explicit("heston.kappa")

    def test_unknown_key(self):
        with pytest.raises(InvalidInputError):
            parse_config("heston.kapa = 1\n", env={})

    def test_bad_value(self):
        with pytest.raises(InvalidInputError):
            parse_config("sim.n_paths = many\n", env={})

    def test_env_seed_override(self):
        assert parse_config("seed = 3\n", env={"MOMENTVAR_SEED": "9"})["seed"] == 9

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidInputError):
            load_config(tmp_path / "nope.cfg")


def test_reports_helpers(tmp_path):
    assert to_jsonable({"a": np.float64(np.nan), "b": np.arange(2)}) == {"a": None, "b": [0, 1]}
    idx = thin_indices(1000, 10)
    assert len(idx) <= 10 and idx[0] == 0 and idx[-1] == 999
    p = write_csv(tmp_path / "x.csv", ("a", "b"), [(0.1, 2)])
    assert p.read_bytes() == b"a,b\r\n0.1,2\r\n"


SIM_CFG = """\
seed = 5
heston.mu = 0.05
heston.kappa = 4
heston.theta = 0.09
heston.sigma = 0.4
heston.rho = -0.9
sim.n_paths = 2000
sim.n_steps = 40
sim.horizon_T = 0.1
"""


class TestPipeline:
    def cfg(self, extra=""):
        return parse_config(SIM_CFG + extra, env={})

    def test_simulate(self, tmp_path):
        b = run_pipeline(self.cfg(), "simulate", out_dir=tmp_path)
        rel = b.find("moment_relation")[0]
        assert {"bias3", "bias4", "m3", "m4"} <= set(rel)
        assert (tmp_path / "simulate.jsonl").exists() and (tmp_path / "simulate_paths.csv").exists()

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_pipeline(self.cfg(), "hedge", out_dir=a)
        run_pipeline(self.cfg(), "hedge", out_dir=b)
        for f in sorted(a.iterdir()):
            assert f.read_bytes() == (b / f.name).read_bytes()

    def test_hedge_records(self, tmp_path):
        b = run_pipeline(self.cfg(), "hedge", out_dir=tmp_path)
        hedges = {r["kind"]: r for r in b.find("hedge")}
        assert set(hedges) == {"tmv", "fmv"}
        for r in hedges.values():
            assert {"base_skewness", "hedged_skewness", "hedged_qq_rmse", "optimal_kurtosis"} <= set(r)

    def test_jumps_with_scales(self, tmp_path):
        extra = "jumps.intensity = 5\njumps.mean = -0.1\njumps.sd = 0.05\njumps.scales = 0.4, 0.2, 0.1\n"
        b = run_pipeline(self.cfg(extra), "jumps", out_dir=tmp_path)
        assert b.find("jump_corrections")[0]["j3"] < 0
        assert b.find("jump_order")[0]["slope_j3"] > 2

    def test_jumps_needs_intensity(self, tmp_path):
        with pytest.raises(InvalidInputError):
            run_pipeline(self.cfg(), "jumps", out_dir=tmp_path)

    def test_implied_golden(self, tmp_path, golden_options_csv):
        b = run_pipeline(empty_config(env={}), "implied", target=str(golden_options_csv), out_dir=tmp_path)
        m = b.find("implied_moments")
        assert len(m) == 1
        assert m[0]["qv_implied"] == pytest.approx(0.04, rel=5e-3)

    def test_realized(self, tmp_path):
        lines = [f"{300 * i},{100 * math.exp(0.001 * math.sin(i))}" for i in range(600)]
        ticks = write_ticks(tmp_path, lines)
        b = run_pipeline(empty_config(env={}), "realized", target=str(ticks), out_dir=tmp_path / "out")
        assert b.find("ingest_audit")[0]["balanced"]
        full = b.find("variation")[0]
        assert full["qv"] > 0
        assert (tmp_path / "out" / "realized_series.csv").exists()

    def test_report_index(self, tmp_path):
        run_pipeline(self.cfg(), "simulate", out_dir=tmp_path)
        b = run_pipeline(empty_config(env={}), "report", target=str(tmp_path))
        files = b.find("report_file")
        assert [f["file"] for f in files] == ["simulate.jsonl"]
        assert read_jsonl(tmp_path / "report.jsonl")[0]["record"] == "meta"

    def test_report_missing_dir(self, tmp_path):
        with pytest.raises(MissingDataError):
            run_pipeline(empty_config(env={}), "report", target=str(tmp_path / "none"), write=False)


class TestCli:
    def test_simulate_ok(self, tmp_path, capsys):
        cfg = tmp_path / "sim.cfg"
        cfg.write_text(SIM_CFG)
        assert cli.main(["simulate", str(cfg), "--out", str(tmp_path / "o")]) == 0
        assert "simulate.jsonl" in capsys.readouterr().out

    def test_missing_config(self, tmp_path, capsys):
        assert cli.main(["hedge", str(tmp_path / "missing.cfg")]) == 1
        assert "error" in capsys.readouterr().err

    def test_bad_ticks(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("x,y\n")
        assert cli.main(["realized", str(p), "--out", str(tmp_path)]) == 1

    def test_usage_error(self):
        with pytest.raises(SystemExit):
            cli.main(["nope"])
