import filecmp
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhngarch import data_io as dio
from mhngarch import fixtures
from mhngarch.config import RunConfig, bundled_path


def _write(path, lines):
    path.write_text("date,asset_id,close\n" + "\n".join(lines) + "\n")
    return path


@pytest.fixture
def three_asset_file(tmp_path):
    lines = []
    for i, d in enumerate(["2024-01-02", "2024-01-03", "2024-01-04", "2024-01-05"]):
        for j, aid in enumerate(["IDX", "A", "B"]):
            lines.append(f"{d},{aid},{100 + i + 10 * j}")
    return _write(tmp_path / "p.csv", lines)


class TestLoadPrices:
    def test_well_formed(self, three_asset_file):
        panel = dio.load_prices(three_asset_file, index_id="B")
        assert panel.ids == ["B", "IDX", "A"]
        assert panel.prices.shape == (4, 3)
        assert panel.index_id == "B"

    def test_inner_join(self, tmp_path):
        p = _write(tmp_path / "p.csv", ["2024-01-02,A,1", "2024-01-02,B,2", "2024-01-03,A,1.1",
                                        "2024-01-04,A,1.2", "2024-01-04,B,2.2"])
        panel = dio.load_prices(p)
        assert panel.dates == ["2024-01-02", "2024-01-04"]

    def test_zero_price_row_number(self, tmp_path):
        lines = [f"2024-01-{d:02d},A,{100 + d}" for d in range(1, 17)] + ["2024-01-17,A,0"]
        with pytest.raises(dio.DataError, match="row 17"):
            dio.load_prices(_write(tmp_path / "p.csv", lines))

    @pytest.mark.parametrize(
        "bad,pattern",
        [("2024-13-01,A,1", "unparseable date"), ("2024-01-03,A,x", "unparseable price"),
         ("2024-01-02,A,5", "duplicate"), ("2024-01-03,A,-1", "non-positive")],
    )
    def test_errors_cite_row(self, tmp_path, bad, pattern):
        with pytest.raises(dio.DataError, match=rf"row 2: .*{pattern}|row 2: {pattern}"):
            dio.load_prices(_write(tmp_path / "p.csv", ["2024-01-02,A,1", bad]))

    def test_header(self, tmp_path):
        (tmp_path / "p.csv").write_text("d,a,c\n2024-01-02,A,1\n")
        with pytest.raises(dio.DataError, match="header"):
            dio.load_prices(tmp_path / "p.csv")

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            dio.load_prices(tmp_path / "nope.csv")

    def test_round_trip(self, three_asset_file, tmp_path):
        first = dio.load_prices(three_asset_file)
        dio.write_prices(first, tmp_path / "again.csv")
        second = dio.load_prices(tmp_path / "again.csv")
        dio.write_prices(second, tmp_path / "third.csv")
        assert filecmp.cmp(tmp_path / "again.csv", tmp_path / "third.csv", shallow=False)
        np.testing.assert_array_equal(first.prices, second.prices)


class TestReturns:
    def test_values(self):
        panel = dio.PricePanel(["d0", "d1", "d2"], ["A"], np.array([[100.0], [110.0], [99.0]]))
        r = dio.log_returns(panel)
        assert r.returns[0, 0] == pytest.approx(0.0953102, abs=1e-7)
        assert r.dates == ["d1", "d2"]

    def test_constant(self):
        panel = dio.PricePanel(["a", "b", "c"], ["A"], np.full((3, 1), 5.0))
        assert np.all(dio.log_returns(panel).returns == 0.0)

    @given(st.lists(st.floats(0.1, 1e4), min_size=3, max_size=30))
    def test_reversal(self, prices):
        p = np.array(prices)[:, None]
        fwd = dio.log_returns(dio.PricePanel([str(i) for i in range(len(prices))], ["A"], p)).returns
        back = dio.log_returns(dio.PricePanel([str(i) for i in range(len(prices))], ["A"], p[::-1])).returns
        np.testing.assert_allclose(-back[::-1], fwd, atol=1e-12)

    def test_too_short(self):
        with pytest.raises(dio.DataError):
            dio.log_returns(dio.PricePanel(["a"], ["A"], np.ones((1, 1))))


class TestHistVol:
    def test_constant(self):
        out = dio.rolling_hist_vol(np.full(40, 0.01))
        assert np.all(np.isnan(out[:19])) and np.all(out[19:] == 0.0)

    def test_alternating(self):
        x = 0.02 * (-1.0) ** np.arange(60)
        np.testing.assert_allclose(dio.rolling_hist_vol(x)[19:], 0.02 * math.sqrt(20 / 19), rtol=1e-13)

    def test_full_window(self):
        x = np.random.default_rng(0).normal(size=25)
        out = dio.rolling_hist_vol(x, window=25)
        assert out[-1] == pytest.approx(np.std(x, ddof=1), rel=1e-14)
        assert np.isnan(out[:-1]).all()

    def test_panel_columns(self):
        x = np.random.default_rng(1).normal(size=(50, 3))
        out = dio.rolling_hist_vol(x, window=10)
        for j in range(3):
            assert out[30, j] == pytest.approx(np.std(x[21:31, j], ddof=1), rel=1e-13)

    def test_short(self):
        with pytest.raises(ValueError):
            dio.rolling_hist_vol(np.zeros(5))


class TestParams:
    def test_schema(self):
        doc = json.loads(bundled_path("table1_params.json").read_text())
        assert doc["index_id"] == "DJI" and len(doc["rows"]) == 31
        assert list(doc["rows"]["AAPL"]) == ["mu", "omega", "alpha", "beta", "theta", "lambda", "a", "lambda12",
                                             "nig_alpha", "nig_beta"]

    def test_round_trip(self, tmp_path):
        rows, idx, r = dio.load_params(bundled_path("table1_params.json"))
        dio.save_params(tmp_path / "p.json", rows, idx, r)
        assert (tmp_path / "p.json").read_text() == bundled_path("table1_params.json").read_text()

    def test_published_values(self):
        rows, idx, r = dio.load_params(bundled_path("table1_params.json"))
        p = dio.pair_from_rows(rows, idx, "AAPL", r)
        assert p == fixtures.pair_params("AAPL", r=0.0002)

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="nope.json"):
            dio.load_params(tmp_path / "nope.json")


class TestTables:
    def test_fmt(self):
        assert dio.fmt(1 / 3) == "0.333333333333"
        assert dio.fmt(float("nan")) == "nan"
        assert dio.fmt(np.int64(4)) == "4"

    def test_round_trip_fixed_point(self, tmp_path):
        rows = [["x", 1 / 7, float("nan")], ["y", 1e-300, -2.5]]
        dio.write_table(tmp_path / "a.csv", ["id", "v", "w"], rows)
        header, body = dio.read_table(tmp_path / "a.csv")
        parsed = [[b[0], float(b[1]), float(b[2])] for b in body]
        dio.write_table(tmp_path / "b.csv", header, parsed)
        assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()

    def test_external_vol(self, tmp_path):
        (tmp_path / "v.csv").write_text("date,asset_id,vol\n2024-01-02,A,0.011\n")
        assert dio.load_external_vol(tmp_path / "v.csv") == {("2024-01-02", "A"): 0.011}
        (tmp_path / "w.csv").write_text("date,asset_id,vol\n2024-01-02,A\n")
        with pytest.raises(dio.DataError, match="row 1"):
            dio.load_external_vol(tmp_path / "w.csv")


class TestFixtures:
    def test_stationary_margins(self):
        assert min(fixtures.stationarity_margins().values()) >= 1e-6

    def test_bundled_files_regenerate(self, tmp_path):
        fixtures.write_fixture_files(tmp_path)
        for name in ("synthetic_prices.csv", "table1_params.json"):
            assert filecmp.cmp(tmp_path / name, bundled_path(name), shallow=False), name

    def test_bundled_panel_shape(self):
        panel = dio.load_prices(bundled_path("synthetic_prices.csv"), "DJI")
        assert panel.ids[0] == "DJI" and len(panel.ids) == 31 and len(panel.dates) == 1009


class TestRunConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert cfg.r == 0.0002 and cfg.gammas == (1, 2, 3, 4, 5, 6)
        assert cfg.scenarios == 10_000 and cfg.seed == 42

    def test_json_overrides(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"horizon": 20, "estimation": {"restarts": 2}}))
        cfg = RunConfig.from_json(tmp_path / "c.json", seed=7, out_dir=None)
        assert cfg.horizon == 20 and cfg.estimation.restarts == 2 and cfg.seed == 7 and cfg.out_dir == "out"

    def test_unknown_key(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"horizn": 20}))
        with pytest.raises(ValueError, match="horizn"):
            RunConfig.from_json(tmp_path / "c.json")

    @pytest.mark.parametrize("kw", [{"horizon": 0}, {"scenarios": 10}, {"gammas": [1, -2]}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            RunConfig(**kw)
