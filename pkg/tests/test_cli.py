import json
import subprocess

import numpy as np
import pytest

from mhngarch import cli
from mhngarch import data_io as dio

SMALL = {
    "horizon": 20,
    "scenarios": 500,
    "wel_paths": 200,
    "frontier_points": 3,
    "gammas": [1, 3],
    "moneyness": [0.9, 1.0, 1.1],
    "maturities": [21],
    "estimation": {"restarts": 1, "shape_cycles": 1},
}


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    """estimate then every downstream stage on two assets with reduced budgets."""
    out = tmp_path_factory.mktemp("run")
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps(SMALL))
    codes = {}
    for sub in cli.SUBCOMMANDS:
        codes[sub] = cli.main([sub, "--config", str(cfg_path), "--out", str(out), "--assets", "AAPL,KO"])
    return out, codes


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


class TestErrors:
    def test_unknown_subcommand(self, capsys, tmp_path):
        assert cli.main(["plot", "--out", str(tmp_path)]) == 2
        assert _error(capsys)["error"] == "usage"

    def test_bad_flag(self, capsys):
        assert cli.main(["estimate", "--bogus"]) == 2
        assert _error(capsys)["error"] == "usage"

    def test_price_before_estimate(self, capsys, tmp_path):
        assert cli.main(["price", "--out", str(tmp_path)]) == 1
        err = _error(capsys)
        assert "params.json" in err["message"]

    def test_unknown_config_key(self, capsys, tmp_path):
        (tmp_path / "c.json").write_text('{"gamma": 2}')
        assert cli.main(["estimate", "--config", str(tmp_path / "c.json")]) == 1
        assert "gamma" in _error(capsys)["message"]

    def test_unknown_asset(self, capsys, tmp_path):
        assert cli.main(["filter", "--out", str(tmp_path), "--assets", "ZZZ"]) == 1
        assert "ZZZ" in _error(capsys)["message"]

    def test_console_script(self, tmp_path):
        proc = subprocess.run(["mhn", "nonsense", "--out", str(tmp_path)], capture_output=True, text=True)
        assert proc.returncode == 2
        assert json.loads(proc.stderr.strip().splitlines()[-1])["error"] == "usage"


class TestSeeds:
    def test_stable(self):
        assert cli.asset_seed(42, "AAPL") == cli.asset_seed(42, "AAPL")
        assert cli.asset_seed(42, "AAPL") != cli.asset_seed(42, "KO")
        assert cli.asset_seed(42, "AAPL") != cli.asset_seed(43, "AAPL")
        assert 0 <= cli.asset_seed(2**40, "X") < 2**32


@pytest.mark.slow
class TestSmokeRun:
    def test_exit_codes(self, small_run):
        _, codes = small_run
        assert codes == {s: 0 for s in cli.SUBCOMMANDS}

    def test_params(self, small_run):
        out, _ = small_run
        rows, idx, r = dio.load_params(out / "params.json")
        assert idx == "DJI" and set(rows) == {"DJI", "AAPL", "KO"} and r == 0.0002
        header, body = dio.read_table(out / "estimate_report.csv")
        assert len(body) == 3

    def test_volatility(self, small_run):
        out, _ = small_run
        header, body = dio.read_table(out / "volatility.csv")
        assert header[:4] == ["date", "asset", "h_mhn", "hist_vol"]
        assert {b[1] for b in body} == {"DJI", "AAPL", "KO"}
        assert all(float(b[2]) > 0 for b in body)

    def test_surfaces(self, small_run):
        out, _ = small_run
        for aid in ("DJI", "AAPL", "KO"):
            header, body = dio.read_table(out / "surfaces" / f"{aid}.csv")
            assert len(body) == 3
            doc = json.loads((out / "surfaces" / f"{aid}.json").read_text())
            assert len(doc["cells"]) == 3

    def test_optimize(self, small_run):
        out, _ = small_run
        header, body = dio.read_table(out / "optimize" / "AAPL_gamma3.csv")
        assert len(body) == 21
        w = np.array([[float(v) for v in b[1:4]] for b in body[:-1]])
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-10)

    def test_frontier(self, small_run):
        out, _ = small_run
        doc = json.loads((out / "frontier.json").read_text())
        assert {"markowitz", "cvar95", "cvar99", "tangency"} <= set(doc)
        for name in ("markowitz", "cvar95", "cvar99"):
            _, body = dio.read_table(out / f"frontier_{name}.csv")
            for b in body:
                if b[3] == "1":
                    w = np.array([float(v) for v in b[4:]])
                    assert abs(w.sum() - 1) <= 1e-10 and w.min() >= -1e-10

    def test_wel_and_sensitivity(self, small_run):
        out, _ = small_run
        header, body = dio.read_table(out / "wel.csv")
        assert header == ["asset", "gamma", "wel_raw", "wel_negated"] and len(body) == 4
        for b in body:
            assert float(b[2]) == -float(b[3])
        header, body = dio.read_table(out / "sensitivity.csv")
        assert header == ["parameter", "asset", "S_i", "rmss", "step"]
        assert {(b[0], b[4]) for b in body} == {("gamma", "1"), ("rho", "0.1"), ("a", "0.5")}

    def test_tables_round_trip(self, small_run, tmp_path):
        out, _ = small_run
        for path in [out / "wel.csv", out / "volatility.csv", out / "frontier_cvar95.csv"]:
            header, body = dio.read_table(path)
            parsed = [[_parse(v) for v in row] for row in body]
            dio.write_table(tmp_path / path.name, header, parsed)
            assert (tmp_path / path.name).read_text() == path.read_text()


def _parse(s: str):
    try:
        return float(s)
    except ValueError:
        return s
