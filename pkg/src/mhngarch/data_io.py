"""Price panels, returns, rolling volatility and parameter / table persistence."""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .filtering import Block, MhnPairParams
from .nig import NigShape, standardize

__all__ = [
    "PricePanel",
    "ReturnPanel",
    "DataError",
    "load_prices",
    "write_prices",
    "log_returns",
    "rolling_hist_vol",
    "fmt",
    "write_table",
    "read_table",
    "ParamRow",
    "save_params",
    "load_params",
    "pair_from_rows",
    "load_external_vol",
]


class DataError(ValueError):
    pass


@dataclass
class PricePanel:
    dates: list[str]
    ids: list[str]
    prices: np.ndarray
    index_id: str | None = None

    def series(self, asset_id: str) -> np.ndarray:
        return self.prices[:, self.ids.index(asset_id)]


@dataclass
class ReturnPanel:
    dates: list[str]
    ids: list[str]
    returns: np.ndarray

    def series(self, asset_id: str) -> np.ndarray:
        return self.returns[:, self.ids.index(asset_id)]


def fmt(x) -> str:
    """Serialize one value; floats carry 12 significant digits."""
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return "nan"
        return "%.12g" % x
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def load_prices(path, index_id: str | None = None) -> PricePanel:
    """Read a long-format ``date,asset_id,close`` file and inner-join on dates.

    Error messages cite the 1-based data row (the header is not counted).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"price file not found: {path}")
    table: dict[str, dict[str, float]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", "asset_id", "close"]:
            raise DataError("price file header must be date,asset_id,close")
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"row {row_no}: expected 3 fields, got {len(row)}")
            date_s, aid, close_s = (c.strip() for c in row)
            try:
                date = dt.date.fromisoformat(date_s).isoformat()
            except ValueError:
                raise DataError(f"row {row_no}: unparseable date {date_s!r}") from None
            try:
                close = float(close_s)
            except ValueError:
                raise DataError(f"row {row_no}: unparseable price {close_s!r}") from None
            if not (close > 0.0 and math.isfinite(close)):
                raise DataError(f"row {row_no}: non-positive price {close_s}")
            per_asset = table.setdefault(aid, {})
            if date in per_asset:
                raise DataError(f"row {row_no}: duplicate row for ({date}, {aid})")
            per_asset[date] = close
    if not table:
        raise DataError("price file has no rows")
    ids = list(table)
    if index_id is not None and index_id in table:
        ids.remove(index_id)
        ids.insert(0, index_id)
    common = set.intersection(*(set(v) for v in table.values()))
    dates = sorted(common)
    prices = np.array([[table[a][d] for a in ids] for d in dates], dtype=float).reshape(len(dates), len(ids))
    return PricePanel(dates=dates, ids=ids, prices=prices, index_id=index_id if index_id in table else None)


def write_prices(panel: PricePanel, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "asset_id", "close"])
        for i, d in enumerate(panel.dates):
            for j, aid in enumerate(panel.ids):
                w.writerow([d, aid, fmt(float(panel.prices[i, j]))])


def log_returns(panel: PricePanel) -> ReturnPanel:
    if len(panel.dates) < 2:
        raise DataError("need at least two dates for returns")
    return ReturnPanel(dates=panel.dates[1:], ids=list(panel.ids), returns=np.diff(np.log(panel.prices), axis=0))


def rolling_hist_vol(returns, window: int = 20) -> np.ndarray:
    """Trailing sample standard deviation (divisor n-1); the first ``window-1`` entries are NaN."""
    x = np.asarray(returns, dtype=float)
    if window < 2:
        raise ValueError("window must be at least 2")
    if x.shape[0] < window:
        raise ValueError("series shorter than the window")
    out = np.full(x.shape, np.nan)
    views = np.lib.stride_tricks.sliding_window_view(x, window, axis=0)
    sd = views.std(axis=-1, ddof=1)
    # flat windows are exactly zero rather than mean-rounding noise
    sd[np.ptp(views, axis=-1) == 0.0] = 0.0
    out[window - 1:] = sd
    return out


def write_table(path, header: list[str], rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"empty table: {path}")
    return rows[0], rows[1:]


# ---------------------------------------------------------------- parameters

@dataclass
class ParamRow:
    """One fitted row: a variance block, pair loadings, mean return and NIG shape."""

    block: Block
    a: float | None = None
    lam12: float | None = None
    mu: float | None = None
    shape: NigShape | None = None


_BLOCK_KEYS = [("omega", "omega"), ("alpha", "alpha"), ("beta", "beta"), ("theta", "theta"), ("lambda", "lam")]


def _r12(x):
    return None if x is None else float("%.12g" % float(x))


def save_params(path, rows: dict[str, ParamRow], index_id: str, r: float) -> None:
    """Write the parameter file; floats are rounded to 12 significant digits."""
    doc = {"index_id": index_id, "r": r, "rows": {}}
    for aid, row in rows.items():
        entry = {"mu": _r12(row.mu)}
        for key, attr in _BLOCK_KEYS:
            entry[key] = _r12(getattr(row.block, attr))
        entry["a"] = _r12(row.a)
        entry["lambda12"] = _r12(row.lam12)
        entry["nig_alpha"] = None if row.shape is None else _r12(row.shape.alpha)
        entry["nig_beta"] = None if row.shape is None else _r12(row.shape.beta)
        doc["rows"][aid] = entry
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def load_params(path) -> tuple[dict[str, ParamRow], str, float]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"parameter file not found: {path}")
    doc = json.loads(path.read_text())
    rows = {}
    for aid, e in doc["rows"].items():
        block = Block(**{attr: float(e[key]) for key, attr in _BLOCK_KEYS})
        shape = None
        if e.get("nig_alpha") is not None:
            shape = standardize(e["nig_alpha"], e["nig_beta"])
        rows[aid] = ParamRow(block=block, a=e.get("a"), lam12=e.get("lambda12"), mu=e.get("mu"), shape=shape)
    return rows, doc["index_id"], float(doc.get("r", 0.0))


def pair_from_rows(rows: dict[str, ParamRow], index_id: str, asset_id: str, r: float) -> MhnPairParams:
    idx = rows[index_id].block
    if asset_id == index_id:
        return MhnPairParams.index_only(idx, r)
    row = rows[asset_id]
    return MhnPairParams(index=idx, asset=row.block, a=float(row.a or 0.0), lam12=float(row.lam12 or 0.0), r=r)


def load_external_vol(path) -> dict[tuple[str, str], float]:
    """Comparison volatilities from a ``date,asset_id,vol`` file."""
    header, body = read_table(path)
    if [h.strip() for h in header] != ["date", "asset_id", "vol"]:
        raise DataError("external volatility header must be date,asset_id,vol")
    out = {}
    for row_no, row in enumerate(body, start=1):
        try:
            out[(dt.date.fromisoformat(row[0].strip()).isoformat(), row[1].strip())] = float(row[2])
        except (ValueError, IndexError):
            raise DataError(f"row {row_no}: malformed external volatility row") from None
    return out
