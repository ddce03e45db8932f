"""Published parameter rows for the DJIA index and its 30 constituents.

Columns: mu (as printed), omega, alpha, beta, theta, lambda, a, lambda12.
The index row has no a / lambda12.
"""

from __future__ import annotations

import numpy as np

from .filtering import Block, MhnPairParams
from .nig import NigShape, standardize

INDEX_ID = "DJI"

# fmt: off
TABLE1 = {
    "DJI":  (8.66,     0.000001, 0.000003, 0.840298,  0.151432,  1.0,       None,     None),
    "MMM":  (1.49,     0.000009, 0.0,      0.840295,  0.018549, -0.390745,  0.952087, 0.000918),
    "AXP":  (0.0001,   0.000006, 0.000001, 0.870202,  0.230257,  1.0,       1.415957, 0.108178),
    "AMGN": (0.00014,  0.000012, 0.000001, 0.757549, -0.00916,   0.96364,   0.632954, 0.004158),
    "AAPL": (0.00013,  0.00002,  0.000004, 0.662254,  0.171092,  1.0,       1.182302, 0.179858),
    "BA":   (-7.76,    0.000048, 0.000007, 0.62976,   0.058465, -0.621945,  1.36962,  0.034394),
    "CAT":  (0.00011,  0.000023, 0.000002, 0.648263,  0.001017,  1.0,       1.262953, 0.026813),
    "CVX":  (0.00014,  0.000018, 0.000005, 0.721096, -0.005934,  1.0,       0.843095, 0.055101),
    "CSCO": (8.57,     0.000012, 0.0,      0.701285,  0.051159,  1.0,       0.9573,   0.083617),
    "KO":   (8.23,     0.000004, 0.000001, 0.76784,   0.0283,    1.0,       0.573631, 0.03463),
    "DOW":  (-2.45,    0.000019, 0.000004, 0.678403,  0.077407, -0.765006,  1.089206, 0.011707),
    "GS":   (0.00011,  0.000018, 0.000002, 0.644568,  0.067112,  1.0,       1.284256, 0.085429),
    "HD":   (0.00013,  0.000012, 0.000005, 0.698637,  0.035517,  1.0,       1.112192, 0.091865),
    "HON":  (6.42,     0.000009, 0.0,      0.68818,  -0.014114,  0.674985,  1.032844, -0.032961),
    "IBM":  (8.83,     0.000011, 0.000001, 0.725614,  0.010899,  1.0,       0.817048, 0.073229),
    "INTC": (-0.00013, 0.00004,  0.000013, 0.638717, -0.104405, -0.906747,  1.317985, -0.019525),
    "JNJ":  (6.55,     0.000007, 0.000001, 0.785671, -0.029059,  0.683787,  0.470837, -0.04355),
    "JPM":  (0.00011,  0.000013, 0.000002, 0.674442,  0.172963,  1.0,       1.112038, 0.170075),
    "MCD":  (9.11,     0.000002, 0.000001, 0.883167,  0.058064,  1.0,       0.749812, 0.047682),
    "MRK":  (0.0001,   0.000011, 0.000001, 0.799206, -0.017951,  0.975698,  0.392815, -0.012797),
    "MSFT": (0.00013,  0.000004, 0.000001, 0.921528,  0.132346,  1.0,       1.149243, 0.102366),
    "NKE":  (-5.11,    0.000035, 0.0,      0.655882,  0.043161, -0.89331,   1.219035, 0.026398),
    "NVDA": (0.0004,   0.000145, 0.000012, 0.561716,  0.297195,  1.0,       1.761874, 0.192384),
    "PG":   (0.0001,   0.000002, 0.000001, 0.917734,  0.277557,  1.0,       0.539736, -0.052227),
    "CRM":  (0.00012,  0.000038, 0.000006, 0.653484,  0.097962,  0.537626,  1.232857, 0.119671),
    "TRV":  (0.0001,   0.000013, 0.000001, 0.724498,  0.023047,  1.0,       0.823479, 0.019258),
    "UNH":  (0.0001,   0.000011, 0.000003, 0.737053,  0.048746,  1.0,       0.751106, 0.035184),
    "VZ":   (-3.577,   0.000007, 0.000003, 0.788852,  0.007576, -0.980932,  0.452501, -0.01252),
    "V":    (8.183,    0.00001,  0.000002, 0.691946,  0.080326,  1.0,       1.011134, 0.112453),
    "WBA":  (-0.00015, 0.000031, 0.000007, 0.694729, -0.060096, -1.0,       0.995089, -0.070209),
    "WMT":  (8.652,    0.000008, 0.000001, 0.777441,  0.041832,  1.0,       0.518281, 0.053403),
}
# fmt: on

ASSET_IDS = [k for k in TABLE1 if k != INDEX_ID]

# Innovation shapes are not published; a mildly heavy, left-skewed law is used
# for every synthetic series.
FIXTURE_SHAPE: NigShape = standardize(2.0, -0.3)


def block(asset_id: str) -> Block:
    _, omega, alpha, beta, theta, lam, _, _ = TABLE1[asset_id]
    return Block(omega=omega, alpha=alpha, beta=beta, theta=theta, lam=lam)


def pair_params(asset_id: str, r: float = 0.0) -> MhnPairParams:
    """Pair parameters for ``asset_id`` against the index row."""
    idx = block(INDEX_ID)
    if asset_id == INDEX_ID:
        return MhnPairParams.index_only(idx, r=r)
    row = TABLE1[asset_id]
    return MhnPairParams(index=idx, asset=block(asset_id), a=row[6], lam12=row[7], r=r)


def stationarity_margins() -> dict[str, float]:
    return {k: 1.0 - block(k).persistence for k in TABLE1}


def synthetic_panel(T: int = 1008, seed: int = 20241118, r: float = 0.0002, start_price: float = 100.0):
    """Simulate index and constituent log prices from the published rows.

    All assets share one index path. Returns ``(log_prices, ids)`` with
    ``log_prices`` of shape (T+1, 31), index first.
    """
    from .filtering import unconditional_variance
    from .nig import sample

    rng = np.random.default_rng(seed)
    idx = block(INDEX_ID)
    z1 = sample(FIXTURE_SHAPE, T, rng)
    ids = [INDEX_ID] + ASSET_IDS
    out = np.empty((T + 1, len(ids)))
    out[0, :] = np.log(start_price)
    h1 = unconditional_variance(idx)
    h1_path = np.empty(T)
    x = out[0, 0]
    for t in range(T):
        h1_path[t] = h1
        s = np.sqrt(h1)
        x = x + r + idx.lam * h1 + s * z1[t]
        out[t + 1, 0] = x
        h1 = idx.omega + idx.beta * h1 + idx.alpha * (z1[t] - idx.theta * s) ** 2
    for j, aid in enumerate(ASSET_IDS, start=1):
        p = pair_params(aid, r)
        b = p.asset
        zn = sample(FIXTURE_SHAPE, T, rng)
        hn = unconditional_variance(b)
        x = out[0, j]
        for t in range(T):
            s1 = np.sqrt(h1_path[t])
            sn = np.sqrt(hn)
            x = x + r + p.lam12 * h1_path[t] + b.lam * hn + p.a * s1 * z1[t] + sn * zn[t]
            out[t + 1, j] = x
            hn = b.omega + b.beta * hn + b.alpha * (zn[t] - b.theta * sn) ** 2
    return out, ids


def fixture_dates(n: int, start: str = "2019-01-02") -> list[str]:
    days = np.busday_offset(np.datetime64(start), np.arange(n), roll="forward")
    return [str(d) for d in days]


def write_fixture_files(directory, T: int = 1008, seed: int = 20241118, r: float = 0.0002) -> None:
    """Regenerate the bundled price panel and the published parameter file."""
    from pathlib import Path

    from .data_io import ParamRow, PricePanel, save_params, write_prices

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    logp, ids = synthetic_panel(T=T, seed=seed, r=r)
    panel = PricePanel(dates=fixture_dates(T + 1), ids=ids, prices=np.exp(logp), index_id=INDEX_ID)
    write_prices(panel, directory / "synthetic_prices.csv")
    rows = {}
    for aid in TABLE1:
        row = TABLE1[aid]
        rows[aid] = ParamRow(block=block(aid), a=row[6], lam12=row[7], mu=row[0], shape=FIXTURE_SHAPE)
    save_params(directory / "table1_params.json", rows, INDEX_ID, r)
