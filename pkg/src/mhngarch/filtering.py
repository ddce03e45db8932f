"""Bivariate affine GARCH(1,1) filter for an index/asset pair.

Log prices follow

    x1[t] = x1[t-1] + r + lam1 * h1[t] + sqrt(h1[t]) * z1[t]
    xn[t] = xn[t-1] + r + lam12 * h1[t] + lamn * hn[t] + a * sqrt(h1[t]) * z1[t] + sqrt(hn[t]) * zn[t]

and each variance follows the Heston-Nandi news recursion
``h[t+1] = omega + beta * h[t] + alpha * (z[t] - theta * sqrt(h[t]))**2``.
``h[t]`` is known one period ahead: the return from t-1 to t is scaled by the
variance built from shocks up to t-1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .nig import HEAVY_DEFAULT, NigShape, log_pdf, sample

__all__ = [
    "Block",
    "MhnPairParams",
    "FilteredPath",
    "variance_step",
    "unconditional_variance",
    "vol_news_covariance",
    "extract_innovations",
    "neg_log_likelihood",
    "simulate_pair",
    "NonFiniteInputError",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class NonFiniteInputError(ValueError):
    def __init__(self, position: int, series: str):
        super().__init__(f"non-finite observation in {series} series at position {position}")
        self.position = position
        self.series = series


@dataclass(frozen=True)
class Block:
    """One variance block: omega, alpha, beta, theta plus the variance risk premium lam."""

    omega: float
    alpha: float
    beta: float
    theta: float
    lam: float

    @property
    def persistence(self) -> float:
        return self.beta + self.alpha * self.theta**2

    def is_stationary(self, margin: float = 0.0) -> bool:
        return (
            self.omega >= 0.0
            and self.alpha >= 0.0
            and 0.0 <= self.beta < 1.0
            and self.persistence < 1.0 - margin
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.omega, self.alpha, self.beta, self.theta, self.lam])


@dataclass(frozen=True)
class MhnPairParams:
    """Parameters of one index/asset system.

    The index on its own is the degenerate pair ``asset = index, a = 0, lam12 = 0``.
    """

    index: Block
    asset: Block
    a: float = 0.0
    lam12: float = 0.0
    r: float = 0.0

    @classmethod
    def index_only(cls, index: Block, r: float = 0.0) -> "MhnPairParams":
        return cls(index=index, asset=index, a=0.0, lam12=0.0, r=r)

    def with_asset(self, asset: Block, a: float, lam12: float) -> "MhnPairParams":
        return replace(self, asset=asset, a=a, lam12=lam12)


@dataclass
class FilteredPath:
    h1: np.ndarray
    hn: np.ndarray
    z1: np.ndarray
    zn: np.ndarray
    nll: float = float("nan")
    # variance for the period after the last observation
    h1_next: float = float("nan")
    hn_next: float = float("nan")
    extra: dict = field(default_factory=dict)


def variance_step(h, z, block: Block):
    """One step of the news recursion."""
    return block.omega + block.beta * h + block.alpha * (z - block.theta * np.sqrt(h)) ** 2


def unconditional_variance(block: Block) -> float:
    denom = 1.0 - block.beta - block.alpha * block.theta**2
    if denom <= 0.0:
        raise ValueError(f"block is not covariance stationary (beta + alpha*theta^2 = {1.0 - denom})")
    return (block.omega + block.alpha) / denom


def vol_news_covariance(block: Block, h: float, a_n: float = 0.0, is_index: bool = True) -> float:
    """Conditional covariance between next-period variance and the current log price."""
    cov = -2.0 * block.alpha * block.theta * h
    return cov if is_index else cov * (a_n + 1.0)


@numba.njit(cache=True)
def _filter_index(dx1, r, omega, alpha, beta, theta, lam, h0):
    T = dx1.shape[0]
    h = np.empty(T + 1)
    z = np.empty(T)
    h[0] = h0
    for t in range(T):
        ht = h[t]
        if not ht > 0.0:
            h[t + 1 :] = np.nan
            z[t:] = np.nan
            return h, z, False
        s = math.sqrt(ht)
        zt = (dx1[t] - r - lam * ht) / s
        z[t] = zt
        u = zt - theta * s
        h[t + 1] = omega + beta * ht + alpha * u * u
    return h, z, True


@numba.njit(cache=True)
def _filter_asset(dxn, h1, z1, r, omega, alpha, beta, theta, lam, a, lam12, h0):
    T = dxn.shape[0]
    h = np.empty(T + 1)
    z = np.empty(T)
    h[0] = h0
    for t in range(T):
        ht = h[t]
        if not ht > 0.0:
            h[t + 1 :] = np.nan
            z[t:] = np.nan
            return h, z, False
        s = math.sqrt(ht)
        mean = r + lam12 * h1[t] + lam * ht + a * math.sqrt(h1[t]) * z1[t]
        zt = (dxn[t] - mean) / s
        z[t] = zt
        u = zt - theta * s
        h[t + 1] = omega + beta * ht + alpha * u * u
    return h, z, True


def _check_finite(x: np.ndarray, name: str) -> None:
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise NonFiniteInputError(int(bad[0]), name)


def _default_h0(params: MhnPairParams, h0):
    if h0 is not None:
        return float(h0[0]), float(h0[1])
    return unconditional_variance(params.index), unconditional_variance(params.asset)


def filter_index(dx1: np.ndarray, params: MhnPairParams, h0: float):
    b = params.index
    return _filter_index(dx1, params.r, b.omega, b.alpha, b.beta, b.theta, b.lam, h0)


def filter_asset(dxn: np.ndarray, h1: np.ndarray, z1: np.ndarray, params: MhnPairParams, h0: float):
    b = params.asset
    return _filter_asset(
        dxn, h1, z1, params.r, b.omega, b.alpha, b.beta, b.theta, b.lam, params.a, params.lam12, h0
    )


def extract_innovations(x1, xn, params: MhnPairParams, h0=None) -> FilteredPath:
    """Recover standardized innovations and variances from a pair of log-price series.

    ``x1`` and ``xn`` hold T+1 aligned log prices; the result covers the T increments.
    ``h0`` defaults to the unconditional variances of the two blocks.
    """
    x1 = np.asarray(x1, dtype=float)
    xn = np.asarray(xn, dtype=float)
    if x1.shape != xn.shape or x1.ndim != 1 or x1.size < 2:
        raise ValueError("log-price series must be aligned 1-d arrays of length >= 2")
    _check_finite(x1, "index")
    _check_finite(xn, "asset")
    h10, hn0 = _default_h0(params, h0)
    if not (h10 > 0.0 and hn0 > 0.0):
        raise ValueError("initial variances must be strictly positive")
    h1, z1, ok1 = filter_index(np.diff(x1), params, h10)
    hn, zn, okn = filter_asset(np.diff(xn), h1, z1, params, hn0)
    path = FilteredPath(h1=h1[:-1], hn=hn[:-1], z1=z1, zn=zn, h1_next=h1[-1], hn_next=hn[-1])
    path.extra["feasible"] = bool(ok1 and okn)
    return path


def _log_density(z: np.ndarray, shape: NigShape | None) -> np.ndarray:
    if shape is None:
        return -0.5 * z * z - _LOG_SQRT_2PI
    return log_pdf(z, shape)


def pair_nll_terms(h1, hn, z1, zn, shapes) -> np.ndarray:
    """Per-period contributions; ``shapes=None`` means Gaussian innovations."""
    s1, sn = (None, None) if shapes is None else shapes
    return 0.5 * (np.log(h1) + np.log(hn)) - _log_density(z1, s1) - _log_density(zn, sn)


def neg_log_likelihood(x1, xn, params: MhnPairParams, shapes=None, h0=None, burn_in: int = 0) -> float:
    """Objective to minimize: sum of 0.5*(log h1 + log hn) - log f(z1) - log f(zn).

    Returns ``inf`` when a variance leaves the positive half-line.
    """
    try:
        path = extract_innovations(x1, xn, params, h0)
    except ValueError:
        return math.inf
    if not path.extra["feasible"]:
        return math.inf
    terms = pair_nll_terms(path.h1, path.hn, path.z1, path.zn, shapes)[burn_in:]
    val = float(np.sum(terms))
    return val if math.isfinite(val) else math.inf


def simulate_pair(
    params: MhnPairParams,
    shapes: tuple[NigShape, NigShape] = (HEAVY_DEFAULT, HEAVY_DEFAULT),
    T: int = 1000,
    seed=0,
    x0: tuple[float, float] = (0.0, 0.0),
    h0=None,
):
    """Forward simulation. Returns ``(x1, xn, path)`` with T+1 log prices per series."""
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = np.random.default_rng(seed)
    z1 = sample(shapes[0], T, rng) if shapes[0] is not None else rng.standard_normal(T)
    zn = sample(shapes[1], T, rng) if shapes[1] is not None else rng.standard_normal(T)
    h10, hn0 = _default_h0(params, h0)
    x1, xn, h1, hn = _simulate(z1, zn, params, h10, hn0, x0)
    path = FilteredPath(h1=h1[:-1], hn=hn[:-1], z1=z1, zn=zn, h1_next=h1[-1], hn_next=hn[-1])
    return x1, xn, path


def _simulate(z1, zn, params: MhnPairParams, h10, hn0, x0):
    b1, bn = params.index, params.asset
    return _simulate_kernel(
        z1, zn, params.r,
        b1.omega, b1.alpha, b1.beta, b1.theta, b1.lam,
        bn.omega, bn.alpha, bn.beta, bn.theta, bn.lam,
        params.a, params.lam12, h10, hn0, float(x0[0]), float(x0[1]),
    )


@numba.njit(cache=True)
def _simulate_kernel(z1, zn, r, o1, a1, b1, t1, l1, on, an, bn, tn, ln_, a, lam12, h10, hn0, x10, xn0):
    T = z1.shape[0]
    x1 = np.empty(T + 1)
    xn = np.empty(T + 1)
    h1 = np.empty(T + 1)
    hn = np.empty(T + 1)
    x1[0] = x10
    xn[0] = xn0
    h1[0] = h10
    hn[0] = hn0
    for t in range(T):
        s1 = math.sqrt(h1[t])
        sn = math.sqrt(hn[t])
        x1[t + 1] = x1[t] + (r + l1 * h1[t] + s1 * z1[t])
        xn[t + 1] = xn[t] + (r + lam12 * h1[t] + ln_ * hn[t] + a * s1 * z1[t] + sn * zn[t])
        u1 = z1[t] - t1 * s1
        un = zn[t] - tn * sn
        h1[t + 1] = o1 + b1 * h1[t] + a1 * u1 * u1
        hn[t + 1] = on + bn * hn[t] + an * un * un
    return x1, xn, h1, hn
