"""Two-stage constrained maximum likelihood for the pair model.

Stage one fits the five index parameters on index returns alone. Stage two
holds the index block fixed and fits the seven asset parameters
(omega, alpha, beta, theta, lambda, a, lambda12). Each stage runs a
multi-start Nelder-Mead search inside a parameter box, then fits the NIG
innovation shape on the residuals and re-fits once under that shape.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, stats

from . import nig
from .filtering import (
    Block,
    MhnPairParams,
    filter_asset,
    filter_index,
    pair_nll_terms,
    unconditional_variance,
)

log = logging.getLogger(__name__)

__all__ = [
    "EstimationConfig",
    "FitReport",
    "initial_guess",
    "estimate_index",
    "estimate_pair",
    "EstimationError",
]

_INFEASIBLE = 1e12
STATIONARITY_MARGIN = 1e-6


class EstimationError(ValueError):
    pass


DEFAULT_BOUNDS = {
    "omega": (1e-12, 1e-2),
    "alpha": (0.0, 1e-2),
    "beta": (0.0, 0.999),
    "theta": (-5.0, 5.0),
    "lam": (-1.0, 1.0),
    "a": (0.0, 3.0),
    "lam12": (-1.0, 1.0),
}

# alpha is searched on a log scale, so its zero lower bound becomes this floor
_ALPHA_FLOOR = 1e-12


@dataclass
class EstimationConfig:
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    max_iter: int = 3000
    tol: float = 1e-9
    restarts: int = 5
    seed: int = 0
    low_corr_threshold: float = 0.3
    narrowed_lam12: tuple[float, float] = (-0.25, 0.25)
    shape_cycles: int = 2
    burn_in: int = 0
    r: float = 0.0
    # fresh-simplex restarts from the incumbent; a restart that improves the
    # objective by less than polish_tol (relative) also counts as convergence
    polish: int = 3
    polish_tol: float = 1e-7


@dataclass
class FitReport:
    params: MhnPairParams
    shapes: tuple
    objective: float
    iterations: int
    converged: bool
    min_hessian_eig: float = float("nan")
    convex: bool = False
    h0: tuple = (float("nan"), float("nan"))
    lam12_bounds: tuple = (float("nan"), float("nan"))
    message: str = ""


def _moments(series: np.ndarray) -> tuple[float, float]:
    x = np.asarray(series, dtype=float)
    if x.size < 250:
        raise EstimationError(f"need at least 250 returns, got {x.size}")
    if np.ptp(x) == 0.0:
        raise EstimationError("return series has zero variance")
    var = float(np.var(x, ddof=1))
    return var, float(stats.skew(x))


def initial_guess(series, bounds: dict | None = None, var: float | None = None) -> Block:
    """Moment-based start for one variance block.

    ``var`` overrides the sample variance, e.g. with an idiosyncratic variance.
    """
    bounds = bounds or DEFAULT_BOUNDS
    sample_var, skew = _moments(series)
    var = sample_var if var is None else var
    beta = 0.8
    theta = 0.1 * (1.0 if skew >= 0 else -1.0)
    omega = 0.1 * var
    # (omega + alpha) / (1 - beta) matches var when alpha*theta^2 is negligible
    alpha = max(var * (1.0 - beta) - omega, 0.0)
    lam = 0.5
    omega = min(max(omega, bounds["omega"][0]), bounds["omega"][1])
    alpha = min(max(alpha, max(bounds["alpha"][0], _ALPHA_FLOOR)), bounds["alpha"][1])
    return Block(omega=omega, alpha=alpha, beta=beta, theta=theta, lam=lam)


# ---------------------------------------------------------------- transforms

def _block_to_u(b: Block) -> list[float]:
    return [math.log(b.omega), math.log(max(b.alpha, _ALPHA_FLOOR)), b.beta, b.theta, b.lam]


def _u_to_block(u) -> Block:
    return Block(omega=math.exp(u[0]), alpha=math.exp(u[1]), beta=u[2], theta=u[3], lam=u[4])


def _block_box(bounds: dict) -> list[tuple[float, float]]:
    return [
        (math.log(bounds["omega"][0]), math.log(bounds["omega"][1])),
        (math.log(max(bounds["alpha"][0], _ALPHA_FLOOR)), math.log(bounds["alpha"][1])),
        bounds["beta"],
        bounds["theta"],
        bounds["lam"],
    ]


_JITTER = np.array([0.5, 1.0, 0.1, 0.2, 0.3, 0.3, 0.1])
_SIMPLEX_STEP = np.array([0.5, 1.0, 0.05, 0.1, 0.2, 0.2, 0.1])


def _clip(u, box):
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return np.clip(u, lo, hi)


def _simplex(u0, box):
    n = len(u0)
    pts = [np.array(u0, dtype=float)]
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    for i in range(n):
        p = pts[0].copy()
        step = _SIMPLEX_STEP[i]
        p[i] = p[i] + step if p[i] + step <= hi[i] else p[i] - step
        p[i] = min(max(p[i], lo[i]), hi[i])
        pts.append(p)
    return np.array(pts)


def _nelder_mead(fun, start, box, cfg: EstimationConfig, f0: float):
    return optimize.minimize(
        fun,
        start,
        method="Nelder-Mead",
        bounds=box,
        options={
            "maxiter": cfg.max_iter,
            "maxfev": 2 * cfg.max_iter,
            "initial_simplex": _simplex(start, box),
            "xatol": 1e-7,
            "fatol": cfg.tol * max(1.0, abs(f0)),
            "adaptive": len(start) > 5,
        },
    )


def _multistart(fun, u0, box, cfg: EstimationConfig, restarts: int):
    """Best of jittered Nelder-Mead runs, then polished by fresh-simplex restarts.

    Returns ``(result, evaluations, converged)``.
    """
    rng = np.random.default_rng(cfg.seed)
    starts = [_clip(np.asarray(u0, dtype=float), box)]
    for _ in range(restarts - 1):
        jit = rng.standard_normal(len(u0)) * _JITTER[: len(u0)]
        starts.append(_clip(starts[0] + jit, box))
    best, nfev = None, 0
    for s in starts:
        f0 = fun(s)
        if f0 >= _INFEASIBLE:
            continue
        res = _nelder_mead(fun, s, box, cfg, f0)
        nfev += res.nfev
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise EstimationError("no feasible starting point")
    converged = bool(best.success)
    for _ in range(cfg.polish):
        if converged:
            break
        res = _nelder_mead(fun, best.x, box, cfg, best.fun)
        nfev += res.nfev
        gain = best.fun - res.fun
        if res.fun < best.fun:
            best = res
        converged = bool(res.success) or gain <= cfg.polish_tol * max(1.0, abs(best.fun))
    return best, nfev, converged


def _hessian_min_eig(fun, u, box, step=1e-4) -> float:
    u = np.asarray(u, dtype=float)
    n = u.size
    H = np.empty((n, n))
    f0 = fun(u)
    e = np.eye(n) * step
    for i in range(n):
        for j in range(i, n):
            fpp = fun(u + e[i] + e[j])
            fpm = fun(u + e[i] - e[j])
            fmp = fun(u - e[i] + e[j])
            fmm = fun(u - e[i] - e[j])
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4 * step * step)
    if not np.all(np.isfinite(H)) or abs(f0) >= _INFEASIBLE:
        return float("nan")
    return float(np.linalg.eigvalsh(H).min())


# ---------------------------------------------------------------- index stage

def _index_objective(dx1, cfg: EstimationConfig, shape):
    r = cfg.r
    burn = cfg.burn_in

    def fun(u):
        b = _u_to_block(u)
        if b.persistence >= 1.0 - STATIONARITY_MARGIN or b.beta < 0:
            return _INFEASIBLE
        h0 = unconditional_variance(b)
        h, z, ok = filter_index(dx1, MhnPairParams.index_only(b, r), h0)
        if not ok:
            return _INFEASIBLE
        ll = 0.5 * np.log(h[:-1]) - nig.log_pdf(z, shape)
        val = float(np.sum(ll[burn:]))
        return val if math.isfinite(val) else _INFEASIBLE

    return fun


def _fit_shape_or_default(z: np.ndarray) -> nig.NigShape:
    try:
        return nig.fit_shape(z)
    except nig.NigFitError as exc:
        log.warning("NIG shape fit failed (%s); using heavy default", exc)
        return nig.HEAVY_DEFAULT


def estimate_index(series, config: EstimationConfig | None = None) -> FitReport:
    """Fit the five index parameters to index log returns."""
    cfg = config or EstimationConfig()
    dx1 = np.asarray(series, dtype=float)
    start = initial_guess(dx1, cfg.bounds)
    box = _block_box(cfg.bounds)
    shape = nig.HEAVY_DEFAULT
    u = np.array(_block_to_u(start))
    total = 0
    res = None
    for cycle in range(cfg.shape_cycles):
        fun = _index_objective(dx1, cfg, shape)
        res, nfev, nm_ok = _multistart(fun, u, box, cfg, cfg.restarts if cycle == 0 else 1)
        total += nfev
        u = res.x
        b = _u_to_block(u)
        h, z, _ = filter_index(dx1, MhnPairParams.index_only(b, cfg.r), unconditional_variance(b))
        if cycle < cfg.shape_cycles - 1:
            shape = _fit_shape_or_default(z)
    fun = _index_objective(dx1, cfg, shape)
    b = _u_to_block(u)
    params = MhnPairParams.index_only(b, cfg.r)
    converged = nm_ok and b.is_stationary(STATIONARITY_MARGIN)
    eig = _hessian_min_eig(fun, u, box)
    return FitReport(
        params=params,
        shapes=(shape, shape),
        objective=float(res.fun),
        iterations=total,
        converged=converged,
        min_hessian_eig=eig,
        convex=bool(np.isfinite(eig) and eig >= -1e-6),
        h0=(unconditional_variance(b), unconditional_variance(b)),
        message=str(res.message),
    )


# ---------------------------------------------------------------- pair stage

def _pair_objective(dxn, h1, z1, index_terms, base: MhnPairParams, shape_n, cfg: EstimationConfig):
    burn = cfg.burn_in

    def fun(u):
        b = _u_to_block(u[:5])
        if b.persistence >= 1.0 - STATIONARITY_MARGIN or b.beta < 0:
            return _INFEASIBLE
        p = base.with_asset(b, a=u[5], lam12=u[6])
        h, z, ok = filter_asset(dxn, h1, z1, p, unconditional_variance(b))
        if not ok:
            return _INFEASIBLE
        terms = index_terms + 0.5 * np.log(h[:-1]) - nig.log_pdf(z, shape_n)
        val = float(np.sum(terms[burn:]))
        return val if math.isfinite(val) else _INFEASIBLE

    return fun


def estimate_pair(asset_series, index_fit: FitReport, config: EstimationConfig | None = None,
                  index_series=None) -> FitReport:
    """Fit the seven asset parameters with the index block held at ``index_fit``.

    ``index_series`` are the index log returns aligned with ``asset_series``.
    """
    cfg = config or EstimationConfig()
    if index_series is None:
        raise EstimationError("index_series is required to filter the index block")
    if not index_fit.converged:
        raise EstimationError("index fit did not converge")
    dxn = np.asarray(asset_series, dtype=float)
    dx1 = np.asarray(index_series, dtype=float)
    if dxn.shape != dx1.shape:
        raise EstimationError("asset and index series must be aligned")
    base = replace(index_fit.params, r=cfg.r)
    shape1 = index_fit.shapes[0]
    h10 = unconditional_variance(base.index)
    h1f, z1, ok = filter_index(dx1, base, h10)
    if not ok:
        raise EstimationError("index block is infeasible on this sample")
    h1 = h1f[:-1]
    index_terms = 0.5 * np.log(h1) - nig.log_pdf(z1, shape1)

    bounds = dict(cfg.bounds)
    corr = float(np.corrcoef(dx1, dxn)[0, 1])
    if corr < cfg.low_corr_threshold:
        lo = max(bounds["lam12"][0], cfg.narrowed_lam12[0])
        hi = min(bounds["lam12"][1], cfg.narrowed_lam12[1])
        bounds["lam12"] = (lo, hi)
    box = _block_box(bounds) + [bounds["a"], bounds["lam12"]]

    var1 = float(np.var(dx1, ddof=1))
    a0 = float(np.cov(dx1, dxn)[0, 1] / var1)
    a0 = min(max(a0, bounds["a"][0]), bounds["a"][1])
    idio = max(float(np.var(dxn, ddof=1)) - a0 * a0 * var1, 0.05 * float(np.var(dxn, ddof=1)))
    start = initial_guess(dxn, bounds, var=idio)
    u = np.array(_block_to_u(start) + [a0, 0.0])

    shape = nig.HEAVY_DEFAULT
    total = 0
    res = None
    for cycle in range(cfg.shape_cycles):
        fun = _pair_objective(dxn, h1, z1, index_terms, base, shape, cfg)
        res, nfev, nm_ok = _multistart(fun, u, box, cfg, cfg.restarts if cycle == 0 else 1)
        total += nfev
        u = res.x
        if cycle < cfg.shape_cycles - 1:
            b = _u_to_block(u[:5])
            p = base.with_asset(b, a=u[5], lam12=u[6])
            _, z, _ = filter_asset(dxn, h1, z1, p, unconditional_variance(b))
            shape = _fit_shape_or_default(z)
    fun = _pair_objective(dxn, h1, z1, index_terms, base, shape, cfg)
    b = _u_to_block(u[:5])
    params = base.with_asset(b, a=float(u[5]), lam12=float(u[6]))
    in_box = all(lo <= v <= hi for v, (lo, hi) in zip(u, box))
    converged = nm_ok and b.is_stationary(STATIONARITY_MARGIN) and in_box
    eig = _hessian_min_eig(fun, u, box)
    return FitReport(
        params=params,
        shapes=(shape1, shape),
        objective=float(res.fun),
        iterations=total,
        converged=converged,
        min_hessian_eig=eig,
        convex=bool(np.isfinite(eig) and eig >= -1e-6),
        h0=(h10, unconditional_variance(b)),
        lam12_bounds=bounds["lam12"],
        message=str(res.message),
    )


def pair_objective_at(index_series, asset_series, params: MhnPairParams, shapes) -> float:
    """Full pair objective at given parameters, variances started at their unconditional levels."""
    dx1 = np.asarray(index_series, dtype=float)
    dxn = np.asarray(asset_series, dtype=float)
    h1f, z1, ok1 = filter_index(dx1, params, unconditional_variance(params.index))
    hnf, zn, okn = filter_asset(dxn, h1f[:-1], z1, params, unconditional_variance(params.asset))
    if not (ok1 and okn):
        return math.inf
    return float(np.sum(pair_nll_terms(h1f[:-1], hnf[:-1], z1, zn, shapes)))
