"""Long-only mean-variance and CVaR frontiers.

Mean-variance problems are solved with a small primal active-set method for
``min 0.5 x'Qx + c'x  s.t.  a'x = b, x >= 0``; CVaR problems use the
Rockafellar-Uryasev linear program solved by HiGHS dual simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, sparse

from .nig import sample
from .portfolio import MarketModel

__all__ = [
    "FrontierPoint",
    "ScenarioPanel",
    "FrontierError",
    "simplex_qp",
    "markowitz_frontier",
    "min_variance",
    "tangency",
    "min_cvar",
    "cvar_frontier",
    "empirical_cvar",
    "scenario_panel",
]

_TOL = 1e-12


class FrontierError(ValueError):
    pass


@dataclass
class FrontierPoint:
    target: float
    mean: float
    risk: float
    weights: np.ndarray
    feasible: bool


@dataclass
class ScenarioPanel:
    returns: np.ndarray
    ids: list

    def __post_init__(self):
        self.returns = np.asarray(self.returns, dtype=float)
        if self.returns.ndim != 2 or not np.all(np.isfinite(self.returns)):
            raise ValueError("scenario returns must be a finite S x N matrix")

    @property
    def S(self) -> int:
        return self.returns.shape[0]

    def mean(self) -> np.ndarray:
        return self.returns.mean(axis=0)

    def cov(self) -> np.ndarray:
        return np.atleast_2d(np.cov(self.returns, rowvar=False))


# ---------------------------------------------------------------- quadratic program

def _eq_qp(Q, c, a, b, free):
    """Minimizer on the free coordinates with the rest pinned at zero (least-norm if singular)."""
    f = np.flatnonzero(free)
    n = f.size
    K = np.zeros((n + 1, n + 1))
    K[:n, :n] = Q[np.ix_(f, f)]
    K[:n, n] = a[f]
    K[n, :n] = a[f]
    rhs = np.concatenate([-c[f], [b]])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    x = np.zeros_like(c)
    x[f] = sol[:n]
    return x, sol[n]


def simplex_qp(Q, c, a, b, x0=None, max_iter: int = 500) -> np.ndarray:
    """Primal active-set solve of ``min 0.5 x'Qx + c'x`` subject to ``a'x = b, x >= 0``.

    ``Q`` must be positive semidefinite. ``x0`` must be feasible; by default a
    vertex ``b / a_j * e_j`` is used.
    """
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    n = c.size
    if x0 is None:
        ok = np.flatnonzero(np.abs(a) > _TOL)
        ok = ok[(b / a[ok]) >= 0] if ok.size else ok
        if ok.size == 0:
            raise FrontierError("equality constraint has no non-negative solution")
        # start at the vertex with the smallest objective
        vals = [0.5 * (b / a[j]) ** 2 * Q[j, j] + c[j] * b / a[j] for j in ok]
        j = ok[int(np.argmin(vals))]
        x = np.zeros(n)
        x[j] = b / a[j]
    else:
        x = np.asarray(x0, dtype=float).copy()
    free = x > 0
    ties_released = False
    for _ in range(max_iter):
        cand, nu = _eq_qp(Q, c, a, b, free)
        if np.all(cand[free] >= -1e-14):
            x = np.where(free, np.maximum(cand, 0.0), 0.0)
            grad = Q @ x + c + nu * a
            bound = ~free
            if not np.any(bound) or grad[bound].min() >= -1e-12:
                # degenerate optimum: let zero reduced-cost coordinates in once,
                # so the least-norm solve splits weight evenly across ties
                tied = bound & (np.abs(grad) <= 1e-12 * max(1.0, np.abs(Q).max()))
                if ties_released or not np.any(tied):
                    return x
                ties_released = True
                free |= tied
                continue
            j = np.flatnonzero(bound)[int(np.argmin(grad[bound]))]
            free[j] = True
            continue
        d = cand - x
        neg = free & (d < 0)
        steps = -x[neg] / d[neg]
        k = int(np.argmin(steps))
        step = min(1.0, steps[k])
        x = x + step * d
        hit = np.flatnonzero(neg)[k]
        x[hit] = 0.0
        free[hit] = False
        x[~free] = 0.0
    raise FrontierError("active-set iteration cap reached")


def min_variance(Sigma) -> np.ndarray:
    Sigma = np.asarray(Sigma, dtype=float)
    n = Sigma.shape[0]
    return simplex_qp(Sigma, np.zeros(n), np.ones(n), 1.0)


def _mv_point(mu, Sigma, tau):
    n = mu.size
    return simplex_qp(Sigma, -tau * mu, np.ones(n), 1.0)


def markowitz_frontier(mu, Sigma, risk_grid, bisect_iter: int = 200) -> list[FrontierPoint]:
    """Maximum mean for each target standard deviation on the long-only simplex.

    Each point solves ``min w'Sw - tau*mu'w`` with ``tau`` bisected until the
    risk budget binds. Targets below the minimum-variance risk are infeasible.
    """
    mu = np.asarray(mu, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    grid = np.asarray(risk_grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("risk grid must be increasing")
    w_min = min_variance(Sigma)
    sd = lambda w: math.sqrt(max(float(w @ Sigma @ w), 0.0))
    sd_min = sd(w_min)
    tau_hi = 1.0
    w_hi = _mv_point(mu, Sigma, tau_hi)
    for _ in range(200):
        w_next = _mv_point(mu, Sigma, 2.0 * tau_hi)
        if np.allclose(w_next, w_hi, atol=1e-13):
            break
        tau_hi *= 2.0
        w_hi = w_next
    sd_max = sd(w_hi)
    out = []
    for target in grid:
        if target < sd_min * (1.0 - 1e-12):
            out.append(FrontierPoint(target, math.nan, math.nan, np.full(mu.size, np.nan), False))
            continue
        if target >= sd_max:
            w = w_hi
        elif target <= sd_min:
            w = w_min
        else:
            lo, hi = 0.0, tau_hi
            w = w_min
            for _ in range(bisect_iter):
                mid = 0.5 * (lo + hi)
                cand = _mv_point(mu, Sigma, mid)
                if sd(cand) <= target:
                    lo, w = mid, cand
                else:
                    hi = mid
                if hi - lo <= 1e-15 * max(1.0, hi):
                    break
        out.append(FrontierPoint(float(target), float(mu @ w), sd(w), w, True))
    return out


def tangency(mu, Sigma, r: float) -> tuple[np.ndarray, float]:
    """Long-only maximum-Sharpe portfolio and its Sharpe ratio (the capital market line slope).

    Solves ``min x'Sx`` with ``(mu - r)'x = 1, x >= 0`` and rescales to full investment.
    """
    mu = np.asarray(mu, dtype=float)
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    ex = mu - r
    if not np.any(ex > 0):
        raise FrontierError("no asset has a mean above the risk-free rate")
    x = simplex_qp(Sigma, np.zeros(mu.size), ex, 1.0)
    w = x / x.sum()
    sharpe = float(ex @ w / math.sqrt(float(w @ Sigma @ w)))
    return w, sharpe


# ---------------------------------------------------------------- CVaR

def empirical_cvar(losses, alpha: float) -> float:
    """Minimum over ``t`` of ``t + mean((L - t)+) / (1 - alpha)`` evaluated exactly at its kinks."""
    L = np.sort(np.asarray(losses, dtype=float))
    S = L.size
    k = int(math.ceil(alpha * S)) - 1
    best = math.inf
    for j in range(max(k - 1, 0), min(k + 2, S)):
        t = L[j]
        best = min(best, t + np.maximum(L - t, 0.0).sum() / ((1.0 - alpha) * S))
    return float(best)


def _cvar_lp(R, alpha, target=None, max_iter=100_000):
    S, N = R.shape
    nv = N + 1 + S
    cost = np.zeros(nv)
    cost[N] = 1.0
    cost[N + 1:] = 1.0 / ((1.0 - alpha) * S)
    # -R w - t - z <= 0
    A = sparse.hstack([sparse.csr_matrix(-R), sparse.csr_matrix(-np.ones((S, 1))), -sparse.identity(S)])
    b = np.zeros(S)
    if target is not None:
        row = sparse.csr_matrix(np.concatenate([-R.mean(axis=0), np.zeros(1 + S)])[None, :])
        A = sparse.vstack([A, row])
        b = np.append(b, -target)
    A = sparse.csr_matrix(A)
    A_eq = np.concatenate([np.ones(N), np.zeros(1 + S)])[None, :]
    bounds = [(0, None)] * N + [(None, None)] + [(0, None)] * S
    res = optimize.linprog(cost, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=[1.0], bounds=bounds,
                           method="highs-ds", options={"maxiter": max_iter, "primal_feasibility_tolerance": 1e-10,
                                                        "dual_feasibility_tolerance": 1e-10})
    return res, A, b


def _slackness_residual(res, A, b, n_w: int) -> float:
    slack = b - A @ res.x
    r1 = np.abs(res.ineqlin.marginals * slack).max()
    lower = np.concatenate([res.x[:n_w], res.x[n_w + 1:]])
    lm = np.concatenate([res.lower.marginals[:n_w], res.lower.marginals[n_w + 1:]])
    r2 = np.abs(lm * lower).max()
    return float(max(r1, r2))


def min_cvar(panel: ScenarioPanel | np.ndarray, alpha: float = 0.95, target: float | None = None) -> dict:
    """Minimum-CVaR long-only weights.

    Returns a dict with ``weights``, ``cvar`` (LP objective), ``var`` (the
    auxiliary threshold), ``mean`` and ``slackness`` (complementary-slackness
    residual).
    """
    R = panel.returns if isinstance(panel, ScenarioPanel) else np.asarray(panel, dtype=float)
    if R.ndim != 2 or R.shape[0] == 0 or not np.all(np.isfinite(R)):
        raise ValueError("scenario returns must be a finite, nonempty S x N matrix")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    S, N = R.shape
    res, A, b = _cvar_lp(R, alpha, target)
    if res.status == 2:
        return {"weights": np.full(N, np.nan), "cvar": math.nan, "var": math.nan,
                "mean": math.nan, "slackness": math.nan, "feasible": False}
    if res.status != 0:
        raise FrontierError(f"CVaR LP failed: {res.message}")
    w = np.clip(res.x[:N], 0.0, None)
    w = w / w.sum()
    return {"weights": w, "cvar": float(res.fun), "var": float(res.x[N]), "mean": float(R.mean(axis=0) @ w),
            "slackness": _slackness_residual(res, A, b, N), "feasible": True}


def cvar_frontier(panel: ScenarioPanel | np.ndarray, alpha: float, return_grid) -> list[FrontierPoint]:
    out = []
    for target in np.asarray(return_grid, dtype=float):
        sol = min_cvar(panel, alpha, target=float(target))
        out.append(FrontierPoint(float(target), sol["mean"], sol["cvar"], sol["weights"], sol["feasible"]))
    return out


# ---------------------------------------------------------------- scenarios

def scenario_panel(model: MarketModel, S: int = 10_000, seed=0, h=None, shapes=None,
                   ids: list | None = None) -> ScenarioPanel:
    """One-period simple returns of the model's assets, sharing one index shock per scenario.

    ``h`` is the conditional variance state (index first; default unconditional);
    ``shapes`` one NIG law per process, ``None`` entries meaning Gaussian.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    h = model.unconditional_variances() if h is None else np.asarray(h, dtype=float)
    k = model.n_assets + 1
    shapes = shapes if shapes is not None else (None,) * k
    z = np.column_stack([sample(s, S, rng) if s is not None else rng.standard_normal(S) for s in shapes])
    lam = model.params_array("lam")
    s1 = math.sqrt(h[0])
    sn = np.sqrt(h[1:])
    log_ret = model.r + model.lam12 * h[0] + lam[1:] * h[1:] + model.a * s1 * z[:, :1] + sn * z[:, 1:]
    ids = ids if ids is not None else [f"asset{i}" for i in range(1, k)]
    return ScenarioPanel(np.expm1(log_ret), list(ids))
