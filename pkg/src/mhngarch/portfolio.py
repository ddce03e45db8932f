"""Dynamic CRRA allocation under the index/asset affine GARCH market.

Wealth is tracked with the log-linear portfolio return

    log(W'/W) = r + w'y + 0.5 * w'diag(C) - 0.5 * w'C w

where ``y`` are excess log returns and ``C`` their conditional covariance.
Writing the index exposure as ``c = w_index + sum(a_n * w_n)`` splits the
portfolio shock into one term per variance process, so the exponential-affine
value function ``W**(1-g)/(1-g) * exp(D + E'h)`` can be matched coefficient by
coefficient with the Gaussian identity
``E[exp(u z + v z**2)] = (1 - 2v)**-0.5 * exp(u**2 / (2 (1 - 2v)))``.

Row 0 of every coefficient or weight array refers to the index; rows 1..n to
the assets in the order given to :class:`MarketModel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .filtering import Block, MhnPairParams, unconditional_variance
from .nig import sample

__all__ = [
    "MarketModel",
    "PolicyCoefficients",
    "WeightPath",
    "FeasibilityError",
    "optimal_weights",
    "backward_induction",
    "certainty_equivalent",
    "foc_weights_as_written",
    "merton_weights",
    "model_merton_weights",
    "portfolio_log_return",
    "wealth_path",
    "simulate_market",
    "crra_terminal_utility",
]


class FeasibilityError(ArithmeticError):
    def __init__(self, i: int, t: int, detail: str):
        super().__init__(f"coefficient recursion infeasible for variance {i} at date {t}: {detail}")
        self.i = i
        self.t = t


@dataclass(frozen=True)
class MarketModel:
    """Index block plus ``n`` asset blocks sharing that index."""

    index: Block
    assets: tuple[Block, ...]
    a: np.ndarray
    lam12: np.ndarray
    r: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(self.assets))
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(-1))
        object.__setattr__(self, "lam12", np.asarray(self.lam12, dtype=float).reshape(-1))
        if not (len(self.assets) == self.a.size == self.lam12.size):
            raise ValueError("assets, a and lam12 must have the same length")

    @classmethod
    def from_pairs(cls, pairs: list[MhnPairParams]) -> "MarketModel":
        if not pairs:
            raise ValueError("need at least one pair")
        idx = pairs[0].index
        return cls(
            index=idx,
            assets=tuple(p.asset for p in pairs),
            a=np.array([p.a for p in pairs]),
            lam12=np.array([p.lam12 for p in pairs]),
            r=pairs[0].r,
        )

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    @property
    def blocks(self) -> tuple[Block, ...]:
        return (self.index,) + self.assets

    def params_array(self, name: str) -> np.ndarray:
        return np.array([getattr(b, name) for b in self.blocks])

    def unconditional_variances(self) -> np.ndarray:
        return np.array([unconditional_variance(b) for b in self.blocks])

    def premium_terms(self) -> tuple[np.ndarray, np.ndarray]:
        """``m`` (lam + 1/2 per block) and the index cross loading ``k`` per asset."""
        m = self.params_array("lam") + 0.5
        k = self.lam12 - self.a * m[0] + 0.5 * self.a**2
        return m, k

    def covariance(self, h) -> np.ndarray:
        """Conditional covariance of excess log returns at variance state ``h``."""
        h = np.asarray(h, dtype=float)
        load = np.concatenate([[1.0], self.a])
        return h[0] * np.outer(load, load) + np.diag(np.concatenate([[0.0], h[1:]]))

    def log_excess_mean(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        lam = self.params_array("lam")
        return np.concatenate([[lam[0] * h[0]], self.lam12 * h[0] + lam[1:] * h[1:]])

    def arithmetic_excess_mean(self, h) -> np.ndarray:
        return self.log_excess_mean(h) + 0.5 * np.diag(self.covariance(h))


@dataclass
class WeightPath:
    """Risky weights per date (row 0 the index); the cash weight is the residual."""

    risky: np.ndarray

    @property
    def cash(self) -> np.ndarray:
        return 1.0 - self.risky.sum(axis=-1)


@dataclass
class PolicyCoefficients:
    D: np.ndarray
    E: np.ndarray
    T: int
    gamma: float
    h_ref: np.ndarray
    exposures: np.ndarray
    weights: WeightPath
    extra: dict = field(default_factory=dict)


def _exposure_to_weights(exposure: np.ndarray, a: np.ndarray) -> np.ndarray:
    w = exposure.copy()
    w[..., 0] = exposure[..., 0] - exposure[..., 1:] @ a
    return w


def _check(one_minus: np.ndarray, gap: np.ndarray, t: int) -> None:
    for i in range(one_minus.size):
        if not one_minus[i] > 0.0:
            raise FeasibilityError(i, t, f"1 - 2*alpha*E = {one_minus[i]:.6g}")
        if not gap[i] > 0.0:
            raise FeasibilityError(i, t, f"gamma - 2*alpha*E = {gap[i]:.6g}")


def _exposures(h, E_next, model: MarketModel, gamma: float, t: int = -1) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    m, k = model.premium_terms()
    alpha = model.params_array("alpha")
    theta = model.params_array("theta")
    prem = np.broadcast_to(m, h.shape).copy()
    prem[..., 1:] = m[1:] + k * h[..., :1] / h[..., 1:]
    if gamma == 1.0:
        return prem
    s = 2.0 * alpha * np.asarray(E_next, dtype=float)
    _check(1.0 - s, gamma - s, t)
    return (prem * (1.0 - s) - s * theta) / (gamma - s)


def optimal_weights(h, E_next, model: MarketModel, gamma: float, clamp: tuple[float, float] | None = None,
                    t: int = -1) -> np.ndarray:
    """Risky weights at variance state ``h`` given next-date coefficients ``E_next``.

    The asset weights solve their own first-order conditions; the index weight
    is the optimal index exposure less the exposure already carried by the
    assets through their loadings ``a``.
    """
    w = _exposure_to_weights(_exposures(h, E_next, model, gamma, t), model.a)
    if clamp is not None:
        w = np.clip(w, clamp[0], clamp[1])
    return w


def _g_terms(x: np.ndarray, E_next, model: MarketModel, gamma: float) -> np.ndarray:
    """Coefficients of each variance in the one-period log expected utility kernel."""
    m, k = model.premium_terms()
    alpha = model.params_array("alpha")
    theta = model.params_array("theta")
    E_next = np.asarray(E_next, dtype=float)
    drift = x * m - 0.5 * x * x
    drift[0] += float(k @ x[1:])
    if gamma == 1.0:
        return drift
    s = 1.0 - 2.0 * alpha * E_next
    lin = (1.0 - gamma) * x - 2.0 * E_next * alpha * theta
    return (1.0 - gamma) * drift + lin * lin / (2.0 * s)


def backward_induction(model: MarketModel, gamma: float, T: int, h_ref=None,
                       clamp: tuple[float, float] | None = None) -> PolicyCoefficients:
    """Coefficients D_t, E_t and the exposure path for a horizon of ``T`` dates.

    The state-dependent cross-premium term is frozen at ``h_ref`` (default: the
    unconditional variances), which makes the policy a deterministic weight path
    and the affine value function exact for it.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if T < 1:
        raise ValueError("T must be >= 1")
    for i, b in enumerate(model.blocks):
        if not b.is_stationary():
            raise ValueError(f"block {i} is not stationary")
    h_ref = model.unconditional_variances() if h_ref is None else np.asarray(h_ref, dtype=float)
    k = model.n_assets + 1
    omega = model.params_array("omega")
    alpha = model.params_array("alpha")
    persist = np.array([b.persistence for b in model.blocks])
    D = np.zeros(T + 1)
    E = np.zeros((k, T + 1))
    X = np.zeros((T, k))
    W = np.zeros((T, k))
    for t in range(T - 1, -1, -1):
        E_next = E[:, t + 1]
        x = _exposures(h_ref, E_next, model, gamma, t)
        w = _exposure_to_weights(x, model.a)
        if clamp is not None:
            w = np.clip(w, clamp[0], clamp[1])
            x = w.copy()
            x[0] = w[0] + w[1:] @ model.a
        X[t], W[t] = x, w
        E[:, t] = persist * E_next + _g_terms(x, E_next, model, gamma)
        if gamma == 1.0:
            D[t] = D[t + 1] + model.r + float(E_next @ (omega + alpha))
        else:
            s = 1.0 - 2.0 * alpha * E_next
            if np.any(s <= 0):
                i = int(np.argmax(s <= 0))
                raise FeasibilityError(i, t, f"1 - 2*alpha*E = {s[i]:.6g}")
            D[t] = D[t + 1] + (1.0 - gamma) * model.r + float(E_next @ omega) - 0.5 * float(np.log(s).sum())
        if not (np.isfinite(D[t]) and np.all(np.isfinite(E[:, t]))):
            raise FeasibilityError(0, t, "non-finite coefficient")
    return PolicyCoefficients(D=D, E=E, T=T, gamma=gamma, h_ref=h_ref, exposures=X, weights=WeightPath(W))


def certainty_equivalent(policy: PolicyCoefficients, h0, W0: float = 1.0) -> float:
    """Terminal-wealth certainty equivalent implied by the affine value at state ``h0``."""
    val = policy.D[0] + float(policy.E[:, 0] @ np.asarray(h0, dtype=float))
    if policy.gamma == 1.0:
        return W0 * math.exp(val)
    return W0 * math.exp(val / (1.0 - policy.gamma))


def foc_weights_as_written(lam: float, h: float, alpha: float, theta: float, E_next: float,
                           gamma: float) -> float:
    """Single-variance first-order weight in its published typesetting.

    Kept only for comparison: the Monte Carlo policy audit in the test suite
    shows it is dominated by simple constant policies.
    """
    s = 1.0 - 2.0 * alpha * E_next
    return ((0.5 + lam * h) * s - 2.0 * alpha * theta * E_next) / (s - gamma)


def merton_weights(mu, Sigma, gamma: float) -> np.ndarray:
    """Constant-weight optimum ``Sigma^-1 mu / gamma``."""
    mu = np.asarray(mu, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if np.linalg.cond(Sigma) > 1e12:
        raise np.linalg.LinAlgError("covariance matrix is singular")
    return np.linalg.solve(Sigma, mu) / gamma


def model_merton_weights(model: MarketModel, gamma: float) -> np.ndarray:
    """Merton weights from the model's unconditional arithmetic excess means and covariance."""
    hbar = model.unconditional_variances()
    return merton_weights(model.arithmetic_excess_mean(hbar), model.covariance(hbar), gamma)


# ---------------------------------------------------------------- simulation and wealth

def simulate_market(model: MarketModel, T: int, n_paths: int, seed=0, h0=None,
                    shapes: tuple | None = None):
    """Excess log returns and their variances, shape (n_paths, T, 1+n) each.

    ``shapes`` gives one NIG law per variance process (index first); ``None``
    draws Gaussian innovations. Assets share the index shock on every path.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    k = model.n_assets + 1
    omega = model.params_array("omega")
    alpha = model.params_array("alpha")
    beta = model.params_array("beta")
    theta = model.params_array("theta")
    lam = model.params_array("lam")
    h = np.tile(model.unconditional_variances() if h0 is None else np.asarray(h0, dtype=float), (n_paths, 1))
    y = np.empty((n_paths, T, k))
    hv = np.empty((n_paths, T, k))
    for t in range(T):
        if shapes is None:
            z = rng.standard_normal((n_paths, k))
        else:
            z = np.column_stack([sample(s, n_paths, rng) if s is not None else rng.standard_normal(n_paths)
                                 for s in shapes])
        s = np.sqrt(h)
        hv[:, t] = h
        y[:, t, 0] = lam[0] * h[:, 0] + s[:, 0] * z[:, 0]
        y[:, t, 1:] = (model.lam12 * h[:, :1] + lam[1:] * h[:, 1:]
                       + model.a * (s[:, :1] * z[:, :1]) + s[:, 1:] * z[:, 1:])
        h = omega + beta * h + alpha * (z - theta * s) ** 2
    return y, hv


def portfolio_log_return(weights, y, h, a, r: float = 0.0):
    """Log-linear portfolio return for risky ``weights`` against excess returns ``y``.

    ``h`` holds the conditional variances (index first) matching ``y``.
    """
    w = np.asarray(weights, dtype=float)
    a = np.asarray(a, dtype=float)
    c = w[..., 0] + w[..., 1:] @ a
    h1 = h[..., 0]
    hn = h[..., 1:]
    diag = w[..., 0] * h1 + (w[..., 1:] * (a * a * h1[..., None] + hn)).sum(axis=-1)
    quad = c * c * h1 + (w[..., 1:] ** 2 * hn).sum(axis=-1)
    return r + (w * y).sum(axis=-1) + 0.5 * diag - 0.5 * quad


def wealth_path(weights, returns, r: float, W0: float = 1.0, cov=None) -> np.ndarray:
    """Compound ``W_{t+1} = W_t * exp(r + w'y_{t+1})`` over the rows of ``returns``.

    ``weights`` is a constant vector or one row per date. With ``cov`` (one
    matrix, or one per date) the log-linear variance correction is added.
    """
    y = np.atleast_2d(np.asarray(returns, dtype=float))
    w = np.asarray(weights, dtype=float)
    w = np.broadcast_to(w, y.shape)
    step = r + (w * y).sum(axis=-1)
    if cov is not None:
        C = np.asarray(cov, dtype=float)
        C = np.broadcast_to(C, (y.shape[0],) + C.shape[-2:])
        diag = np.einsum("ti,tii->t", w, C)
        quad = np.einsum("ti,tij,tj->t", w, C, w)
        step = step + 0.5 * diag - 0.5 * quad
    out = np.empty(y.shape[0] + 1)
    out[0] = W0
    out[1:] = W0 * np.exp(np.cumsum(step))
    return out


def crra_terminal_utility(W, gamma: float):
    W = np.asarray(W, dtype=float)
    if gamma == 1.0:
        return np.log(W)
    return W ** (1.0 - gamma) / (1.0 - gamma)
