"""Standardized Normal Inverse Gaussian law for GARCH innovations.

The classic (alpha, beta, mu, delta) parameterization is used. Location and
scale are pinned by :func:`standardize` so that the law has mean 0 and
variance 1, leaving only tail-heaviness ``alpha`` and skew ``beta`` free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

__all__ = [
    "NigShape",
    "NigFitError",
    "HEAVY_DEFAULT",
    "standardize",
    "log_pdf",
    "pdf",
    "moments",
    "sample",
    "fit_shape",
]


class NigFitError(RuntimeError):
    """Shape estimation failed; callers fall back to :data:`HEAVY_DEFAULT`."""


@dataclass(frozen=True)
class NigShape:
    alpha: float
    beta: float
    mu: float
    delta: float

    @property
    def gamma(self) -> float:
        return math.sqrt(self.alpha**2 - self.beta**2)


def standardize(alpha: float, beta: float) -> NigShape:
    """Return the zero-mean, unit-variance NIG law with the given shape."""
    alpha = float(alpha)
    beta = float(beta)
    if not (alpha > abs(beta)) or not math.isfinite(alpha):
        raise ValueError(f"NIG shape requires alpha > |beta|, got alpha={alpha}, beta={beta}")
    gamma = math.sqrt(alpha * alpha - beta * beta)
    delta = gamma**3 / alpha**2
    mu = -delta * beta / gamma
    return NigShape(alpha=alpha, beta=beta, mu=mu, delta=delta)


HEAVY_DEFAULT = standardize(3.0, 0.0)


def moments(shape: NigShape) -> tuple[float, float, float]:
    """Analytic (mean, variance, skewness)."""
    g = shape.gamma
    mean = shape.mu + shape.delta * shape.beta / g
    var = shape.delta * shape.alpha**2 / g**3
    skew = 3.0 * shape.beta / (shape.alpha * math.sqrt(shape.delta * g))
    return mean, var, skew


def log_pdf(z, shape: NigShape):
    """Log density; accepts scalars or arrays.

    K1 is evaluated through the exponentially scaled ``k1e`` so that
    ``log K1(x) = log k1e(x) - x`` stays finite for large arguments.
    """
    z = np.asarray(z, dtype=float)
    a, b, mu, d = shape.alpha, shape.beta, shape.mu, shape.delta
    x = z - mu
    q = np.hypot(d, x)
    arg = a * q
    with np.errstate(divide="ignore"):
        log_k1 = np.log(special.k1e(arg)) - arg
    out = math.log(a * d / math.pi) + log_k1 + d * shape.gamma + b * x - np.log(q)
    out = np.where(np.isnan(out), -np.inf, out)
    return out[()] if out.ndim == 0 else out


def pdf(z, shape: NigShape):
    return np.exp(log_pdf(z, shape))


def sample(shape: NigShape, n: int, seed) -> np.ndarray:
    """Draw ``n`` variates as a normal mean-variance mixture over an inverse Gaussian."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    g = shape.gamma
    v = rng.wald(shape.delta / g, shape.delta**2, size=n)
    eps = rng.standard_normal(n)
    return shape.mu + shape.beta * v + np.sqrt(v) * eps


# alpha is searched in log space inside these limits; the upper end stands in
# for the Gaussian limit alpha -> infinity.
_LOG_ALPHA_MIN = math.log(0.05)
_LOG_ALPHA_MAX = math.log(200.0)


def _unpack(u: np.ndarray) -> tuple[float, float]:
    la = min(max(u[0], _LOG_ALPHA_MIN), _LOG_ALPHA_MAX)
    alpha = math.exp(la)
    beta = alpha * math.tanh(u[1])
    return alpha, beta


def fit_shape(residuals, max_iter: int = 2000) -> NigShape:
    """Maximum-likelihood (alpha, beta) for standardized residuals.

    Raises :class:`NigFitError` on degenerate input or non-convergence.
    """
    x = np.asarray(residuals, dtype=float)
    if x.ndim != 1 or x.size < 100:
        raise ValueError("fit_shape needs a 1-d sample of at least 100 residuals")
    if not np.all(np.isfinite(x)):
        raise NigFitError("residuals contain non-finite values")
    if np.ptp(x) == 0.0:
        raise NigFitError("residuals have zero variance")

    def nll(u):
        alpha, beta = _unpack(u)
        if not alpha > abs(beta):
            return 1e300
        val = -np.sum(log_pdf(x, standardize(alpha, beta)))
        return val if np.isfinite(val) else 1e300

    # crude start from sample kurtosis: excess kurtosis of a symmetric standardized NIG is 3/alpha^2
    xs = (x - x.mean()) / x.std()
    excess = float(np.mean(xs**4) - 3.0)
    alpha0 = math.sqrt(3.0 / excess) if excess > 3.0 / 200.0**2 else 50.0
    alpha0 = min(max(alpha0, 0.3), 100.0)
    best = None
    for start in ([math.log(alpha0), 0.0], [math.log(1.5), 0.0], [math.log(alpha0), -0.3]):
        res = optimize.minimize(
            nll,
            np.array(start),
            method="Nelder-Mead",
            options={"maxiter": max_iter, "xatol": 1e-8, "fatol": 1e-10},
        )
        if best is None or res.fun < best.fun:
            best = res
    if not best.success or best.fun >= 1e300:
        raise NigFitError(f"NIG shape fit did not converge: {best.message}")
    alpha, beta = _unpack(best.x)
    return standardize(alpha, beta)
