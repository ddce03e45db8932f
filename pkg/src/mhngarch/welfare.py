"""CRRA utility, wealth-equivalent loss and central-difference weight sensitivities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .filtering import MhnPairParams, unconditional_variance
from .portfolio import MarketModel, backward_induction

__all__ = [
    "UtilitySpec",
    "SensitivityReport",
    "SensitivityError",
    "DEFAULT_STEPS",
    "crra_utility",
    "inverse_utility",
    "certainty_equivalent_wealth",
    "wel",
    "wel_report",
    "sensitivity",
    "rmss",
    "implied_correlation",
    "loading_for_correlation",
    "pair_weight_map",
]

DEFAULT_STEPS = {"gamma": 1.0, "rho": 0.1, "a": 0.5}


class SensitivityError(ValueError):
    pass


@dataclass(frozen=True)
class UtilitySpec:
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @property
    def is_log(self) -> bool:
        return self.gamma == 1.0


def crra_utility(W, spec: UtilitySpec):
    W = np.asarray(W, dtype=float)
    if np.any(W <= 0):
        raise ValueError("wealth must be positive")
    if spec.is_log:
        out = np.log(W)
    else:
        out = W ** (1.0 - spec.gamma) / (1.0 - spec.gamma)
    return out[()] if out.ndim == 0 else out


def inverse_utility(u, spec: UtilitySpec):
    u = np.asarray(u, dtype=float)
    if spec.is_log:
        out = np.exp(u)
    else:
        base = (1.0 - spec.gamma) * u
        if np.any(base <= 0):
            side = "negative" if spec.gamma > 1 else "positive"
            raise ValueError(f"utility must be {side} for gamma={spec.gamma}")
        out = base ** (1.0 / (1.0 - spec.gamma))
    return out[()] if out.ndim == 0 else out


def certainty_equivalent_wealth(terminal_wealth, spec: UtilitySpec) -> float:
    return float(inverse_utility(np.mean(crra_utility(terminal_wealth, spec)), spec))


def wel(benchmark_terminal, optimal_terminal, spec: UtilitySpec, W0: float = 1.0) -> float:
    """Fraction of initial wealth the optimal strategy could give up and still match the benchmark.

    With CRRA homotheticity, starting the optimal strategy from ``(1 - x) W0``
    scales its certainty equivalent by ``1 - x``; solving for indifference gives
    ``x = 1 - CE_benchmark / CE_optimal``. When the optimal strategy is riskless
    at ``W0`` this is ``1 - U^-1(mean U_benchmark) / W0``. Positive values favour
    the optimal strategy. Both sets are taken to start from ``W0``, so it cancels.
    """
    bench = np.asarray(benchmark_terminal, dtype=float)
    opt = np.asarray(optimal_terminal, dtype=float)
    if bench.size == 0 or opt.size == 0:
        raise ValueError("wealth sets must be nonempty")
    ce_b = certainty_equivalent_wealth(bench, spec)
    ce_o = certainty_equivalent_wealth(opt, spec)
    return 1.0 - ce_b / ce_o


def wel_report(benchmark_terminal, optimal_terminal, spec: UtilitySpec, W0: float = 1.0) -> dict:
    raw = wel(benchmark_terminal, optimal_terminal, spec, W0)
    return {"gamma": spec.gamma, "wel_raw": raw, "wel_negated": -raw}


# ---------------------------------------------------------------- sensitivities

@dataclass
class SensitivityReport:
    parameter: str
    S: np.ndarray
    step: float
    rmss: float
    ids: list | None = None

    def rows(self):
        ids = self.ids or [str(i) for i in range(self.S.size)]
        for aid, s in zip(ids, self.S):
            yield (self.parameter, aid, float(s), self.rmss, self.step)


def rmss(S) -> float:
    S = np.asarray(S, dtype=float)
    if S.size == 0:
        raise ValueError("need at least one sensitivity")
    scale = float(np.max(np.abs(S)))
    if scale == 0.0 or not math.isfinite(scale):
        return scale
    # scaled to avoid under/overflow in the squares
    return scale * float(math.sqrt(np.mean((S / scale) ** 2)))


def sensitivity(weight_map: Callable[[float], np.ndarray], theta0: float, delta: float | None = None,
                parameter: str = "gamma", ids: list | None = None) -> SensitivityReport:
    """Central differences ``(w(theta0 + d) - w(theta0 - d)) / (2 d)`` per asset."""
    if delta is None:
        if parameter not in DEFAULT_STEPS:
            raise ValueError(f"no default step for parameter {parameter!r}")
        delta = DEFAULT_STEPS[parameter]
    if not delta > 0:
        raise ValueError("step must be positive")
    try:
        up = np.atleast_1d(np.asarray(weight_map(theta0 + delta), dtype=float))
        dn = np.atleast_1d(np.asarray(weight_map(theta0 - delta), dtype=float))
    except (ArithmeticError, ValueError) as exc:
        raise SensitivityError(f"perturbed evaluation of {parameter} at {theta0}±{delta} failed: {exc}") from exc
    if not (np.all(np.isfinite(up)) and np.all(np.isfinite(dn))):
        raise SensitivityError(f"perturbed evaluation of {parameter} returned non-finite weights")
    S = (up - dn) / (2.0 * delta)
    return SensitivityReport(parameter=parameter, S=S, step=float(delta), rmss=rmss(S), ids=ids)


def implied_correlation(params: MhnPairParams, a: float | None = None) -> float:
    """Unconditional index/asset log-return correlation implied by the loading ``a``."""
    a = params.a if a is None else a
    h1 = unconditional_variance(params.index)
    hn = unconditional_variance(params.asset)
    return a * math.sqrt(h1) / math.sqrt(a * a * h1 + hn)


def loading_for_correlation(params: MhnPairParams, rho: float) -> float:
    """Loading ``a`` whose implied correlation equals ``rho``."""
    if not -1.0 < rho < 1.0:
        raise ValueError("correlation must lie strictly inside (-1, 1)")
    h1 = unconditional_variance(params.index)
    hn = unconditional_variance(params.asset)
    return rho * math.sqrt(hn) / (math.sqrt(h1) * math.sqrt(1.0 - rho * rho))


def pair_weight_map(params: MhnPairParams, parameter: str, gamma: float = 3.0, T: int = 252):
    """Map from a scalar parameter to the asset's date-0 optimal weight in its index pair.

    ``parameter`` is ``gamma``, ``a`` or ``rho`` (the correlation, entered via
    :func:`loading_for_correlation`). Returns ``(map, theta0)``.
    """

    def weight(model_params: MhnPairParams, g: float) -> float:
        pol = backward_induction(MarketModel.from_pairs([model_params]), g, T)
        return float(pol.weights.risky[0, 1])

    if parameter == "gamma":
        return (lambda g: weight(params, g)), gamma
    if parameter == "a":
        return (lambda a: weight(params.with_asset(params.asset, a=a, lam12=params.lam12), gamma)), params.a
    if parameter == "rho":
        def by_rho(rho):
            a = loading_for_correlation(params, rho)
            return weight(params.with_asset(params.asset, a=a, lam12=params.lam12), gamma)
        return by_rho, implied_correlation(params)
    raise ValueError(f"unknown sensitivity parameter {parameter!r}")
