"""Closed-form European option prices under the Gaussian Heston-Nandi GARCH model.

The generating function ``E*[S_T**phi]`` is exponential-affine in the
next-period variance, with coefficients from a backward recursion over the
remaining periods. Calls come from two Fourier integrals; puts follow by
parity. Maturities are counted in periods; 252 periods make one year.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numba
import numpy as np
from scipy import integrate, special

from .filtering import Block

__all__ = [
    "PricingInputs",
    "VolSurface",
    "PricingError",
    "risk_neutralize",
    "char_fn",
    "call_price",
    "call_prices",
    "put_price",
    "bs_price",
    "implied_vol",
    "build_surface",
    "mc_call_price",
    "PERIODS_PER_YEAR",
]

PERIODS_PER_YEAR = 252
PHI_MAX_START = 200.0
PHI_MAX_CAP = 200.0 * 2**10
TAIL_TOL = 1e-12
MONEYNESS = np.linspace(0.7, 1.3, 13)
MATURITIES = (21, 63, 126, 252)


class PricingError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PricingInputs:
    S: float
    K: float
    tau: int
    r: float
    h_next: float
    block: Block

    def __post_init__(self):
        if not self.S > 0:
            raise ValueError("spot must be positive")
        if self.K < 0:
            raise ValueError("strike must be non-negative")
        if int(self.tau) != self.tau or self.tau < 1:
            raise ValueError("tau must be a positive integer number of periods")
        if not self.h_next > 0:
            raise ValueError("h_next must be positive")


def risk_neutralize(block: Block) -> Block:
    """Measure change: premium set to -1/2, asymmetry shifted by lam + 1/2."""
    return replace(block, theta=block.theta + (block.lam + 0.5), lam=-0.5)


@numba.njit(cache=True)
def _recursion(phi, tau, r, lam, th, om, al, be):
    n = phi.shape[0]
    A = np.zeros(n, dtype=np.complex128)
    B = np.zeros(n, dtype=np.complex128)
    for step in range(tau):
        for j in range(n):
            d = 1.0 - 2.0 * al * B[j]
            A[j] = A[j] + phi[j] * r + B[j] * om - 0.5 * np.log(d)
            B[j] = phi[j] * (lam + th) - 0.5 * th * th + be * B[j] + 0.5 * (phi[j] - th) ** 2 / d
            if not (np.isfinite(A[j].real) and np.isfinite(A[j].imag)
                    and np.isfinite(B[j].real) and np.isfinite(B[j].imag)):
                return A, B, tau - step
    return A, B, 0


def _coefficients(phi, tau: int, r: float, block: Block):
    """A and B after ``tau`` backward steps from zero; ``phi`` may be an array."""
    phi = np.asarray(phi, dtype=complex)
    flat = np.ascontiguousarray(phi.reshape(-1))
    A, B, bad = _recursion(flat, int(tau), float(r), block.lam, block.theta, block.omega, block.alpha, block.beta)
    if bad:
        raise PricingError(f"coefficient recursion diverged at period {bad}")
    return A.reshape(phi.shape), B.reshape(phi.shape)


def char_fn(phi, inputs: PricingInputs):
    """``S**phi * exp(A + B*h_next)`` with the block taken as already risk neutral."""
    A, B = _coefficients(phi, inputs.tau, inputs.r, inputs.block)
    with np.errstate(over="raise", invalid="raise"):
        try:
            out = np.exp(np.asarray(phi, dtype=complex) * math.log(inputs.S) + A + B * inputs.h_next)
        except FloatingPointError as exc:
            raise PricingError("characteristic function overflow") from exc
    return out[()] if out.ndim == 0 else out


def call_prices(S: float, strikes, tau: int, r: float, h_next: float, block: Block,
                phi_max: float | None = None) -> np.ndarray:
    """Call prices for several strikes sharing one maturity; ``block`` is risk neutral."""
    PricingInputs(S, 0.0, tau, r, h_next, block)  # validation only
    K = np.atleast_1d(np.asarray(strikes, dtype=float))
    if np.any(K < 0):
        raise ValueError("strikes must be non-negative")
    out = np.full(K.shape, float(S))
    pos = K > 0
    if not np.any(pos):
        return out
    Kp = K[pos]
    log_m = math.log(S) - np.log(Kp)
    disc = math.exp(-r * tau)
    m = Kp.size

    def integrand(phi):
        A, B = _coefficients(np.array([1j * phi + 1.0, 1j * phi]), tau, r, block)
        g = np.exp(A + B * h_next)
        rot = np.exp(1j * phi * log_m)
        first = S * (rot * g[0] / (1j * phi)).real
        second = (rot * g[1] / (1j * phi)).real
        return np.concatenate([first, second])

    def tail(phi):
        return float(np.max(np.abs(integrand(phi))))

    if phi_max is None:
        phi_max = PHI_MAX_START
        while tail(phi_max) > TAIL_TOL and phi_max < PHI_MAX_CAP:
            phi_max *= 2.0
        if tail(phi_max) > TAIL_TOL:
            warnings.warn(f"integrand tail {tail(phi_max):.3e} above cutoff at phi={phi_max:g}", RuntimeWarning)

    val, err = integrate.quad_vec(integrand, 0.0, phi_max, epsabs=1e-13, epsrel=1e-12, norm="max", limit=4000)
    if err > 1e-9:
        raise PricingError(f"quadrature did not converge: estimated error {err:.3e}")
    I1, I2 = val[:m], val[m:]
    raw = 0.5 * S + disc / math.pi * I1 - Kp * disc * (0.5 + I2 / math.pi)
    lo = np.maximum(S - Kp * disc, 0.0)
    hi = S
    excess = np.maximum(lo - raw, raw - hi)
    if np.any(excess > 1e-8 * S):
        warnings.warn(f"raw call outside no-arbitrage band by up to {excess.max():.3e}; clamped", RuntimeWarning)
    out[pos] = np.clip(raw, lo, hi)
    return out


def call_price(inputs: PricingInputs, phi_max: float | None = None) -> float:
    return float(call_prices(inputs.S, [inputs.K], inputs.tau, inputs.r, inputs.h_next, inputs.block, phi_max)[0])


def put_price(inputs: PricingInputs, phi_max: float | None = None) -> float:
    c = call_price(inputs, phi_max)
    return c - inputs.S + inputs.K * math.exp(-inputs.r * inputs.tau)


# ---------------------------------------------------------------- Black-Scholes inversion

def bs_price(S, K, r_annual, t_years, sigma, kind: str = "call"):
    sq = sigma * math.sqrt(t_years)
    disc = math.exp(-r_annual * t_years)
    if K <= 0:
        return S if kind == "call" else 0.0
    d1 = (math.log(S / K) + (r_annual + 0.5 * sigma * sigma) * t_years) / sq
    d2 = d1 - sq
    if kind == "call":
        return S * special.ndtr(d1) - K * disc * special.ndtr(d2)
    return K * disc * special.ndtr(-d2) - S * special.ndtr(-d1)


def implied_vol(price: float, S: float, K: float, r: float, tau_years: float, kind: str = "call",
                lo: float = 1e-4, hi: float = 5.0, max_iter: int = 200) -> float:
    """Bisection on the Black-Scholes price; ``r`` is the annualized rate."""
    disc = math.exp(-r * tau_years)
    if kind == "call":
        floor, cap = max(S - K * disc, 0.0), S
    else:
        floor, cap = max(K * disc - S, 0.0), K * disc
    if price < floor:
        raise ValueError(f"price {price:.12g} below the lower no-arbitrage bound {floor:.12g}")
    if price > cap:
        raise ValueError(f"price {price:.12g} above the upper no-arbitrage bound {cap:.12g}")
    tol = 1e-10 * S
    f_lo = bs_price(S, K, r, tau_years, lo, kind) - price
    f_hi = bs_price(S, K, r, tau_years, hi, kind) - price
    if f_lo > tol or f_hi < -tol:
        raise ValueError("price not attainable for volatilities in the search interval")
    if abs(f_lo) <= tol:
        # any volatility below the bracket reprices within tolerance
        raise ValueError("price indistinguishable from the lower no-arbitrage bound")
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        err = bs_price(S, K, r, tau_years, mid, kind) - price
        if err == 0.0 or hi - lo < 1e-13:
            break
        if err > 0:
            hi = mid
        else:
            lo = mid
    return mid


# ---------------------------------------------------------------- surfaces

@dataclass
class VolSurface:
    strikes: np.ndarray
    maturities: np.ndarray
    call: np.ndarray
    put: np.ndarray
    call_iv: np.ndarray
    put_iv: np.ndarray

    def rows(self):
        """Long-format rows ``(strike, maturity_periods, call, put, call_iv, put_iv)``."""
        for i, tau in enumerate(self.maturities):
            for j, k in enumerate(self.strikes):
                yield (float(k), int(tau), float(self.call[i, j]), float(self.put[i, j]),
                       float(self.call_iv[i, j]), float(self.put_iv[i, j]))


def build_surface(S: float, r: float, h_next: float, block: Block, moneyness=MONEYNESS,
                  maturities=MATURITIES, risk_neutral: bool = False) -> VolSurface:
    """Price the strike by maturity grid; ``block`` is physical unless ``risk_neutral``."""
    rn = block if risk_neutral else risk_neutralize(block)
    strikes = S * np.asarray(moneyness, dtype=float)
    mats = np.asarray(maturities, dtype=int)
    shape = (mats.size, strikes.size)
    call = np.empty(shape)
    put = np.empty(shape)
    civ = np.full(shape, np.nan)
    piv = np.full(shape, np.nan)
    r_ann = r * PERIODS_PER_YEAR
    for i, tau in enumerate(mats):
        c = call_prices(S, strikes, int(tau), r, h_next, rn)
        p = c - S + strikes * math.exp(-r * tau)
        call[i], put[i] = c, p
        t_years = tau / PERIODS_PER_YEAR
        for j, k in enumerate(strikes):
            for kind, price, dest in (("call", c[j], civ), ("put", p[j], piv)):
                try:
                    dest[i, j] = implied_vol(price, S, k, r_ann, t_years, kind)
                except ValueError:
                    pass
    return VolSurface(strikes, mats, call, put, civ, piv)


def mc_call_price(S: float, K: float, tau: int, r: float, h_next: float, block: Block,
                  n_paths: int = 500_000, seed: int = 0) -> tuple[float, float]:
    """Antithetic Monte Carlo under Gaussian risk-neutral dynamics; returns (price, std error)."""
    rng = np.random.default_rng(seed)
    half = n_paths // 2
    lam, th, om, al, be = block.lam, block.theta, block.omega, block.alpha, block.beta
    logs = np.full(2 * half, math.log(S))
    h = np.full(2 * half, float(h_next))
    for _ in range(tau):
        z = rng.standard_normal(half)
        z = np.concatenate([z, -z])
        s = np.sqrt(h)
        logs += r + lam * h + s * z
        h = om + be * h + al * (z - th * s) ** 2
    pay = np.maximum(np.exp(logs) - K, 0.0) * math.exp(-r * tau)
    pair_mean = 0.5 * (pay[:half] + pay[half:])
    return float(pair_mean.mean()), float(pair_mean.std(ddof=1) / math.sqrt(half))
