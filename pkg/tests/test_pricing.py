import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from mhngarch import fixtures, pricing
from mhngarch.filtering import Block, unconditional_variance

# Black-Scholes call S=100, K=95, r=5%, t=0.5y, sigma=0.2, evaluated with mpmath at 40 digits
BS_ORACLE = 9.8727424004089646

# a strongly asymmetric block in the range of classic S&P 500 fits
LEVERED = Block(omega=5.02e-6, alpha=1.32e-6, beta=0.589, theta=421.39, lam=0.205)


@pytest.fixture(scope="module")
def dji_rn():
    return pricing.risk_neutralize(fixtures.block("DJI"))


@pytest.fixture(scope="module")
def dji_surface():
    b = fixtures.block("DJI")
    return pricing.build_surface(100.0, 0.0002, unconditional_variance(b), b)


class TestRiskNeutralize:
    def test_dji(self):
        rn = pricing.risk_neutralize(fixtures.block("DJI"))
        assert rn.theta == pytest.approx(1.651432, abs=1e-15)
        assert rn.lam == -0.5

    @given(st.floats(-5, 5))
    def test_fixed_point(self, theta):
        b = Block(1e-6, 2e-6, 0.8, theta, -0.5)
        assert pricing.risk_neutralize(b) == b


class TestCharFn:
    @pytest.mark.parametrize("asset", fixtures.ASSET_IDS[:6] + ["DJI"])
    @pytest.mark.parametrize("tau", [1, 21, 252])
    def test_normalization_and_forward(self, asset, tau):
        rn = pricing.risk_neutralize(fixtures.block(asset))
        inp = pricing.PricingInputs(S=100.0, K=100.0, tau=tau, r=0.0002, h_next=2.5e-4, block=rn)
        assert abs(pricing.char_fn(0.0, inp) - 1.0) <= 1e-10
        assert abs(pricing.char_fn(1.0, inp) - 100.0 * math.exp(0.0002 * tau)) <= 1e-10 * 100.0

    @pytest.mark.parametrize("phi", [0.5, 2.0, 1j * 3.0, 1.0 + 2.5j])
    def test_one_period_quadrature(self, dji_rn, phi):
        S, r, h = 95.0, 0.0003, 3e-5
        inp = pricing.PricingInputs(S=S, K=S, tau=1, r=r, h_next=h, block=dji_rn)

        def integrand(z, part):
            v = np.exp(phi * (math.log(S) + r + dji_rn.lam * h + math.sqrt(h) * z)) * np.exp(-0.5 * z * z)
            return (v.real if part == 0 else v.imag) / math.sqrt(2 * math.pi)

        re = integrate.quad(integrand, -40, 40, args=(0,), epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        im = integrate.quad(integrand, -40, 40, args=(1,), epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        got = pricing.char_fn(phi, inp)
        assert abs(got - complex(re, im)) <= 1e-10 * max(1.0, abs(got))

    @pytest.mark.parametrize("asset", ["MMM", "NVDA", "WBA"])
    def test_measure_change_restores_martingale(self, asset):
        inp = pricing.PricingInputs(50.0, 50.0, 63, 0.0001, 4e-4, pricing.risk_neutralize(fixtures.block(asset)))
        assert pricing.char_fn(1.0, inp) == pytest.approx(50.0 * math.exp(0.0063), rel=1e-12)


class TestCallPrice:
    def test_zero_strike(self, dji_rn):
        assert pricing.call_price(pricing.PricingInputs(100.0, 0.0, 21, 0.0002, 2.5e-5, dji_rn)) == 100.0

    def test_degenerate_variance(self, dji_rn):
        inp = pricing.PricingInputs(100.0, 90.0, 21, 0.0, 1e-12, dji_rn)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert pricing.call_price(inp) == pytest.approx(10.0, abs=1e-4)

    def test_cutoff_invariance(self, dji_rn):
        inp = pricing.PricingInputs(100.0, 104.0, 63, 0.0002, 2.5e-5, dji_rn)
        auto = pricing.call_price(inp)
        assert pricing.call_price(inp, phi_max=3200.0) == pytest.approx(auto, abs=1e-9)

    def test_gaussian_limit_is_black_scholes(self):
        # alpha = beta = 0 freezes the variance, so the law is lognormal
        h = 1e-4
        flat = Block(omega=h, alpha=0.0, beta=0.0, theta=0.0, lam=-0.5)
        inp = pricing.PricingInputs(100.0, 95.0, 126, 0.05 / 252, h, flat)
        bs = pricing.bs_price(100.0, 95.0, 0.05, 0.5, math.sqrt(h * 252))
        assert pricing.call_price(inp) == pytest.approx(bs, abs=1e-9)

    def test_against_monte_carlo(self, dji_rn):
        mc, se = pricing.mc_call_price(100.0, 100.0, 63, 0.0002, 2.5e-5, dji_rn, n_paths=200_000, seed=2)
        cf = pricing.call_price(pricing.PricingInputs(100.0, 100.0, 63, 0.0002, 2.5e-5, dji_rn))
        assert abs(cf - mc) <= 3 * se

    def test_invalid_inputs(self, dji_rn):
        with pytest.raises(ValueError):
            pricing.PricingInputs(-1.0, 100.0, 21, 0.0, 1e-4, dji_rn)
        with pytest.raises(ValueError):
            pricing.PricingInputs(100.0, 100.0, 0, 0.0, 1e-4, dji_rn)
        with pytest.raises(ValueError):
            pricing.PricingInputs(100.0, 100.0, 21, 0.0, 0.0, dji_rn)


class TestPutPrice:
    def test_zero_strike(self, dji_rn):
        assert pricing.put_price(pricing.PricingInputs(100.0, 0.0, 21, 0.0002, 2.5e-5, dji_rn)) == 0.0

    def test_atm_forward(self, dji_rn):
        K = 100.0 * math.exp(0.0002 * 63)
        inp = pricing.PricingInputs(100.0, K, 63, 0.0002, 2.5e-5, dji_rn)
        assert pricing.put_price(inp) == pytest.approx(pricing.call_price(inp), abs=1e-12)


class TestImpliedVol:
    def test_black_scholes_oracle(self):
        assert pricing.bs_price(100.0, 95.0, 0.05, 0.5, 0.2) == pytest.approx(BS_ORACLE, abs=1e-12)

    @given(st.floats(0.6, 1.5), st.floats(0.05, 1.2), st.sampled_from([0.1, 0.25, 1.0]),
           st.sampled_from(["call", "put"]))
    @settings(max_examples=60, deadline=None)
    def test_round_trip(self, m, sigma, t, kind):
        K = 100.0 * m
        price = pricing.bs_price(100.0, K, 0.03, t, sigma, kind)
        floor = max(100.0 - K * math.exp(-0.03 * t), 0.0) if kind == "call" else max(K * math.exp(-0.03 * t) - 100.0, 0.0)
        if price - floor < 1e-6:
            return
        assert pricing.implied_vol(price, 100.0, K, 0.03, t, kind) == pytest.approx(sigma, abs=1e-8)

    def test_below_intrinsic(self):
        with pytest.raises(ValueError):
            pricing.implied_vol(4.0, 100.0, 95.0, 0.0, 0.5)

    def test_above_spot(self):
        with pytest.raises(ValueError):
            pricing.implied_vol(101.0, 100.0, 95.0, 0.0, 0.5)


class TestSurface:
    def test_parity(self, dji_surface):
        K = dji_surface.strikes
        for i, tau in enumerate(dji_surface.maturities):
            resid = dji_surface.call[i] - dji_surface.put[i] - 100.0 + K * math.exp(-0.0002 * tau)
            assert np.max(np.abs(resid)) <= 1e-10 * 100.0

    def test_no_arbitrage_bounds(self, dji_surface):
        K = dji_surface.strikes
        for i, tau in enumerate(dji_surface.maturities):
            lo = np.maximum(100.0 - K * math.exp(-0.0002 * tau), 0.0)
            assert np.all(dji_surface.call[i] >= lo) and np.all(dji_surface.call[i] <= 100.0)

    def test_monotone_in_strike(self, dji_surface):
        assert np.all(np.diff(dji_surface.call, axis=1) <= 1e-8 * 100.0)

    def test_rows_long_format(self, dji_surface):
        rows = list(dji_surface.rows())
        assert len(rows) == dji_surface.strikes.size * dji_surface.maturities.size
        assert rows[0][:2] == (70.0, 21)

    def test_downward_call_skew(self):
        S, h = 100.0, unconditional_variance(LEVERED)
        surf = pricing.build_surface(S, 0.0002, h, LEVERED, moneyness=[1.0, 1.2], maturities=[63])
        assert surf.call_iv[0, 1] < surf.call_iv[0, 0]
