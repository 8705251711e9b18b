"""Tests for the Black-Scholes pricer and its variance derivatives."""

from __future__ import annotations

import math
from decimal import Decimal, localcontext

import numpy as np
import pytest

from src.errors import InputValidationError
from src.pricing.black_scholes import bs_call, bs_call_variance, bs_variance_derivative, norm_cdf

PREC = 60
PI = Decimal("3.14159265358979323846264338327950288419716939937510582097494459230781640628")

# Central difference stencils as (offsets, weights); the sum is divided by h**order.
STENCILS = {
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1, -2, 1)),
    3: ((-2, -1, 1, 2), (-0.5, 1, -1, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1, -4, 6, -4, 1)),
}


def dec_norm_cdf(x: Decimal) -> Decimal:
    """Phi(x) = 1/2 + phi(x) * sum x^(2n+1) / (2n+1)!!, summed in extended precision."""
    with localcontext() as ctx:
        ctx.prec = PREC
        x2 = x * x
        term = x
        total = x
        n = 0
        while abs(term) > Decimal(10) ** -(PREC - 2):
            n += 1
            term = term * x2 / (2 * n + 1)
            total += term
        pdf = (-x2 / 2).exp() / (2 * PI).sqrt()
        return Decimal("0.5") + pdf * total


def dec_call_variance(S: Decimal, K: Decimal, r: Decimal, tau: Decimal, v: Decimal) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = PREC
        w = v * tau
        sqrt_w = w.sqrt()
        d1 = ((S / K).ln() + r * tau + w / 2) / sqrt_w
        d2 = d1 - sqrt_w
        return S * dec_norm_cdf(d1) - K * (-r * tau).exp() * dec_norm_cdf(d2)


def dec_derivative(S: float, K: float, r: float, tau: float, v: float, order: int) -> float:
    """Finite-difference derivative in v evaluated in extended precision."""
    with localcontext() as ctx:
        ctx.prec = PREC
        S_, K_, r_, tau_, v_ = (Decimal(repr(a)) for a in (S, K, r, tau, v))
        h = v_ * Decimal("1e-8")
        offsets, weights = STENCILS[order]
        total = sum(
            Decimal(repr(wt)) * dec_call_variance(S_, K_, r_, tau_, v_ + off * h)
            for off, wt in zip(offsets, weights, strict=True)
        )
        return float(total / h**order)


class TestNormCdf:
    """Standard normal CDF accuracy."""

    @pytest.mark.parametrize("x", [-8.0, -5.5, -3.0, -1.0, -0.1, 0.0, 0.3, 1.0, 2.5, 4.0, 8.0])
    def test_against_series(self, x):
        expected = float(dec_norm_cdf(Decimal(repr(x))))
        assert norm_cdf(x) == pytest.approx(expected, rel=1e-13, abs=0.0)

    def test_symmetry(self):
        x = np.linspace(-6, 6, 121)
        np.testing.assert_allclose(norm_cdf(x) + norm_cdf(-x), 1.0, rtol=0, atol=1e-15)

    def test_scalar_returns_float(self):
        assert isinstance(norm_cdf(0.5), float)


class TestBsCall:
    """Closed-form call price."""

    def test_at_the_money_reference(self):
        # 100 * (2 * N(0.1) - 1)
        assert bs_call(100.0, 100.0, 0.0, 1.0, 0.2) == pytest.approx(7.965567455405804, rel=1e-12)

    def test_matches_extended_precision(self):
        args = (Decimal(100), Decimal(110), Decimal("0.02"), Decimal("0.75"), Decimal("0.09"))
        expected = float(dec_call_variance(*args))
        assert bs_call(100.0, 110.0, 0.02, 0.75, 0.3) == pytest.approx(expected, rel=1e-13)

    def test_zero_volatility_is_intrinsic(self):
        assert bs_call(100.0, 90.0, 0.01, 1.0, 0.0) == pytest.approx(100.0 - 90.0 * math.exp(-0.01), rel=1e-15)
        assert bs_call(100.0, 110.0, 0.01, 1.0, 0.0) == 0.0

    def test_variance_parameterization_agrees(self):
        rng = np.random.default_rng(11)
        sigma = rng.uniform(0.05, 0.8, 200)
        K = rng.uniform(50, 150, 200)
        tau = rng.uniform(0.05, 3.0, 200)
        np.testing.assert_allclose(
            bs_call_variance(100.0, K, 0.01, tau, sigma**2),
            bs_call(100.0, K, 0.01, tau, sigma),
            rtol=1e-14,
            atol=1e-14,
        )

    def test_no_arbitrage_bounds(self):
        rng = np.random.default_rng(5)
        n = 1000
        S = rng.uniform(10, 500, n)
        K = S * rng.uniform(0.3, 3.0, n)
        r = rng.uniform(-0.02, 0.1, n)
        tau = rng.uniform(0.01, 5.0, n)
        sigma = rng.uniform(0.0, 1.5, n)

        price = bs_call(S, K, r, tau, sigma)

        lower = np.maximum(S - K * np.exp(-r * tau), 0.0)
        assert np.all(price >= lower)
        assert np.all(price <= S)

    def test_monotone_in_strike(self):
        K = np.linspace(50, 150, 201)
        price = bs_call(100.0, K, 0.01, 0.5, 0.25)
        assert np.all(np.diff(price) <= 0)

    def test_nondecreasing_in_volatility(self):
        rng = np.random.default_rng(19)
        sigma = np.linspace(0.0, 1.5, 151)
        for _ in range(50):
            K = rng.uniform(50, 200)
            tau = rng.uniform(0.01, 5.0)
            r = rng.uniform(-0.02, 0.1)
            price = bs_call(100.0, K, r, tau, sigma)
            assert np.all(np.diff(price) >= -1e-12 * 100.0)

    @pytest.mark.parametrize("K", [60.0, 100.0, 140.0])
    def test_nondecreasing_in_variance_rate(self, K):
        v = np.linspace(1e-4, 1.0, 100)
        price = bs_call_variance(100.0, K, 0.01, 0.75, v)
        assert np.all(np.diff(price) >= -1e-12 * 100.0)

    def test_vanishing_strike_approaches_spot(self):
        assert bs_call(100.0, 1e-8, 0.01, 1.0, 0.2) == pytest.approx(100.0, abs=1e-7)

    def test_vectorized_shape(self):
        price = bs_call(100.0, np.array([90.0, 100.0, 110.0]), 0.01, 0.5, 0.2)
        assert price.shape == (3,)

    @pytest.mark.parametrize(
        "args, match",
        [
            ((0.0, 100.0, 0.01, 1.0, 0.2), "positive"),
            ((100.0, -1.0, 0.01, 1.0, 0.2), "positive"),
            ((100.0, 100.0, 0.01, 0.0, 0.2), "tau"),
            ((100.0, 100.0, 0.01, 1.0, -0.2), "sigma"),
            ((100.0, 100.0, float("nan"), 1.0, 0.2), "finite"),
        ],
    )
    def test_invalid_inputs(self, args, match):
        with pytest.raises(InputValidationError, match=match):
            bs_call(*args)


class TestVarianceDerivatives:
    """Analytic derivatives of the price in the variance rate."""

    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    @pytest.mark.parametrize("K", [80.0, 95.0, 100.0, 105.0, 125.0])
    @pytest.mark.parametrize("tau, v", [(0.1, 0.04), (0.5, 0.09), (2.0, 0.2), (1.0, 0.01)])
    def test_against_extended_precision_differences(self, order, K, tau, v):
        S, r = 100.0, 0.02
        w = v * tau
        scale = tau**order * S / (math.sqrt(w) * w ** (order - 1))

        analytic = bs_variance_derivative(S, K, r, tau, v, order)
        expected = dec_derivative(S, K, r, tau, v, order)

        assert analytic == pytest.approx(expected, rel=1e-9, abs=1e-11 * scale)

    def test_first_order_float_differences(self):
        rng = np.random.default_rng(3)
        K = rng.uniform(80, 120, 50)
        tau = rng.uniform(0.1, 2.0, 50)
        v = rng.uniform(0.01, 0.2, 50)
        h = 1e-4 * v

        fd = (bs_call_variance(100.0, K, 0.01, tau, v + h) - bs_call_variance(100.0, K, 0.01, tau, v - h)) / (2 * h)

        np.testing.assert_allclose(bs_variance_derivative(100.0, K, 0.01, tau, v, 1), fd, rtol=1e-5, atol=1e-6)

    def test_first_derivative_is_vega_over_two_sigma(self):
        S, K, r, tau, sigma = 100.0, 100.0, 0.01, 1.0, 0.2
        d1 = (math.log(S / K) + (r + 0.5 * sigma**2) * tau) / (sigma * math.sqrt(tau))
        vega = S * math.exp(-0.5 * d1 * d1) / math.sqrt(2 * math.pi) * math.sqrt(tau)

        assert bs_variance_derivative(S, K, r, tau, sigma**2, 1) == pytest.approx(vega / (2 * sigma), rel=1e-13)

    @pytest.mark.parametrize("order", [0, 5])
    def test_unsupported_order(self, order):
        with pytest.raises(InputValidationError, match="order"):
            bs_variance_derivative(100.0, 100.0, 0.01, 1.0, 0.04, order)

    def test_zero_variance_rejected(self):
        with pytest.raises(InputValidationError, match="positive"):
            bs_variance_derivative(100.0, 100.0, 0.01, 1.0, 0.0, 2)

    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_vanish_for_far_strikes(self, order):
        K = np.array([300.0, 600.0, 1200.0, 1e4])
        size = np.abs(bs_variance_derivative(100.0, K, 0.01, 1.0, 0.04, order))

        assert np.all(np.diff(size) < 0)
        assert size[-1] <= 1e-20
