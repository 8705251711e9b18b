"""Pricing - Black-Scholes, Heston and moment-based stochastic volatility call pricers."""
