"""Intraday volatility modeling for discrete tick-by-tick price changes."""

__version__ = "0.1.0"
