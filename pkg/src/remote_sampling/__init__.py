"""Exact remote sampling of distributions whose parameters are split among custodians."""

__version__ = "0.1.0"
