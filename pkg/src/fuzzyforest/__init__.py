"""Fuzzy Forests feature selection for correlated survey data."""

__version__ = "0.1.0"
