"""Lanchester-type attrition models fitted to daily battle data."""

__version__ = "0.1.0"
