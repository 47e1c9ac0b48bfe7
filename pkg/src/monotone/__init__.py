"""Numerical laboratory for beta-indexed Weiss-type monotonicity functionals."""

__version__ = "0.1.0"
