"""Hierarchical quadratic-envelope calculus for random-field box integrals,
with Monte Carlo verification of its linear-response, moderate-deviation
and CLT consequences on concrete short-range-dependent models."""

__version__ = "0.1.0"
