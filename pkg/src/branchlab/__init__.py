"""Exact finite-level models of U(1,1) over a p-adic field and its branching to K."""

__version__ = "0.1.0"
