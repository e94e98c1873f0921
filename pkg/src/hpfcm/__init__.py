"""Finite cell method on multi-level hp grids with hierarchical multigrid solvers."""

__version__ = "0.1.0"
