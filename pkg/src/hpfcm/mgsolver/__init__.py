"""Hierarchical p/hp multigrid with point and additive Schwarz smoothers."""
from .hierarchy import LevelHierarchy, MgLevel, build_hierarchy, level_sequence
from .report import CSV_COLUMNS, SCHEMA_VERSION, SolveReport, contraction_stats
from .smoothers import (
    DEFAULT_OMEGA, GAUSS_SEIDEL, JACOBI, KINDS, SCHWARZ_ELEMENT, SCHWARZ_PATCH,
    GaussSeidelSmoother, JacobiSmoother, SchwarzSmoother, SingularBlockError,
    build_smoother, canonical_kind, element_blocks, patch_blocks, schwarz_preconditioner,
)
from .solvers import (
    CGCoarseSolver, DirectCoarseSolver, IndefiniteMatrixError, VCycle, build_smoothers,
    coarse_solver, solve_mg, solve_pcg, v_cycle,
)

__all__ = [
    "LevelHierarchy", "MgLevel", "build_hierarchy", "level_sequence",
    "CSV_COLUMNS", "SCHEMA_VERSION", "SolveReport", "contraction_stats",
    "DEFAULT_OMEGA", "GAUSS_SEIDEL", "JACOBI", "KINDS", "SCHWARZ_ELEMENT", "SCHWARZ_PATCH",
    "GaussSeidelSmoother", "JacobiSmoother", "SchwarzSmoother", "SingularBlockError",
    "build_smoother", "canonical_kind", "element_blocks", "patch_blocks", "schwarz_preconditioner",
    "CGCoarseSolver", "DirectCoarseSolver", "IndefiniteMatrixError", "VCycle", "build_smoothers",
    "coarse_solver", "solve_mg", "solve_pcg", "v_cycle",
]
