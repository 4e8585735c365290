"""Split centrosymmetric tomographic systems into two independent quarter-size solves."""

from .core import (
    CentroSymmetricSystem,
    SolutionPair,
    SplitSystem,
    SymmetryError,
    SymmetryReport,
    check_det_identity,
    decompose_solution,
    gram_split_check,
    norm_identity,
    reconstruct_matrix,
    recombine_solution,
    split_rhs,
    split_system,
    symmetrize,
    verify_symmetry,
)
from .solvers import (
    SolveOptions,
    SolveReport,
    cgls_solve,
    pseudo_solve_dense,
    sart_solve,
    solve_direct,
    solve_split,
)

__version__ = "0.1.0"

__all__ = [
    "CentroSymmetricSystem", "SolutionPair", "SplitSystem", "SymmetryError", "SymmetryReport",
    "check_det_identity", "decompose_solution", "gram_split_check", "norm_identity",
    "reconstruct_matrix", "recombine_solution", "split_rhs", "split_system", "symmetrize",
    "verify_symmetry", "SolveOptions", "SolveReport", "cgls_solve", "pseudo_solve_dense",
    "sart_solve", "solve_direct", "solve_split",
]
