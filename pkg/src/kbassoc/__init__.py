"""K-best data association with implicit miss handling.

Core surface:

    SparseCostMatrix   gated pairing costs, misses implicit and free
    build_cost         fold likelihoods + miss probabilities into costs
    solve_optimal      best single association under constraints
    kbest_single       K best associations of one problem
    kbest_mimo         K best across a bank of weighted hypotheses
    gibbs_sample       sampling baseline over the same problems
"""

from .backend import HAVE_C, available_backends, resolve
from .core import (MISS, Association, HypothesisSet, InfeasibleError,
                   InvalidInputError, SparseCostMatrix, TooLargeError,
                   Violation, association_nll, association_probability,
                   build_cost, dual_tolerance, read_matrix_text,
                   validate_association, write_matrix_text)
from .gibbs import SampleSummary, gibbs_sample
from .kbest import (OutputSet, ProblemNode, SolutionQueue, SolverConfig,
                    kbest_mimo, kbest_single, lookahead_bound, partition)
from .ssp import (DualState, Matching, PathResult, apply_path,
                  shortest_path_augmented, shortest_path_dense,
                  shortest_path_sparse, solve_optimal, update_duals)

__version__ = "0.1.0"

__all__ = [
    "MISS", "Association", "HypothesisSet", "InfeasibleError",
    "InvalidInputError", "SparseCostMatrix", "TooLargeError", "Violation",
    "association_nll", "association_probability", "build_cost",
    "dual_tolerance", "read_matrix_text", "validate_association",
    "write_matrix_text", "DualState", "Matching", "PathResult", "apply_path",
    "shortest_path_augmented", "shortest_path_dense", "shortest_path_sparse",
    "solve_optimal", "update_duals", "OutputSet", "ProblemNode",
    "SolutionQueue", "SolverConfig", "kbest_mimo", "kbest_single",
    "lookahead_bound", "partition", "SampleSummary", "gibbs_sample",
    "HAVE_C", "available_backends", "resolve",
]
