"""Low-rank tensor approximation toolkit.

Dense tensors are plain numpy arrays; the low-rank formats (CP, Tucker,
tensor train, dimension-tree based) live in :mod:`tensoria.formats`,
SVD-based compression in :mod:`tensoria.decompose`, alternating and greedy
optimization in :mod:`tensoria.optimize`, the random-coefficient diffusion
benchmark in :mod:`tensoria.parametric` and the low-rank solvers in
:mod:`tensoria.solvers`.
"""

from .dense import alpha_rank, dematricize, inner, matricize, mode_apply, norm
from .decompose import (
    SVDResult,
    TruncationReport,
    hosvd,
    tree_hosvd,
    truncate,
    truncated_svd,
    tt_svd,
)
from .formats import (
    CPTensor,
    TreeTensor,
    TTTensor,
    TuckerTensor,
    add,
    cp_to_tt,
    eval_entry,
    orthonormalize,
    pad_rank,
    param_count,
    random_lowrank,
    scale,
    to_dense,
    tt_to_tree,
)
from .optimize import (
    GreedyTrace,
    OptimOptions,
    QuadraticObjective,
    als_best_approx,
    greedy_rank_one,
    greedy_tucker,
    least_squares_fit,
    legendre_basis,
    orthogonal_greedy,
    predict,
)
from .tree import DimensionTree

__version__ = "0.1.0"

__all__ = [
    "alpha_rank",
    "dematricize",
    "inner",
    "matricize",
    "mode_apply",
    "norm",
    "SVDResult",
    "TruncationReport",
    "hosvd",
    "tree_hosvd",
    "truncate",
    "truncated_svd",
    "tt_svd",
    "CPTensor",
    "TreeTensor",
    "TTTensor",
    "TuckerTensor",
    "add",
    "cp_to_tt",
    "eval_entry",
    "orthonormalize",
    "pad_rank",
    "param_count",
    "random_lowrank",
    "scale",
    "to_dense",
    "tt_to_tree",
    "GreedyTrace",
    "OptimOptions",
    "QuadraticObjective",
    "als_best_approx",
    "greedy_rank_one",
    "greedy_tucker",
    "least_squares_fit",
    "legendre_basis",
    "orthogonal_greedy",
    "predict",
    "DimensionTree",
]
