"""Deterministic coresets for sparse matrices via item frequency approximation."""

from .errors import CoresetError
from .evaluation import EvalReport, brute_force_2d, evaluate, optimal_cost_comparison
from .generate import low_rank_sparse
from .ifa import (
    FrankWolfe,
    FwTrace,
    LineSearchState,
    OuterProductOracle,
    PointSetOracle,
    SimplexWeights,
    VectorOracle,
    caratheodory_exact,
    frank_wolfe,
    line_search_alpha,
    select_vertex,
)
from .matrix import SparseMatrix, SvdFactors, random_orthonormal, sum_sq_dist, thin_svd
from .onemean import OneMeanCoreset, eval_one_mean, one_mean_coreset
from .streaming import StreamState, parallel_build, stream_finalize, stream_insert
from .svd_coreset import (
    CoresetResult,
    LiftedRows,
    build_lifted,
    claim_error,
    extract_weights,
    svd_coreset,
)

__version__ = "0.1.0"
