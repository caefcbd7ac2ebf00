"""Ground-truth evaluation of subspace coresets."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionMismatch, KTooLarge, WrongDims
from .matrix import as_sparse, complete_basis, random_orthonormal, thin_svd
from .svd_coreset import CLAIM_FACTOR, ZERO_DENOMINATOR, CoresetResult

DENSE_LIMIT = 10**7
# ||AX||^2 below this multiple of ||A||_F^2 is rounding noise, not signal
ROUNDING_FLOOR = (64 * np.finfo(np.float64).eps) ** 2


def degenerate_floor(A) -> float:
    return max(ZERO_DENOMINATOR, ROUNDING_FLOOR * as_sparse(A).frobenius_sq())


@dataclass
class EvalReport:
    n_queries: int
    max_rel_error: float
    mean_rel_error: float
    epsilon_target: float
    bound_5eps: float
    coreset_size: int
    nnz_ratio: float
    optimal_query_error: float | None = None
    worst_query_error: float | None = None
    n_degenerate: int = 0
    wall_time_ms: dict = field(default_factory=dict)
    errors: list = field(default_factory=list, repr=False)

    @property
    def within_bound(self) -> bool:
        return self.max_rel_error <= self.bound_5eps

    def to_dict(self, timing: bool = True, per_query: bool = False) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("wall_time_ms")
        if not per_query:
            d.pop("errors")
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True)

    def table(self) -> str:
        rows = [
            ("queries", f"{self.n_queries} (+2 extreme, {self.n_degenerate} degenerate)"),
            ("coreset size", str(self.coreset_size)),
            ("nnz ratio", f"{self.nnz_ratio:.4g}"),
            ("max rel error", f"{self.max_rel_error:.4g}"),
            ("mean rel error", f"{self.mean_rel_error:.4g}"),
            ("optimal subspace error", _fmt(self.optimal_query_error)),
            ("worst subspace error", _fmt(self.worst_query_error)),
            ("epsilon target", f"{self.epsilon_target:.4g}"),
            ("bound 5*residual", f"{self.bound_5eps:.4g}"),
            ("within bound", "yes" if self.within_bound else "NO"),
        ]
        rows += [(f"time {k} [ms]", f"{v:.1f}") for k, v in self.wall_time_ms.items()]
        w = max(len(r[0]) for r in rows)
        return "\n".join(f"{a:<{w}}  {b}" for a, b in rows)


def _fmt(x):
    return "n/a" if x is None else f"{x:.4g}"


def query_set(A, k: int, n_queries: int, seed: int = 0):
    """Random complements of k-subspaces, then the optimal and the worst complement."""
    A = as_sparse(A)
    d = A.n_cols
    if not 1 <= k < d:
        raise KTooLarge(f"need 1 <= k < d = {d}, got k={k}")
    V = complete_basis(thin_svd(A, seed=seed).Vt, d)
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**63 - 1, size=n_queries)
    queries = [random_orthonormal(d, d - k, int(s)) for s in seeds]
    return queries, V[:, k:], V[:, : d - k]


def _query_error(Aop, Cop, X, floor):
    AX = Aop @ X
    full = float(np.sum(AX * AX))
    if full < floor:
        return None
    CX = Cop @ X
    return abs(1.0 - float(np.sum(CX * CX)) / full)


def evaluate(A, cs: CoresetResult, n_queries: int = 100, seed: int = 0) -> EvalReport:
    """Relative errors of ``cs`` over random and extreme query subspaces."""
    if n_queries < 1:
        raise ValueError("n_queries must be >= 1")
    A = as_sparse(A)
    if cs.n_source != A.n_rows:
        raise DimensionMismatch(f"coreset built for {cs.n_source} rows, matrix has {A.n_rows}")
    timings = {}
    t0 = time.perf_counter()
    queries, optimal, worst = query_set(A, cs.k, n_queries, seed)
    timings["queries"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    dense = A.n_rows * A.n_cols <= DENSE_LIMIT
    Aop = A.to_dense() if dense else A.csr
    C = cs.weighted_rows(A)
    Cop = C.to_dense() if dense else C.csr
    floor = degenerate_floor(A)
    errors, extremes, degenerate = [], [], 0
    for X in queries + [optimal, worst]:
        e = _query_error(Aop, Cop, X, floor)
        if e is None:
            degenerate += 1
        else:
            errors.append(e)
        extremes.append(e)
    timings["evaluate"] = 1e3 * (time.perf_counter() - t0)

    errs = np.array(errors) if errors else np.zeros(1)
    return EvalReport(
        n_queries=n_queries,
        max_rel_error=float(errs.max()),
        mean_rel_error=float(errs.mean()),
        epsilon_target=float(cs.epsilon_target),
        bound_5eps=CLAIM_FACTOR * float(cs.epsilon_residual),
        coreset_size=cs.size,
        nnz_ratio=C.nnz / A.nnz if A.nnz else 0.0,
        optimal_query_error=extremes[-2],
        worst_query_error=extremes[-1],
        n_degenerate=degenerate,
        wall_time_ms=timings,
        errors=[None if e is None else float(e) for e in extremes],
    )


def _tail_cost(A, Vt_top, d):
    X = complete_basis(Vt_top, d)[:, Vt_top.shape[0]:]
    AX = A @ X
    return float(np.sum(AX * AX))


def optimal_cost_comparison(A, cs: CoresetResult, k: int):
    """``(cost of A's best k-subspace, cost on A of the coreset's best k-subspace)``."""
    A = as_sparse(A)
    d = A.n_cols
    if not 1 <= k < d:
        raise KTooLarge(f"need 1 <= k < d = {d}, got k={k}")
    svd = thin_svd(A)
    opt = float(np.sum(svd.sigma[k:] ** 2))
    C = cs.weighted_rows(A)
    if C.nnz == 0:
        return opt, A.frobenius_sq()
    csvd = thin_svd(C)
    return opt, _tail_cost(A, csvd.Vt[:k], d)


def cost_ratio(opt: float, got: float) -> float:
    if opt <= 0.0:
        return 1.0 if got <= 1e-12 else math.inf
    return got / opt


def brute_force_2d(A, cs: CoresetResult, grid: int = 3600) -> float:
    """Largest relative error over ``grid`` lines through the origin in the plane."""
    A = as_sparse(A)
    if A.n_cols != 2 or cs.k != 1:
        raise WrongDims("brute force sweep needs d=2 and k=1")
    theta = np.arange(grid) * (math.pi / grid)
    # the complement of span(cos, sin) is spanned by (-sin, cos)
    normals = np.stack([-np.sin(theta), np.cos(theta)])
    full = np.sum((A @ normals) ** 2, axis=0)
    weighted = np.sum((cs.weighted_rows(A) @ normals) ** 2, axis=0)
    ok = full >= degenerate_floor(A)
    if not ok.any():
        return 0.0
    return float(np.max(np.abs(1.0 - weighted[ok] / full[ok])))
