"""(eps, k)-coresets for sums of squared distances to k-subspaces.

Each row ``a_i = u_i diag(sigma) V^T`` is lifted to

    v_i = (u_{i,1:k},  u_{i,k+1:r} * sigma_tail / ||sigma_tail||,  tau)

and the rank-one matrices ``v_i v_i^T`` are handed to the Frank-Wolfe solver
as unit points ``x_i x_i^T`` (``x_i = v_i / ||v_i||``) with target weights
``||v_i||^2 / Z``, ``Z = sum_i ||v_i||^2``. A simplex solution ``w`` maps back
to row multipliers ``W_ii = sqrt(w_i Z / ||v_i||^2)``, for which

    || sum_i (1 - W_ii^2) v_i v_i^T ||_F  =  Z * (solver residual).

That quantity is what :attr:`CoresetResult.epsilon_residual` reports; the
relative error of every query is expected to stay under five times it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadEpsilon, DimensionMismatch, KTooLarge, ZeroDenominator, ZeroNormRow
from .ifa import FrankWolfe, FwTrace, OuterProductOracle, SimplexWeights, caratheodory_exact
from .matrix import SparseMatrix, SvdFactors, as_sparse, check_orthonormal, thin_svd

CLAIM_FACTOR = 5.0
ZERO_DENOMINATOR = 1e-30


@dataclass(frozen=True, eq=False)
class LiftedRows:
    P: np.ndarray
    row_norms: np.ndarray
    X: np.ndarray
    k: int
    sigma_tail_norm_sq: float
    tail_scale: float
    exact: bool = False

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def mass(self) -> float:
        """``Z = sum_i ||P_i||^2``."""
        return float(np.sum(self.row_norms**2))

    def target(self) -> np.ndarray:
        return self.row_norms**2 / self.mass


def build_lifted(svd: SvdFactors, k: int, tail_scale: float) -> LiftedRows:
    r = svd.r
    if k < 1:
        raise KTooLarge(f"k must be >= 1, got {k}")
    if k >= r:
        raise KTooLarge(f"k={k} must be below the rank {r}")
    if not 0.0 < tail_scale <= 1.0:
        raise ValueError(f"tail_scale must lie in (0, 1], got {tail_scale}")
    U = svd.U
    n = U.shape[0]
    tail = svd.sigma[k:]
    s2 = float(tail @ tail)
    exact = s2 <= (np.finfo(np.float64).eps * svd.sigma[0]) ** 2
    if exact:
        tail_block = np.zeros((n, r - k))
    else:
        tail_block = U[:, k:] * (tail / math.sqrt(s2))
    P = np.hstack([U[:, :k], tail_block, np.full((n, 1), tail_scale)])
    norms = np.linalg.norm(P, axis=1)
    return LiftedRows(
        P=P,
        row_norms=norms,
        X=P / norms[:, None],
        k=k,
        sigma_tail_norm_sq=0.0 if exact else s2,
        tail_scale=tail_scale,
        exact=bool(exact),
    )


def extract_weights(w: SimplexWeights, lifted: LiftedRows):
    """Row multipliers ``sqrt(w_i Z / ||P_i||^2)`` on the support of ``w``."""
    if w.n != lifted.n:
        raise DimensionMismatch(f"weights over {w.n} rows, lifting has {lifted.n}")
    norms_sq = lifted.row_norms[w.indices] ** 2
    if np.any(norms_sq <= 0):
        raise ZeroNormRow("cannot weight a row whose lifted norm is zero")
    return w.indices.copy(), np.sqrt(w.values * lifted.mass / norms_sq)


def lift_residual(lifted: LiftedRows, indices, row_weights) -> float:
    """``||sum_i (1 - W_ii^2) P_i P_i^T||_F`` computed densely (``m x m``)."""
    P = lifted.P
    M = P.T @ P
    S = P[indices] * np.asarray(row_weights)[:, None]
    M -= S.T @ S
    return float(np.linalg.norm(M))


@dataclass(eq=False)
class CoresetResult:
    """Weighted subset of rows: row ``indices[t]`` scaled by ``row_weights[t]``."""

    indices: np.ndarray
    row_weights: np.ndarray
    epsilon_target: float
    epsilon_residual: float
    k: int
    trace: FwTrace
    n_source: int
    lift_mass: float = 0.0
    exact: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.row_weights = np.asarray(self.row_weights, dtype=np.float64)
        order = np.argsort(self.indices, kind="stable")
        self.indices, self.row_weights = self.indices[order], self.row_weights[order]
        if np.any(np.diff(self.indices) <= 0):
            raise ValueError("coreset indices must be distinct")
        if np.any(self.row_weights <= 0):
            raise ValueError("row weights must be positive")

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def bound(self) -> float:
        """Five times the lifted residual: the per-query relative error bound."""
        return CLAIM_FACTOR * self.epsilon_residual

    def weighted_rows(self, A) -> SparseMatrix:
        """The coreset as a sparse matrix ``D R`` (scaled original rows)."""
        return as_sparse(A).take_rows(self.indices, self.row_weights)

    def to_dict(self) -> dict:
        return {
            "k": int(self.k),
            "epsilon_target": float(self.epsilon_target),
            "epsilon_residual": float(self.epsilon_residual),
            "indices": [int(i) for i in self.indices],
            "row_weights": [float(x) for x in self.row_weights],
            "n_source": int(self.n_source),
            "lift_mass": float(self.lift_mass),
            "exact": bool(self.exact),
            "trace": self.trace.to_dict(),
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "CoresetResult":
        return cls(
            indices=d["indices"],
            row_weights=d["row_weights"],
            epsilon_target=d["epsilon_target"],
            epsilon_residual=d["epsilon_residual"],
            k=d["k"],
            trace=FwTrace.from_dict(d["trace"]),
            n_source=d["n_source"],
            lift_mass=d.get("lift_mass", 0.0),
            exact=d.get("exact", False),
            meta=d.get("meta", {}),
        )

    @classmethod
    def from_json(cls, s: str) -> "CoresetResult":
        return cls.from_dict(json.loads(s))


def _sym_features(Xr: np.ndarray) -> np.ndarray:
    """Rows ``x x^T`` flattened to their upper triangle (Frobenius-isometric)."""
    r = Xr.shape[1]
    iu = np.triu_indices(r)
    scale = np.where(iu[0] == iu[1], 1.0, math.sqrt(2.0))
    return (Xr[:, iu[0]] * Xr[:, iu[1]]) * scale


def _exact_coreset(svd: SvdFactors, k: int, epsilon: float, n: int) -> CoresetResult:
    # rank <= k: match sum_i W_ii^2 u_i u_i^T = I_r exactly
    U = svd.U
    r = U.shape[1]
    norms_sq = np.einsum("ij,ij->i", U, U)
    live = np.flatnonzero(norms_sq > 0)
    Xr = U[live] / np.sqrt(norms_sq[live])[:, None]
    z = norms_sq[live] / norms_sq[live].sum()
    w = caratheodory_exact(_sym_features(Xr), z)
    idx = live[w.indices]
    weights = np.sqrt(w.values * r / norms_sq[idx])
    S = U[idx] * weights[:, None]
    resid = float(np.linalg.norm(np.eye(r) - S.T @ S))
    trace = FwTrace(start=int(idx[0]), residual_norm_per_iter=[resid / r], stop_reason="exact")
    return CoresetResult(
        indices=idx,
        row_weights=weights,
        epsilon_target=epsilon,
        epsilon_residual=resid,
        k=k,
        trace=trace,
        n_source=n,
        lift_mass=float(r),
        exact=True,
    )


def check_params(shape, k: int, epsilon: float):
    if not (isinstance(epsilon, (int, float)) and 0.0 < epsilon <= 1.0):
        raise BadEpsilon(f"epsilon must lie in (0, 1], got {epsilon!r}")
    n, d = shape
    if not 1 <= k < min(n, d):
        raise KTooLarge(f"need 1 <= k < min(n, d) = {min(n, d)}, got k={k}")


def svd_coreset(
    A,
    k: int,
    epsilon: float,
    seed: int = 0,
    max_iter: int | None = None,
    start: str | int = "first",
) -> CoresetResult:
    """Deterministic (eps, k)-coreset of the rows of ``A``.

    At most ``ceil(k / eps^2)`` Frank-Wolfe steps are taken, so the coreset
    has at most ``ceil(k / eps^2) + 1`` rows. The run stops early once the
    lifted residual ``epsilon_residual`` drops to ``epsilon``. Inputs of rank at
    most ``k`` are represented exactly instead (``exact=True``).
    """
    A = as_sparse(A)
    check_params(A.shape, k, epsilon)
    n = A.n_rows
    svd = thin_svd(A, seed=seed)
    if svd.r <= k:
        return _exact_coreset(svd, k, epsilon, n)

    lifted = build_lifted(svd, k, 1.0 / math.sqrt(n))
    Z = lifted.mass
    budget = math.ceil(k / epsilon**2 - 1e-9)
    if max_iter is not None:
        budget = min(budget, int(max_iter))
    solver = FrankWolfe(OuterProductOracle(lifted.X), lifted.target(), start=start)
    w, trace = solver.run(epsilon / Z, budget)
    idx, weights = extract_weights(w, lifted)
    return CoresetResult(
        indices=idx,
        row_weights=weights,
        epsilon_target=epsilon,
        epsilon_residual=Z * solver.residual,
        k=k,
        trace=trace,
        n_source=n,
        lift_mass=Z,
    )


def claim_error(A, cs: CoresetResult, X: np.ndarray) -> float:
    """``|1 - ||W A X||^2 / ||A X||^2|`` for an orthonormal ``X``."""
    A = as_sparse(A)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != A.n_cols:
        raise DimensionMismatch(f"X has shape {X.shape}, expected ({A.n_cols}, m)")
    check_orthonormal(X)
    AX = A @ X
    full = float(np.sum(AX * AX))
    if full < ZERO_DENOMINATOR:
        raise ZeroDenominator(f"||AX||^2 = {full:.3g}: query is orthogonal to the data")
    CX = cs.weighted_rows(A) @ X
    return abs(1.0 - float(np.sum(CX * CX)) / full)
