"""Item frequency approximation in the Euclidean norm.

Given unit vectors ``p_1..p_n`` in some inner-product space and a target
distribution ``z``, find a sparse distribution ``w`` with
``||sum_i (z_i - w_i) p_i|| <= eps``. The points are only ever touched through
an oracle that returns inner products, so the same solver runs on explicit
vectors and on implicit outer products ``x_i x_i^T``.

The solver is Frank-Wolfe on the simplex with exact line search. The squared
residual is carried recursively through three scalars (``<x, p_j>``,
``<mu, p_j> - <mu, x>`` and ``||x||^2``), so the current point ``x`` is never
formed.
"""

from __future__ import annotations

import abc
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadEpsilon,
    DegenerateStep,
    DimensionMismatch,
    NumericalBreakdown,
    OracleInconsistency,
)

SUM_TOL = 1e-9
NEG_RESIDUAL_TOL = 1e-9
DEGENERATE_DEN = 1e-15
STALL_STEP = 1e-12


# -- distributions -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SimplexWeights:
    """Sparse probability vector over ``n`` items (strictly positive entries only)."""

    n: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        order = np.argsort(idx, kind="stable")
        idx, val = idx[order], val[order]
        if idx.shape != val.shape:
            raise ValueError("indices and values differ in length")
        if len(idx) and (idx[0] < 0 or idx[-1] >= self.n or np.any(np.diff(idx) == 0)):
            raise ValueError("indices must be distinct and inside [0, n)")
        if np.any(val <= 0) or not np.all(np.isfinite(val)):
            raise ValueError("stored weights must be positive")
        if abs(val.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"weights sum to {val.sum()!r}, not 1")
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dense(cls, w) -> "SimplexWeights":
        w = np.asarray(w, dtype=np.float64)
        nz = np.flatnonzero(w > 0)
        return cls(len(w), nz, w[nz])

    @classmethod
    def uniform(cls, n: int) -> "SimplexWeights":
        return cls(n, np.arange(n), np.full(n, 1.0 / n))

    @classmethod
    def vertex(cls, n: int, i: int) -> "SimplexWeights":
        return cls(n, [i], [1.0])

    @property
    def support_size(self) -> int:
        return len(self.indices)

    def to_dense(self) -> np.ndarray:
        w = np.zeros(self.n)
        w[self.indices] = self.values
        return w

    def to_dict(self) -> dict:
        return {"n": self.n, "weights": [[int(i), float(v)] for i, v in zip(self.indices, self.values)]}

    @classmethod
    def from_dict(cls, d) -> "SimplexWeights":
        pairs = d["weights"]
        return cls(int(d["n"]), [p[0] for p in pairs], [p[1] for p in pairs])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "SimplexWeights":
        return cls.from_dict(json.loads(s))


def _as_dense_distribution(z, n: int) -> np.ndarray:
    if z is None:
        return np.full(n, 1.0 / n)
    if isinstance(z, SimplexWeights):
        if z.n != n:
            raise DimensionMismatch(f"distribution over {z.n} items, oracle has {n}")
        return z.to_dense()
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (n,):
        raise DimensionMismatch(f"distribution has shape {z.shape}, expected ({n},)")
    if np.any(z < 0) or abs(z.sum() - 1.0) > SUM_TOL:
        raise ValueError("z is not a distribution")
    return z


# -- oracles ----------------------------------------------------------------------


class PointSetOracle(abc.ABC):
    """Inner-product access to ``n`` points.

    Subclasses provide a full Gram column and the inner products of every
    point with a ``z``-weighted mean; everything else derives from those.
    """

    n: int

    @abc.abstractmethod
    def gram_column(self, j: int) -> np.ndarray:
        """``<p_i, p_j>`` for all ``i``."""

    @abc.abstractmethod
    def target(self, z: np.ndarray) -> tuple[np.ndarray, float]:
        """``(<p_i, mu> for all i, ||mu||^2)`` with ``mu = sum_i z_i p_i``."""

    @abc.abstractmethod
    def diag(self) -> np.ndarray:
        """``<p_i, p_i>`` for all ``i``."""

    def inner(self, i: int, j: int) -> float:
        return float(self.gram_column(j)[i])

    def target_inner(self, i: int, z=None) -> float:
        return float(self.target(_as_dense_distribution(z, self.n))[0][i])

    def target_norm_sq(self, z=None) -> float:
        return float(self.target(_as_dense_distribution(z, self.n))[1])

    def gram(self) -> np.ndarray:
        return np.column_stack([self.gram_column(j) for j in range(self.n)])


class VectorOracle(PointSetOracle):
    """Explicit points, one per row of ``points``."""

    def __init__(self, points):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        if self.points.ndim != 2:
            raise DimensionMismatch("points must be a 2-D array")
        self.n = self.points.shape[0]

    def gram_column(self, j):
        return self.points @ self.points[j]

    def diag(self):
        return np.einsum("ij,ij->i", self.points, self.points)

    def target(self, z):
        mu = z @ self.points
        return self.points @ mu, float(mu @ mu)

    def combination(self, w) -> np.ndarray:
        return np.asarray(w) @ self.points


class OuterProductOracle(PointSetOracle):
    """Implicit points ``x_i x_i^T`` for the rows ``x_i`` of ``X``.

    ``<x_i x_i^T, x_j x_j^T>_F = (x_i . x_j)^2``, and for the mean
    ``M = sum_l z_l x_l x_l^T`` one has ``<x_i x_i^T, M> = x_i^T M x_i``, where
    ``M`` is only ``m x m``.
    """

    def __init__(self, X):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        if self.X.ndim != 2:
            raise DimensionMismatch("X must be a 2-D array")
        self.n = self.X.shape[0]

    def gram_column(self, j):
        g = self.X @ self.X[j]
        return g * g

    def diag(self):
        s = np.einsum("ij,ij->i", self.X, self.X)
        return s * s

    def moment(self, z) -> np.ndarray:
        return (self.X.T * z) @ self.X

    def target(self, z):
        M = self.moment(z)
        t = np.einsum("ij,ij->i", self.X @ M, self.X)
        return t, float(np.sum(M * M))

    def combination(self, w) -> np.ndarray:
        return self.moment(np.asarray(w))


# -- Frank-Wolfe ------------------------------------------------------------------


@dataclass
class LineSearchState:
    """Scalars that determine the exact line search toward vertex ``j``.

    ``a = <x, p_j>``, ``b = <mu, p_j> - <mu, x>``, ``c = ||x||^2`` and
    ``vertex_sq = ||p_j||^2`` (1 for unit points).
    """

    a: float
    b: float
    c: float
    vertex_sq: float = 1.0


def line_search_alpha(state: LineSearchState) -> float:
    """Step ``alpha`` in ``x <- (1 - alpha) x + alpha p_j`` minimizing ``||x - mu||``.

    The unclamped minimizer is ``<mu - x, p_j - x> / ||p_j - x||^2``, which in
    terms of the state scalars is ``(c - a + b) / (vertex_sq + c - 2a)``.
    """
    den = state.vertex_sq + state.c - 2.0 * state.a
    if abs(den) < DEGENERATE_DEN:
        raise DegenerateStep(f"segment length^2 {den:.3g}: iterate coincides with vertex")
    alpha = (state.c - state.a + state.b) / den
    return min(1.0, max(0.0, alpha))


@dataclass
class FwTrace:
    """Per-iteration record of a Frank-Wolfe run.

    ``residual_norm_per_iter[0]`` is the residual at the start vertex; entry
    ``t`` is the residual after ``t`` accepted steps. ``selected_indices`` and
    ``alphas`` have one entry per accepted step.
    """

    start: int
    iterations: int = 0
    residual_norm_per_iter: list = field(default_factory=list)
    selected_indices: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    stop_reason: str = ""

    def weights_at(self, n: int, t: int | None = None) -> np.ndarray:
        """Replay the recorded steps to recover the dense iterate after ``t`` steps."""
        t = self.iterations if t is None else min(t, self.iterations)
        w = np.zeros(n)
        w[self.start] = 1.0
        for j, a in zip(self.selected_indices[:t], self.alphas[:t]):
            w *= 1.0 - a
            w[j] += a
        return w

    def to_dict(self) -> dict:
        return {
            "start": int(self.start),
            "iterations": int(self.iterations),
            "residual_norm_per_iter": [float(r) for r in self.residual_norm_per_iter],
            "selected_indices": [int(j) for j in self.selected_indices],
            "alphas": [float(a) for a in self.alphas],
            "stop_reason": self.stop_reason,
        }

    @classmethod
    def from_dict(cls, d) -> "FwTrace":
        return cls(
            start=d["start"],
            iterations=d["iterations"],
            residual_norm_per_iter=list(d["residual_norm_per_iter"]),
            selected_indices=list(d["selected_indices"]),
            alphas=list(d["alphas"]),
            stop_reason=d.get("stop_reason", ""),
        )


def _check_epsilon(epsilon):
    if not (isinstance(epsilon, (int, float)) and 0.0 < epsilon <= 1.0):
        raise BadEpsilon(f"epsilon must lie in (0, 1], got {epsilon!r}")


def iteration_budget(epsilon: float, max_iter: int) -> int:
    """Steps allowed for a run: ``min(max_iter, ceil(1/eps^2))``."""
    return min(int(max_iter), math.ceil(1.0 / epsilon**2 - 1e-9))


def select_vertex(oracle: PointSetOracle, w, z=None) -> int:
    """Index minimizing ``<p_i, x - mu>`` with ``x = sum w_l p_l``; smallest index on ties."""
    w = _as_dense_distribution(w, oracle.n)
    t, _ = oracle.target(_as_dense_distribution(z, oracle.n))
    h = np.zeros(oracle.n)
    for l in np.flatnonzero(w):
        h += w[l] * oracle.gram_column(int(l))
    return int(np.argmin(h - t))


class FrankWolfe:
    """Single-threaded solver state; :func:`frank_wolfe` is the usual entry point."""

    def __init__(self, oracle: PointSetOracle, z=None, start: str | int = "first"):
        self.oracle = oracle
        n = oracle.n
        if n < 1:
            raise DimensionMismatch("empty point set")
        self.z = _as_dense_distribution(z, n)
        self.t, self.mu_sq = oracle.target(self.z)
        self.kdiag = oracle.diag()
        self._columns: dict[int, np.ndarray] = {}

        if start == "first":
            j0 = 0
        elif start == "nearest":
            j0 = int(np.argmin(self.kdiag - 2.0 * self.t))
        else:
            j0 = int(start)
        self.w = np.zeros(n)
        self.w[j0] = 1.0
        self.h = self.column(j0).copy()  # <x, p_i> for every i
        self.c = float(self.kdiag[j0])  # ||x||^2
        self.xm = float(self.t[j0])  # <x, mu>
        self.trace = FwTrace(start=j0)
        self.res_sq = self._residual_sq()
        self.trace.residual_norm_per_iter.append(math.sqrt(self.res_sq))

    def column(self, j: int) -> np.ndarray:
        col = self._columns.get(j)
        if col is None:
            col = self._columns[j] = self.oracle.gram_column(j)
        return col

    def _residual_sq(self) -> float:
        r = self.c - 2.0 * self.xm + self.mu_sq
        if r < -NEG_RESIDUAL_TOL:
            raise OracleInconsistency(f"squared residual {r:.3g} < 0; Gram matrix is not PSD")
        return max(r, 0.0)

    @property
    def residual(self) -> float:
        return math.sqrt(self.res_sq)

    def step(self) -> bool:
        """One Frank-Wolfe step. Returns False when no progress is possible."""
        j = int(np.argmin(self.h - self.t))
        state = LineSearchState(
            a=float(self.h[j]), b=float(self.t[j] - self.xm), c=self.c, vertex_sq=float(self.kdiag[j])
        )
        try:
            alpha = line_search_alpha(state)
        except DegenerateStep:
            self.trace.stop_reason = "degenerate"
            return False
        if alpha <= STALL_STEP:
            self.trace.stop_reason = "stalled"
            return False

        col = self.column(j)
        beta = 1.0 - alpha
        self.w *= beta
        self.w[j] += alpha
        self.h *= beta
        self.h += alpha * col
        self.c = beta * beta * self.c + 2.0 * alpha * beta * state.a + alpha * alpha * state.vertex_sq
        self.xm = beta * self.xm + alpha * float(self.t[j])
        self.res_sq = self._residual_sq()

        tr = self.trace
        tr.iterations += 1
        tr.selected_indices.append(j)
        tr.alphas.append(alpha)
        tr.residual_norm_per_iter.append(math.sqrt(self.res_sq))
        return True

    def run(self, epsilon: float, budget: int):
        while True:
            if self.residual <= epsilon:
                self.trace.stop_reason = "converged"
                break
            if self.trace.iterations >= budget:
                self.trace.stop_reason = "budget"
                break
            if not self.step():
                break
        return self.weights(), self.trace

    def weights(self) -> SimplexWeights:
        w = self.w / self.w.sum()
        return SimplexWeights.from_dense(w)


def frank_wolfe(oracle: PointSetOracle, z=None, epsilon: float = 0.1, max_iter: int = 1000, start="first"):
    """Sparse ``w`` with ``||sum (z_i - w_i) p_i|| <= epsilon`` when the budget allows.

    Runs at most ``min(max_iter, ceil(1/epsilon^2))`` steps from the vertex
    ``start`` (``"first"``, ``"nearest"`` or an index), stopping early once the
    residual reaches ``epsilon`` or the line search stalls. Returns the
    distribution and its :class:`FwTrace`.
    """
    _check_epsilon(epsilon)
    solver = FrankWolfe(oracle, z, start=start)
    return solver.run(epsilon, iteration_budget(epsilon, max_iter))


# -- exact (Caratheodory) -----------------------------------------------------


def _null_vector(M: np.ndarray) -> np.ndarray:
    _, _, vt = np.linalg.svd(M)
    v = vt[-1]
    return v if v.max() >= -v.min() else -v


def _eliminate(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    pos = v > 0
    if not pos.any() or v[pos].max() < 1e-12:
        raise NumericalBreakdown("null vector has no usable positive pivot")
    ratio = np.full(len(v), np.inf)
    ratio[pos] = w[pos] / v[pos]
    k = int(np.argmin(ratio))
    w = w - ratio[k] * v
    w[k] = 0.0
    w[w < 0] = 0.0
    return w


def caratheodory_exact(points, z, rank_tol: float = 1e-10) -> SimplexWeights:
    """Distribution with at most ``d + 1`` support points and the same weighted mean.

    Support points are removed one at a time along null vectors of the lifted
    point matrix ``[p_i; 1]``. Once at most ``d + 1`` points remain the
    elimination continues while they stay affinely dependent, so collinear
    input ends with two points. Inputs already supported on at most ``d + 1``
    points are returned unchanged.
    """
    P = np.asarray(points, dtype=np.float64)
    if P.ndim != 2:
        raise DimensionMismatch("points must be a 2-D array")
    n, d = P.shape
    zd = _as_dense_distribution(z, n)
    active = np.flatnonzero(zd > 0)
    if len(active) <= d + 1:
        return SimplexWeights(n, active, zd[active])
    w = zd[active].copy()

    while len(active) > d + 1:
        blk = slice(0, d + 2)
        M = np.vstack([P[active[blk]].T, np.ones(d + 2)])
        w[blk] = _eliminate(w[blk], _null_vector(M))
        keep = w > 0
        active, w = active[keep], w[keep]

    while len(active) > 1:
        M = np.vstack([P[active].T, np.ones(len(active))])
        s = np.linalg.svd(M, compute_uv=False)
        rank = int(np.sum(s > rank_tol * s[0]))
        if rank >= len(active):
            break
        w = _eliminate(w, _null_vector(M))
        keep = w > 0
        active, w = active[keep], w[keep]

    return SimplexWeights(n, active, w / w.sum())
