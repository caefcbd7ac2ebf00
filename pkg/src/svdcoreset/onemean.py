"""1-mean coresets via item frequency approximation.

Points are centered at their mean ``m`` and scaled by the root mean squared
spread ``sigma``, ``b_i = (a_i - m) / sigma``, then lifted to

    q_i = (b_i, ||b_i||^2, 1),

whose average is ``(0, 1, 1)``. Frank-Wolfe approximates that average by a
sparse combination ``sum_i u_i q_i``; the per-point multipliers of squared
distances are ``n * u_i``.

For any center ``c`` write ``x = (c - m) / sigma``. The relative error of the
weighted cost is the Rayleigh quotient of ``(1, |x|)`` against

    [[1 - sum u_i ||b_i||^2,  ||sum u_i b_i||],
     [||sum u_i b_i||,         1 - sum u_i     ]]

so the largest absolute eigenvalue of that 2x2 matrix is the exact worst case
over all centers. The construction stops as soon as it drops below epsilon.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadEpsilon, DimensionMismatch, EmptyInput
from .ifa import FrankWolfe, SimplexWeights, VectorOracle, caratheodory_exact
from .matrix import as_sparse

SIZE_CONSTANT = 4.0


@dataclass(eq=False)
class OneMeanCoreset:
    indices: np.ndarray
    weights: np.ndarray
    n_source: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        order = np.argsort(self.indices, kind="stable")
        self.indices, self.weights = self.indices[order], self.weights[order]
        if len(self.indices) != len(self.weights):
            raise ValueError("indices and weights differ in length")
        if np.any(np.diff(self.indices) <= 0) or np.any(self.weights <= 0):
            raise ValueError("indices must be distinct and weights positive")

    @property
    def size(self) -> int:
        return len(self.indices)

    def to_dict(self) -> dict:
        return {
            "indices": [int(i) for i in self.indices],
            "weights": [float(w) for w in self.weights],
            "n_source": int(self.n_source),
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "OneMeanCoreset":
        return cls(d["indices"], d["weights"], d["n_source"], d.get("meta", {}))


@dataclass(frozen=True, eq=False)
class OneMeanLift:
    mean: np.ndarray
    sigma: float
    b: np.ndarray  # normalized centered points
    s: np.ndarray  # ||b_i||^2
    q_norm: np.ndarray  # ||q_i||

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @property
    def avg_norm(self) -> float:
        return float(self.q_norm.mean())

    def unit_points(self) -> np.ndarray:
        Q = np.column_stack([self.b, self.s, np.ones(self.n)])
        return Q / self.q_norm[:, None]

    def target(self) -> np.ndarray:
        return self.q_norm / self.q_norm.sum()

    def multipliers(self, w: SimplexWeights) -> np.ndarray:
        """``u_i = w_i * L / ||q_i||`` on the support of ``w``."""
        return w.values * self.avg_norm / self.q_norm[w.indices]


def lift(points) -> OneMeanLift | None:
    """Centered, normalized lift; ``None`` when all points coincide."""
    A = np.asarray(as_sparse(points).to_dense())
    mean = A.mean(axis=0)
    B = A - mean
    var = float(np.einsum("ij,ij->", B, B)) / A.shape[0]
    scale = float(np.einsum("i,i->", mean, mean)) + float(np.abs(A).max()) ** 2
    if var <= 1e-28 * max(scale, 1e-300):
        return None
    sigma = math.sqrt(var)
    B /= sigma
    s = np.einsum("ij,ij->i", B, B)
    return OneMeanLift(mean, sigma, B, s, np.sqrt(s + s * s + 1.0))


def moment_errors(lifted: OneMeanLift, idx, u):
    """``(1 - sum u ||b||^2, ||sum u b||, 1 - sum u)`` for multipliers ``u`` on rows ``idx``."""
    u = np.asarray(u, dtype=np.float64)
    return (
        1.0 - float(u @ lifted.s[idx]),
        float(np.linalg.norm(u @ lifted.b[idx])),
        1.0 - float(u.sum()),
    )


def worst_case_error(e_s: float, rho: float, e_1: float) -> float:
    """Exact supremum over all centers of the relative cost error."""
    return float(np.abs(np.linalg.eigvalsh(np.array([[e_s, rho], [rho, e_1]]))).max())


def _check(points, epsilon):
    if not (isinstance(epsilon, (int, float)) and 0.0 < epsilon <= 1.0):
        raise BadEpsilon(f"epsilon must lie in (0, 1], got {epsilon!r}")
    A = as_sparse(points)
    if A.n_rows == 0:
        raise EmptyInput("no points")
    return A


def one_mean_coreset(points, epsilon: float, method: str = "fw", start="first") -> OneMeanCoreset:
    """Weighted subset whose 1-mean cost is within ``1 +- epsilon`` for every center.

    ``method="fw"`` runs at most ``ceil(4/eps^2) - 1`` Frank-Wolfe steps, so
    the coreset has at most ``4/eps^2`` points. ``method="exact"`` eliminates
    support with Caratheodory steps instead, matching all moments exactly
    with at most ``d + 3`` points.
    """
    A = _check(points, epsilon)
    n = A.n_rows
    lifted = lift(A)
    if lifted is None:
        return OneMeanCoreset([0], [float(n)], n, {"certificate": 0.0, "iterations": 0, "method": "degenerate"})

    z = lifted.target()
    if method == "exact":
        w = caratheodory_exact(lifted.unit_points(), z)
        u = lifted.multipliers(w)
        cert = worst_case_error(*moment_errors(lifted, w.indices, u))
        return OneMeanCoreset(w.indices, n * u, n, {"certificate": cert, "iterations": 0, "method": "exact"})
    if method != "fw":
        raise ValueError(f"unknown method {method!r}")

    budget = math.ceil(SIZE_CONSTANT / epsilon**2 - 1e-9) - 1
    L = lifted.avg_norm
    solver = FrankWolfe(VectorOracle(lifted.unit_points()), z, start=start)
    # running moments of sum u_i (b_i, s_i, 1), updated with each step
    j = solver.trace.start
    coef = L / lifted.q_norm[j]
    first, second, total = coef * lifted.b[j], coef * lifted.s[j], coef
    cert = worst_case_error(1.0 - second, float(np.linalg.norm(first)), 1.0 - total)
    while cert > epsilon and solver.trace.iterations < budget:
        if not solver.step():
            break
        j, a = solver.trace.selected_indices[-1], solver.trace.alphas[-1]
        coef = a * L / lifted.q_norm[j]
        first = (1.0 - a) * first + coef * lifted.b[j]
        second = (1.0 - a) * second + coef * lifted.s[j]
        total = (1.0 - a) * total + coef
        cert = worst_case_error(1.0 - second, float(np.linalg.norm(first)), 1.0 - total)

    w = solver.weights()
    u = lifted.multipliers(w)
    cert = worst_case_error(*moment_errors(lifted, w.indices, u))
    meta = {
        "certificate": cert,
        "iterations": solver.trace.iterations,
        "ifa_residual": solver.residual,
        "method": "fw",
    }
    return OneMeanCoreset(w.indices, n * u, n, meta)


def one_mean_costs(points, cs: OneMeanCoreset, centers):
    """Full and weighted costs ``sum ||a_i - c||^2`` for every center row."""
    A = np.asarray(as_sparse(points).to_dense())
    C = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if C.shape[1] != A.shape[1]:
        raise DimensionMismatch(f"centers have {C.shape[1]} columns, points have {A.shape[1]}")
    mean = A.mean(axis=0)
    spread = float(np.sum((A - mean) ** 2))
    full = spread + A.shape[0] * np.sum((C - mean) ** 2, axis=1)
    S = A[cs.indices]
    diff = S[None, :, :] - C[:, None, :]
    weighted = np.einsum("mkd,mkd,k->m", diff, diff, cs.weights)
    return full, weighted


def eval_one_mean(points, cs: OneMeanCoreset, centers) -> float:
    """Largest relative cost error over the given centers."""
    full, weighted = one_mean_costs(points, cs, centers)
    ok = full > 0
    if not ok.any():
        return 0.0
    return float(np.max(np.abs(full[ok] - weighted[ok]) / full[ok]))


def sample_centers(points, m: int, seed: int = 0) -> np.ndarray:
    """``m`` centers uniform in the bounding box inflated 2x, plus the origin and the mean."""
    A = np.asarray(as_sparse(points).to_dense())
    lo, hi = A.min(axis=0), A.max(axis=0)
    mid, half = (lo + hi) / 2, (hi - lo)  # half-width doubled
    rng = np.random.default_rng(seed)
    C = mid + half * rng.uniform(-1.0, 1.0, size=(m, A.shape[1]))
    return np.vstack([C, np.zeros(A.shape[1]), A.mean(axis=0)])
