"""Sparse row storage, thin SVD and squared-distance primitives.

Dense matrices are plain 2-D ``float64`` numpy arrays. Sparse matrices are
:class:`SparseMatrix`, an immutable compressed-row container that keeps the
canonical form (sorted column indices, no explicit zeros) and hands out a
``scipy.sparse`` view for arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.linalg import null_space
from scipy.sparse.linalg import svds

from .errors import (
    DimensionMismatch,
    EmptyMatrix,
    InvalidDims,
    InvalidMatrix,
    NotOrthonormal,
)

ORTHO_TOL = 1e-8
DENSE_SVD_LIMIT = 10**6


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Compressed-row ``n_rows x n_cols`` real matrix.

    Construct through :meth:`from_dense`, :meth:`from_coo`, :meth:`from_rows`
    or :meth:`from_scipy`; the raw constructor validates but does not
    canonicalize.
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _check: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "row_offsets", _frozen(self.row_offsets, np.int64))
        object.__setattr__(self, "col_indices", _frozen(self.col_indices, np.int64))
        object.__setattr__(self, "values", _frozen(self.values, np.float64))
        if self._check:
            self._validate()

    def _validate(self):
        off, cols, vals = self.row_offsets, self.col_indices, self.values
        if self.n_rows < 0 or self.n_cols < 0:
            raise InvalidMatrix("negative shape")
        if off.shape != (self.n_rows + 1,):
            raise InvalidMatrix("row_offsets must have length n_rows + 1")
        if off[0] != 0 or off[-1] != len(vals) or len(cols) != len(vals):
            raise InvalidMatrix("row_offsets inconsistent with stored entries")
        if np.any(np.diff(off) < 0):
            raise InvalidMatrix("row_offsets must be non-decreasing")
        if len(cols) and (cols.min() < 0 or cols.max() >= self.n_cols):
            raise InvalidMatrix("column index out of range")
        if np.any(vals == 0):
            raise InvalidMatrix("explicit zeros are not allowed")
        if not np.all(np.isfinite(vals)):
            raise InvalidMatrix("non-finite value")
        # strictly increasing columns inside each row
        if len(cols) > 1:
            step = np.diff(cols)
            row_start = np.zeros(len(cols), dtype=bool)
            row_start[off[1:-1][off[1:-1] < len(cols)]] = True
            if np.any((step <= 0) & ~row_start[1:]):
                raise InvalidMatrix("column indices must increase within a row")

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_scipy(cls, m) -> "SparseMatrix":
        csr = sp.csr_array(m, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        n, d = csr.shape
        return cls(n, d, csr.indptr, csr.indices, csr.data)

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        if a.ndim != 2:
            raise InvalidMatrix("expected a 2-D array")
        return cls.from_scipy(sp.csr_array(a))

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> "SparseMatrix":
        """Build from 0-based triplets; duplicates are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        n, d = shape
        if len(rows) and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= d):
            raise InvalidMatrix("triplet index out of range")
        return cls.from_scipy(sp.coo_array((np.asarray(vals, dtype=np.float64), (rows, cols)), shape=shape))

    @classmethod
    def from_rows(cls, rows, n_cols: int) -> "SparseMatrix":
        """Build from an iterable of ``(cols, vals)`` pairs, one per row."""
        r, c, v = [], [], []
        n = 0
        for i, (cols, vals) in enumerate(rows):
            cols = np.asarray(cols, dtype=np.int64)
            vals = np.asarray(vals, dtype=np.float64)
            if cols.shape != vals.shape:
                raise InvalidMatrix(f"row {i}: cols and vals differ in length")
            r.append(np.full(len(cols), i, dtype=np.int64))
            c.append(cols)
            v.append(vals)
            n = i + 1
        if n == 0:
            return cls(0, n_cols, np.zeros(1), np.zeros(0), np.zeros(0))
        return cls.from_coo(np.concatenate(r), np.concatenate(c), np.concatenate(v), (n, n_cols))

    # -- views --------------------------------------------------------------

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    @cached_property
    def csr(self) -> sp.csr_array:
        return sp.csr_array(
            (self.values, self.col_indices, self.row_offsets), shape=self.shape, copy=False
        )

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def row(self, i: int):
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def iter_rows(self):
        for i in range(self.n_rows):
            yield self.row(i)

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def frobenius_sq(self) -> float:
        return float(np.dot(self.values, self.values))

    def row_norms_sq(self) -> np.ndarray:
        return np.asarray(self.csr.power(2).sum(axis=1), dtype=np.float64).ravel()

    def take_rows(self, indices, scale=None) -> "SparseMatrix":
        """Rows ``indices`` (in that order), each optionally multiplied by ``scale``."""
        idx = np.asarray(indices, dtype=np.int64)
        sub = self.csr[idx]
        if scale is not None:
            sub = sp.diags_array(np.asarray(scale, dtype=np.float64)) @ sub
        return SparseMatrix.from_scipy(sub)

    def __matmul__(self, other):
        return self.csr @ other

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def vstack(blocks) -> SparseMatrix:
    blocks = list(blocks)
    if not blocks:
        raise EmptyMatrix("nothing to stack")
    d = {b.n_cols for b in blocks}
    if len(d) != 1:
        raise DimensionMismatch(f"column counts differ: {sorted(d)}")
    return SparseMatrix.from_scipy(sp.vstack([b.csr for b in blocks], format="csr"))


def as_sparse(a) -> SparseMatrix:
    if isinstance(a, SparseMatrix):
        return a
    if sp.issparse(a):
        return SparseMatrix.from_scipy(a)
    return SparseMatrix.from_dense(a)


# -- SVD -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SvdFactors:
    """Thin SVD ``A ~= U @ diag(sigma) @ Vt`` with sigma non-increasing."""

    U: np.ndarray
    sigma: np.ndarray
    Vt: np.ndarray

    @property
    def r(self) -> int:
        return len(self.sigma)

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.Vt


def _fix_signs(U, s, Vt):
    # largest-magnitude entry of every right singular vector is made positive
    pivot = np.argmax(np.abs(Vt), axis=1)
    sign = np.sign(Vt[np.arange(len(s)), pivot])
    sign[sign == 0] = 1.0
    return U * sign, s, Vt * sign[:, None]


def thin_svd(A, rank_cap: int | None = None, seed: int = 0) -> SvdFactors:
    """Rank-truncated thin SVD of a sparse matrix.

    Factors are truncated to ``min(numerical_rank, rank_cap)`` components.
    Small problems (``n*d <= 1e6``) or full-rank requests are solved densely
    with LAPACK; otherwise ARPACK's Lanczos iteration is used with a
    seed-derived start vector.
    """
    A = as_sparse(A)
    n, d = A.shape
    if n == 0 or d == 0 or A.nnz == 0:
        raise EmptyMatrix("matrix has no rows or no nonzero values")
    full = min(n, d)
    if rank_cap is None:
        rank_cap = full
    if not 1 <= rank_cap <= full:
        raise InvalidDims(f"rank_cap={rank_cap} outside [1, {full}]")

    if n * d <= DENSE_SVD_LIMIT or rank_cap >= full:
        U, s, Vt = np.linalg.svd(A.to_dense(), full_matrices=False)
    else:
        v0 = np.random.default_rng(seed).standard_normal(full)
        U, s, Vt = svds(A.csr, k=rank_cap, v0=v0, solver="arpack")
        order = np.argsort(s)[::-1]
        U, s, Vt = U[:, order], s[order], Vt[order]

    tol = s[0] * max(n, d) * np.finfo(np.float64).eps
    r = min(int(np.sum(s > tol)), rank_cap)
    U, s, Vt = _fix_signs(U[:, :r], s[:r], Vt[:r])
    return SvdFactors(np.ascontiguousarray(U), s.copy(), np.ascontiguousarray(Vt))


def complete_basis(Vt: np.ndarray, d: int) -> np.ndarray:
    """Extend the orthonormal rows of ``Vt`` to a ``d x d`` orthogonal matrix.

    The first ``len(Vt)`` columns of the result are ``Vt.T``.
    """
    if Vt.shape[0] == d:
        return Vt.T.copy()
    return np.hstack([Vt.T, null_space(Vt)])


# -- distances -----------------------------------------------------------------


def check_orthonormal(X: np.ndarray, tol: float = ORTHO_TOL):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise NotOrthonormal("expected a 2-D basis")
    err = np.abs(X.T @ X - np.eye(X.shape[1])).max() if X.size else 0.0
    if err > tol:
        raise NotOrthonormal(f"X^T X deviates from identity by {err:.3g}")
    return X


def sum_sq_dist(A, X: np.ndarray) -> float:
    """Sum over rows of ``||a_i X||^2``.

    With the columns of ``X`` an orthonormal basis of the orthogonal complement
    of a subspace S, this is the sum of squared distances from the rows to S.
    """
    X = np.asarray(X, dtype=np.float64)
    d = A.shape[1]
    if X.ndim != 2 or X.shape[0] != d:
        raise DimensionMismatch(f"X has shape {X.shape}, expected ({d}, m)")
    check_orthonormal(X)
    AX = A @ X
    return float(np.sum(AX * AX))


def random_orthonormal(d: int, m: int, seed: int) -> np.ndarray:
    """Haar-distributed ``d x m`` matrix with orthonormal columns."""
    if not 1 <= m <= d:
        raise InvalidDims(f"need 1 <= m <= d, got d={d}, m={m}")
    g = np.random.default_rng(seed).standard_normal((d, m))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))
