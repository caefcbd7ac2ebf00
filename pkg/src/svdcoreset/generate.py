"""Synthetic sparse low-rank-plus-noise matrices for tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .errors import InvalidDims
from .matrix import SparseMatrix


def low_rank_sparse(
    n: int,
    d: int,
    rank: int,
    noise: float = 0.01,
    seed: int = 0,
    factor_density: float = 0.3,
    factors_per_row: int = 2,
    noise_cols: int = 2,
    row_nnz: int | None = None,
) -> SparseMatrix:
    """Sparse ``n x d`` matrix: rank-``rank`` signal plus relative ``noise``.

    The signal is ``L @ R`` with ``R`` a sparse Gaussian ``rank x d`` factor
    (``factor_density`` of its entries nonzero) and each row of ``L`` mixing
    ``factors_per_row`` random factors. Noise with standard deviation ``noise``
    times the RMS signal entry is added on every stored entry of a row and on
    ``noise_cols`` extra random columns, which makes the matrix full rank.
    ``row_nnz`` caps the number of stored entries per row.
    """
    if not (1 <= rank <= min(n, d)):
        raise InvalidDims(f"rank {rank} outside [1, {min(n, d)}]")
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((rank, d)) * (rng.random((rank, d)) < factor_density)
    # every factor needs at least one entry
    for f in range(rank):
        if not R[f].any():
            R[f, rng.integers(d)] = rng.standard_normal()
    per_row = min(factors_per_row, rank)

    signal = np.zeros((n, d))
    for i in range(n):
        f = rng.choice(rank, size=per_row, replace=False)
        signal[i] = rng.standard_normal(per_row) @ R[f]
    rms = np.sqrt(np.mean(signal[signal != 0] ** 2)) if signal.any() else 1.0

    rows, cols, vals = [], [], []
    for i in range(n):
        support = np.flatnonzero(signal[i])
        extra = rng.choice(d, size=min(noise_cols, d), replace=False)
        support = np.union1d(support, extra)
        if row_nnz is not None and len(support) > row_nnz:
            support = np.sort(rng.choice(support, size=row_nnz, replace=False))
        v = signal[i, support] + noise * rms * rng.standard_normal(len(support))
        rows.append(np.full(len(support), i))
        cols.append(support)
        vals.append(v)
    return SparseMatrix.from_coo(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (n, d))
