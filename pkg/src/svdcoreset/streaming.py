"""One-pass merge-and-reduce over a row stream, and shard-parallel builds.

Rows are buffered into chunks; a full chunk is reduced to a coreset and
pushed into a binary counter of levels, level ``l`` summarizing ``2^l``
chunks. Two coresets on the same level are merged by stacking their already
weighted rows and reducing the stack again, so row multipliers compose
multiplicatively and always refer back to the original stream positions.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BadEpsilon, DimensionMismatch, EmptyMatrix, EmptyStream
from .ifa import FwTrace
from .matrix import SparseMatrix, as_sparse, vstack
from .svd_coreset import CoresetResult, svd_coreset

DEFAULT_CHUNK = 256


@dataclass(eq=False)
class Summary:
    """Weighted original rows: ``rows[t] = weights[t] * a[origin[t]]``."""

    rows: SparseMatrix
    origin: np.ndarray
    weights: np.ndarray
    residual: float = 0.0
    combined: float = 0.0
    trace: FwTrace | None = None
    exact: bool = False
    epsilon: float = 0.0

    @property
    def size(self) -> int:
        return self.rows.n_rows


def reduce_summary(s: Summary, k: int, epsilon: float, seed: int = 0, children=()) -> Summary:
    """Coreset of the stacked weighted rows of ``s``, mapped back to the originals."""
    base = max((c.combined for c in children), default=0.0)
    n, d = s.rows.shape
    if n <= k or k >= d or s.rows.nnz == 0:
        # nothing to gain: keep every row as is
        return Summary(s.rows, s.origin, s.weights, 0.0, base, s.trace, s.exact, epsilon)
    try:
        cs = svd_coreset(s.rows, k, epsilon, seed=seed)
    except EmptyMatrix:
        return Summary(s.rows, s.origin, s.weights, 0.0, base, s.trace, s.exact, epsilon)
    return Summary(
        rows=s.rows.take_rows(cs.indices, cs.row_weights),
        origin=s.origin[cs.indices],
        weights=s.weights[cs.indices] * cs.row_weights,
        residual=cs.epsilon_residual,
        combined=cs.epsilon_residual + base,
        trace=cs.trace,
        exact=cs.exact,
        epsilon=epsilon,
    )


def merge_summaries(parts) -> Summary:
    parts = list(parts)
    return Summary(
        rows=vstack([p.rows for p in parts]),
        origin=np.concatenate([p.origin for p in parts]),
        weights=np.concatenate([p.weights for p in parts]),
    )


def summary_to_result(s: Summary, k: int, epsilon: float, n_source: int, levels=()) -> CoresetResult:
    order = np.argsort(s.origin, kind="stable")
    trace = s.trace if s.trace is not None else FwTrace(start=int(s.origin[order[0]]) if s.size else 0)
    return CoresetResult(
        indices=s.origin[order],
        row_weights=s.weights[order],
        epsilon_target=epsilon,
        epsilon_residual=s.residual,
        k=k,
        trace=trace,
        n_source=n_source,
        exact=s.exact,
        meta={
            "combined_residual": float(s.combined),
            "level_residuals": [None if r is None else float(r) for r in levels],
            "leaf_epsilon": float(s.epsilon),
        },
    )


def leaf_epsilon(epsilon: float, expected_rows: int | None, chunk_size: int) -> float:
    """Per-reduction epsilon: ``epsilon / (2 * levels)`` for the expected tree height.

    With no row count announced, or a single chunk, the user's epsilon is
    used unchanged.
    """
    if not expected_rows or expected_rows <= chunk_size:
        return epsilon
    levels = math.ceil(math.log2(expected_rows / chunk_size)) + 1
    return epsilon / (2 * levels)


@dataclass(eq=False)
class StreamState:
    """Merge-and-reduce state. Single writer; feed rows through :meth:`insert`."""

    n_cols: int
    k: int
    epsilon: float
    chunk_size: int = DEFAULT_CHUNK
    epsilon_leaf: float | None = None
    seed: int = 0
    levels: list = field(default_factory=list)
    rows_seen: int = 0
    peak_rows: int = 0
    _buf_cols: list = field(default_factory=list, repr=False)
    _buf_vals: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise BadEpsilon(f"epsilon must lie in (0, 1], got {self.epsilon!r}")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        if self.epsilon_leaf is None:
            self.epsilon_leaf = self.epsilon

    @property
    def buffered(self) -> int:
        return len(self._buf_cols)

    def retained_rows(self, extra: int = 0) -> int:
        return self.buffered + sum(s.size for s in self.levels if s is not None) + extra

    def _note(self, extra: int = 0):
        self.peak_rows = max(self.peak_rows, self.retained_rows(extra))

    def insert(self, cols, vals) -> "StreamState":
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if cols.shape != vals.shape:
            raise DimensionMismatch("cols and vals differ in length")
        if len(cols) and (cols.min() < 0 or cols.max() >= self.n_cols):
            raise DimensionMismatch(f"column index outside [0, {self.n_cols})")
        self._buf_cols.append(cols)
        self._buf_vals.append(vals)
        self.rows_seen += 1
        self._note()
        if self.buffered >= self.chunk_size:
            self._flush()
        return self

    def _take_buffer(self) -> Summary:
        start = self.rows_seen - self.buffered
        rows = SparseMatrix.from_rows(zip(self._buf_cols, self._buf_vals), self.n_cols)
        self._buf_cols, self._buf_vals = [], []
        return Summary(rows, np.arange(start, start + rows.n_rows), np.ones(rows.n_rows))

    def _reduce(self, s: Summary, children=()) -> Summary:
        return reduce_summary(s, self.k, self.epsilon_leaf, self.seed, children)

    def _flush(self):
        carry = self._reduce(self._take_buffer())
        self.push(carry)

    def push(self, carry: Summary, level: int = 0):
        """Add a reduced summary at ``level`` and propagate binary carries."""
        self._note(carry.size)
        while True:
            if level == len(self.levels):
                self.levels.append(None)
            held = self.levels[level]
            if held is None:
                self.levels[level] = carry
                return
            self.levels[level] = None
            merged = merge_summaries([held, carry])
            self._note(merged.size)
            carry = self._reduce(merged, children=(held, carry))
            level += 1

    def occupied(self) -> int:
        return sum(s is not None for s in self.levels)

    def finalize(self) -> CoresetResult:
        if self.rows_seen == 0:
            raise EmptyStream("no rows were inserted")
        pieces = []
        if self.buffered:
            pieces.append(self._reduce(self._take_buffer()))
        pieces.extend(s for s in self.levels if s is not None)
        level_res = [None if s is None else s.residual for s in self.levels]
        if len(pieces) == 1:
            final = pieces[0]
        else:
            final = self._reduce(merge_summaries(pieces), children=pieces)
        return summary_to_result(final, self.k, self.epsilon, self.rows_seen, level_res)


def stream_insert(state: StreamState, cols, vals) -> StreamState:
    return state.insert(cols, vals)


def stream_finalize(state: StreamState) -> CoresetResult:
    return state.finalize()


def stream_rows(rows, n_cols: int, k: int, epsilon: float, chunk_size: int = DEFAULT_CHUNK,
                epsilon_leaf: float | None = None, seed: int = 0):
    """Feed an iterable of ``(cols, vals)`` rows; return ``(result, state)``."""
    state = StreamState(n_cols, k, epsilon, chunk_size, epsilon_leaf, seed)
    for cols, vals in rows:
        state.insert(cols, vals)
    return state.finalize(), state


def shard_bounds(n: int, n_shards: int):
    edges = np.linspace(0, n, n_shards + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _shard_summary(A: SparseMatrix, lo: int, hi: int, k, epsilon, seed) -> Summary:
    rows = A.take_rows(np.arange(lo, hi))
    return reduce_summary(Summary(rows, np.arange(lo, hi), np.ones(hi - lo)), k, epsilon, seed)


def merge_tree(summaries, k: int, epsilon: float, seed: int = 0) -> Summary:
    """Canonical binary merge of shard summaries in shard order."""
    layer = list(summaries)
    while len(layer) > 1:
        nxt = []
        for i in range(0, len(layer) - 1, 2):
            pair = (layer[i], layer[i + 1])
            nxt.append(reduce_summary(merge_summaries(pair), k, epsilon, seed, children=pair))
        if len(layer) % 2:
            nxt.append(layer[-1])
        layer = nxt
    return layer[0]


def parallel_build(A, k: int, epsilon: float, n_workers: int = 1, seed: int = 0,
                   n_shards: int | None = None, epsilon_leaf: float | None = None) -> CoresetResult:
    """Shard rows, build shard coresets concurrently, merge deterministically.

    ``n_shards`` defaults to ``n_workers``; the result depends only on the shard
    boundaries, never on scheduling. One shard is exactly :func:`svd_coreset`.
    """
    A = as_sparse(A)
    if n_workers < 1:
        raise ValueError("n_workers must be >= 1")
    if not 0.0 < epsilon <= 1.0:
        raise BadEpsilon(f"epsilon must lie in (0, 1], got {epsilon!r}")
    n_shards = n_shards or n_workers
    if n_shards == 1:
        return svd_coreset(A, k, epsilon, seed=seed)
    eps_leaf = epsilon if epsilon_leaf is None else epsilon_leaf
    bounds = shard_bounds(A.n_rows, n_shards)
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        futures = [pool.submit(_shard_summary, A, lo, hi, k, eps_leaf, seed) for lo, hi in bounds]
        shards = [f.result() for f in futures]
    final = merge_tree(shards, k, eps_leaf, seed)
    return summary_to_result(final, k, epsilon, A.n_rows, [s.residual for s in shards])


def sequential_build(A, k: int, epsilon: float, n_shards: int, seed: int = 0,
                     epsilon_leaf: float | None = None) -> CoresetResult:
    """Same shards and merge order as :func:`parallel_build`, on one thread."""
    A = as_sparse(A)
    if n_shards == 1:
        return svd_coreset(A, k, epsilon, seed=seed)
    eps_leaf = epsilon if epsilon_leaf is None else epsilon_leaf
    shards = [_shard_summary(A, lo, hi, k, eps_leaf, seed) for lo, hi in shard_bounds(A.n_rows, n_shards)]
    final = merge_tree(shards, k, eps_leaf, seed)
    return summary_to_result(final, k, epsilon, A.n_rows, [s.residual for s in shards])
