"""File formats: Matrix Market coordinate files, NDJSON sparse rows, CSV.

Matrix Market indices are 1-based on disk and 0-based in memory. Only the
``matrix coordinate real general`` (and ``integer``) flavour is supported.
"""

from __future__ import annotations

import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InvalidMatrix
from .matrix import SparseMatrix

MM_HEADER = "%%MatrixMarket matrix coordinate real general"


@contextmanager
def atomic_write(path, mode="w"):
    """Write to a sibling temp file, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _open_mm(path):
    fh = open(path)
    header = fh.readline().strip()
    tokens = header.lower().split()
    if len(tokens) != 5 or tokens[0] != "%%matrixmarket":
        fh.close()
        raise InvalidMatrix(f"{path}: missing %%MatrixMarket header")
    _, obj, fmt, field, symm = tokens
    if obj != "matrix" or fmt != "coordinate" or field not in ("real", "integer") or symm != "general":
        fh.close()
        raise InvalidMatrix(f"{path}: unsupported Matrix Market flavour '{header}'")
    for line in fh:
        line = line.strip()
        if not line or line.startswith("%"):
            continue
        try:
            n, d, nnz = (int(t) for t in line.split())
        except ValueError:
            fh.close()
            raise InvalidMatrix(f"{path}: bad size line '{line}'") from None
        return fh, n, d, nnz
    fh.close()
    raise InvalidMatrix(f"{path}: missing size line")


def _entries(fh, path, n, d, nnz):
    count = 0
    for line in fh:
        line = line.strip()
        if not line or line.startswith("%"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise InvalidMatrix(f"{path}: bad entry line '{line}'")
        i, j, v = int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])
        if not (0 <= i < n and 0 <= j < d):
            raise InvalidMatrix(f"{path}: entry ({i + 1}, {j + 1}) outside {n}x{d}")
        count += 1
        yield i, j, v
    if count != nnz:
        raise InvalidMatrix(f"{path}: header announces {nnz} entries, found {count}")


def read_matrix_market(path) -> SparseMatrix:
    fh, n, d, nnz = _open_mm(path)
    with fh:
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        k = 0
        for k, (i, j, v) in enumerate(_entries(fh, path, n, d, nnz)):
            rows[k], cols[k], vals[k] = i, j, v
    return SparseMatrix.from_coo(rows, cols, vals, (n, d))


def matrix_market_shape(path):
    fh, n, d, nnz = _open_mm(path)
    fh.close()
    return n, d, nnz


def iter_matrix_market_rows(path):
    """Yield ``(cols, vals)`` for every row, in row order, reading the file once.

    Entries must be grouped by row with non-decreasing row index. Rows with no
    stored entries are yielded as empty pairs so that the k-th item is row k.
    """
    fh, n, d, nnz = _open_mm(path)
    with fh:
        current, cols, vals = 0, [], []
        for i, j, v in _entries(fh, path, n, d, nnz):
            if i < current:
                raise InvalidMatrix(f"{path}: entries not grouped by row (row {i + 1} after {current + 1})")
            while i > current:
                yield _row(cols, vals)
                current, cols, vals = current + 1, [], []
            cols.append(j)
            vals.append(v)
        while current < n:
            yield _row(cols, vals)
            current, cols, vals = current + 1, [], []


def _row(cols, vals):
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    order = np.argsort(cols, kind="stable")
    cols, vals = cols[order], vals[order]
    keep = vals != 0
    return cols[keep], vals[keep]


def write_matrix_market(path, A: SparseMatrix, comment: str | None = None):
    with atomic_write(path) as fh:
        fh.write(MM_HEADER + "\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{A.n_rows} {A.n_cols} {A.nnz}\n")
        for i in range(A.n_rows):
            cols, vals = A.row(i)
            for j, v in zip(cols, vals):
                fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def iter_ndjson_rows(path, n_cols: int):
    """Yield ``(cols, vals)`` from lines like ``{"cols": [...], "vals": [...]}``."""
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            cols = np.asarray(rec["cols"], dtype=np.int64)
            vals = np.asarray(rec["vals"], dtype=np.float64)
            if cols.shape != vals.shape:
                raise InvalidMatrix(f"{path}:{lineno}: cols and vals differ in length")
            if len(cols) and (cols.min() < 0 or cols.max() >= n_cols):
                raise DimensionMismatch(f"{path}:{lineno}: column index outside [0, {n_cols})")
            yield _row(cols, vals)


def write_ndjson_rows(path, A: SparseMatrix):
    with atomic_write(path) as fh:
        for cols, vals in A.iter_rows():
            fh.write(json.dumps({"cols": cols.tolist(), "vals": vals.tolist()}) + "\n")


def write_dense_csv(path, X: np.ndarray):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    with atomic_write(path) as fh:
        for row in X:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_dense_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))


def write_json(path, obj):
    with atomic_write(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
