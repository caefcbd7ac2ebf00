"""Acceptance criteria AC-1 .. AC-8.

Each test prints one ``AC-n PASS|FAIL: ...`` line; the lines are repeated in
the pytest terminal summary. Run standalone with ``python tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from conftest import record_acceptance
from svdcoreset.evaluation import brute_force_2d, cost_ratio, evaluate, optimal_cost_comparison
from svdcoreset.ifa import VectorOracle, caratheodory_exact, frank_wolfe
from svdcoreset.matrix import thin_svd
from svdcoreset.onemean import eval_one_mean, one_mean_coreset, sample_centers
from svdcoreset.streaming import stream_rows
from svdcoreset.svd_coreset import build_lifted, svd_coreset

pytestmark = pytest.mark.acceptance


def check(name, ok, detail):
    record_acceptance(name, bool(ok), detail)
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def batch(reference_matrix):
    t0 = time.perf_counter()
    cs = svd_coreset(reference_matrix, 5, 0.25)
    rep = evaluate(reference_matrix, cs, n_queries=100, seed=0)
    opt, got = optimal_cost_comparison(reference_matrix, cs, 5)
    return cs, rep, cost_ratio(opt, got), time.perf_counter() - t0


def test_ac1_frank_wolfe_sparsity():
    worst_res, worst_support, worst_time = 0.0, 0, 0.0
    for seed in range(10):
        P = np.random.default_rng(seed).standard_normal((500, 20))
        P /= np.linalg.norm(P, axis=1, keepdims=True)
        z = np.full(500, 1 / 500)
        t0 = time.perf_counter()
        w, _ = frank_wolfe(VectorOracle(P), z, epsilon=0.1, max_iter=100)
        worst_time = max(worst_time, time.perf_counter() - t0)
        # residual measured on the explicit vectors, not the solver's bookkeeping
        worst_res = max(worst_res, float(np.linalg.norm((z - w.to_dense()) @ P)))
        worst_support = max(worst_support, w.support_size)
    ok = worst_res <= 0.1 and worst_support <= 101 and worst_time < 2.0
    check("AC-1", ok, f"max residual {worst_res:.4f} <= 0.1, max support {worst_support} <= 101, "
                      f"slowest seed {worst_time:.3f}s < 2s")


def test_ac2_caratheodory():
    t0 = time.perf_counter()
    worst_rel, worst_support = 0.0, 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        P = rng.standard_normal((100, 10))
        z = rng.dirichlet(np.ones(100))
        w = caratheodory_exact(P, z)
        mu = z @ P
        worst_rel = max(worst_rel, float(np.linalg.norm(w.to_dense() @ P - mu) / np.linalg.norm(mu)))
        worst_support = max(worst_support, w.support_size)
    elapsed = time.perf_counter() - t0
    ok = worst_support <= 11 and worst_rel <= 1e-9 and elapsed < 1.0
    check("AC-2", ok, f"max support {worst_support} <= 11, max relative residual {worst_rel:.2e} <= 1e-9, "
                      f"total {elapsed:.3f}s < 1s")


def test_ac3_one_mean():
    A = np.random.default_rng(3).standard_normal((1000, 30)) * np.linspace(0.5, 2.0, 30) + 1.0
    t0 = time.perf_counter()
    cs = one_mean_coreset(A, 0.2)
    elapsed = time.perf_counter() - t0
    err = eval_one_mean(A, cs, sample_centers(A, 200, seed=0))
    ok = err <= 0.2 and cs.size <= 100 and elapsed < 5.0
    check("AC-3", ok, f"max error {err:.4f} <= 0.2 over 202 centers, size {cs.size} <= 100, {elapsed:.3f}s < 5s")


def test_ac4_svd_coreset(batch):
    cs, rep, ratio, elapsed = batch
    bound = 5 * cs.epsilon_residual
    size_cap = math.ceil(5 / 0.25**2) + 1
    ok = (
        cs.size <= size_cap
        and rep.n_queries == 100
        and rep.n_degenerate == 0
        and rep.max_rel_error <= bound
        and 1.0 <= ratio <= 1.0 + bound
        and elapsed < 60.0
    )
    check("AC-4", ok, f"size {cs.size} <= {size_cap}, max error {rep.max_rel_error:.4f} <= {bound:.4f} "
                      f"(100 random + 2 extreme), cost ratio {ratio:.6f} in [1, {1 + bound:.4f}], "
                      f"{elapsed:.2f}s < 60s")


def test_ac5_exhaustive_2d():
    A = np.random.default_rng(5).standard_normal((200, 2)) @ np.array([[2.0, 0.3], [0.0, 0.7]])
    t0 = time.perf_counter()
    cs = svd_coreset(A, 1, 0.3)
    err = brute_force_2d(A, cs, grid=3600)
    elapsed = time.perf_counter() - t0
    bound = 5 * cs.epsilon_residual
    ok = err <= bound and elapsed < 5.0
    check("AC-5", ok, f"sweep max error {err:.4f} <= {bound:.4f}, {elapsed:.3f}s < 5s")


def test_ac6_kernel_fidelity():
    n, k = 200, 2
    A = np.random.default_rng(6).standard_normal((n, 20))
    cs = svd_coreset(A, k, 0.1)
    L = build_lifted(thin_svd(A), k, 1 / math.sqrt(n))
    outer = np.einsum("ia,ib->iab", L.X, L.X)
    z = L.target()
    worst = 0.0
    for t, r in enumerate(cs.trace.residual_norm_per_iter):
        explicit = float(np.linalg.norm(np.tensordot(z - cs.trace.weights_at(n, t), outer, axes=1)))
        worst = max(worst, abs(r - explicit) / explicit)
    iters = cs.trace.iterations
    check("AC-6", worst <= 1e-8 and iters > 0,
          f"{iters} iterations, max relative deviation {worst:.2e} <= 1e-8")


def test_ac7_streaming(reference_matrix, batch):
    _, batch_rep, _, _ = batch
    cs, state = stream_rows(reference_matrix.iter_rows(), 100, 5, 0.25, chunk_size=256)
    rep = evaluate(reference_matrix, cs, n_queries=100, seed=0)
    mem_cap = 256 + math.ceil(math.log2(2000 / 256) + 1) * 81
    ok = rep.max_rel_error <= 2 * batch_rep.max_rel_error and state.peak_rows <= mem_cap
    check("AC-7", ok, f"stream max error {rep.max_rel_error:.4f} <= 2 x {batch_rep.max_rel_error:.4f}, "
                      f"peak rows {state.peak_rows} <= {mem_cap}")


def test_ac8_sparsity_determinism(reference_matrix, batch):
    A = reference_matrix
    cs = batch[0]
    C = cs.weighted_rows(A)
    row_nnz = A.row_nnz()
    cap = cs.size / A.n_rows * (row_nnz.max() / row_nnz.mean())
    ratio = C.nnz / A.nnz
    subset = all(
        set(C.row(t)[0]) <= set(A.row(i)[0]) for t, i in enumerate(cs.indices)
    )
    same = svd_coreset(A, 5, 0.25, seed=0).to_json() == svd_coreset(A, 5, 0.25, seed=0).to_json()
    ok = ratio <= cap and subset and same
    check("AC-8", ok, f"nnz ratio {ratio:.4f} <= {cap:.4f}, patterns subset={subset}, byte-identical JSON={same}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
