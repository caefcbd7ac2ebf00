import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svdcoreset.errors import BadEpsilon, DimensionMismatch, EmptyInput
from svdcoreset.onemean import (
    OneMeanCoreset,
    eval_one_mean,
    lift,
    moment_errors,
    one_mean_coreset,
    one_mean_costs,
    sample_centers,
    worst_case_error,
)


def direct_costs(A, idx, w, c):
    full = np.sum((A - c) ** 2)
    weighted = np.sum(w * np.sum((A[idx] - c) ** 2, axis=1))
    return full, weighted


@pytest.fixture(scope="module")
def cloud():
    return np.random.default_rng(7).standard_normal((1000, 30)) * np.linspace(0.5, 2.0, 30) + 3.0


class TestExamples:
    def test_single_point(self):
        cs = one_mean_coreset([[1.0, -2.0, 0.5]], 0.2)
        assert list(cs.indices) == [0]
        assert cs.weights[0] == pytest.approx(1.0)
        C = np.random.default_rng(0).standard_normal((20, 3))
        assert eval_one_mean([[1.0, -2.0, 0.5]], cs, C) == 0.0

    def test_identical_points(self):
        A = np.tile([[2.0, 0.0, -1.0]], (17, 1))
        cs = one_mean_coreset(A, 0.1)
        assert cs.size == 1 and cs.weights[0] == 17.0
        C = np.random.default_rng(1).standard_normal((50, 3))
        assert eval_one_mean(A, cs, C) <= 1e-12

    def test_random_instance(self, cloud):
        cs = one_mean_coreset(cloud, 0.2)
        assert cs.size <= 100
        centers = sample_centers(cloud, 200, seed=0)
        assert eval_one_mean(cloud, cs, centers) <= 0.2
        assert cs.meta["certificate"] <= 0.2

    def test_trivial_coreset(self, cloud):
        cs = OneMeanCoreset(np.arange(1000), np.ones(1000), 1000)
        assert eval_one_mean(cloud, cs, sample_centers(cloud, 20)) <= 1e-12

    def test_costs_match_direct_sums(self, cloud):
        cs = one_mean_coreset(cloud, 0.3)
        centers = sample_centers(cloud, 5, seed=3)
        full, weighted = one_mean_costs(cloud, cs, centers)
        for m, c in enumerate(centers):
            f, w = direct_costs(cloud, cs.indices, cs.weights, c)
            assert full[m] == pytest.approx(f, rel=1e-10)
            assert weighted[m] == pytest.approx(w, rel=1e-10)


class TestErrors:
    @pytest.mark.parametrize("eps", [0.0, 1.01, -1.0])
    def test_bad_epsilon(self, eps):
        with pytest.raises(BadEpsilon):
            one_mean_coreset([[1.0]], eps)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            one_mean_coreset(np.zeros((0, 3)), 0.1)

    def test_center_dims(self, cloud):
        cs = one_mean_coreset(cloud, 0.5)
        with pytest.raises(DimensionMismatch):
            eval_one_mean(cloud, cs, np.zeros((2, 29)))

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            one_mean_coreset([[1.0], [2.0]], 0.5, method="magic")


class TestCertificate:
    def test_is_attained_along_worst_ray(self, cloud):
        # sweep centers m + sigma * x * dir over a wide range of x (both signs)
        cs = one_mean_coreset(cloud, 0.3)
        L = lift(cloud)
        u = cs.weights / cs.n_source
        e_s, rho, e_1 = moment_errors(L, cs.indices, u)
        cert = worst_case_error(e_s, rho, e_1)
        g = u @ L.b[cs.indices]
        direction = g / np.linalg.norm(g)
        xs = np.concatenate([-np.logspace(-4, 4, 4001), [0.0], np.logspace(-4, 4, 4001)])
        centers = L.mean + L.sigma * xs[:, None] * direction
        sweep = eval_one_mean(cloud, cs, centers)
        assert sweep <= cert + 1e-9
        assert sweep >= cert * (1 - 1e-4)

    def test_random_centers_below_certificate(self, cloud):
        cs = one_mean_coreset(cloud, 0.25)
        C = np.random.default_rng(4).standard_normal((300, 30)) * 50
        assert eval_one_mean(cloud, cs, C) <= cs.meta["certificate"] + 1e-12

    def test_decomposition(self, cloud):
        cs = one_mean_coreset(cloud, 0.2)
        S, w = cloud[cs.indices], cs.weights
        n = cloud.shape[0]
        for c in sample_centers(cloud, 10, seed=2):
            lhs = np.sum(w * np.sum((S - c) ** 2, axis=1))
            rhs = w @ np.sum(S**2, axis=1) - 2 * c @ (w @ S) + w.sum() * c @ c
            assert lhs == pytest.approx(rhs, rel=1e-9)
        # moments of the centered, normalized cloud are each within the certificate
        L = lift(cloud)
        e_s, rho, e_1 = moment_errors(L, cs.indices, w / n)
        cert = cs.meta["certificate"]
        assert max(abs(e_s), rho, abs(e_1)) <= cert + 1e-12


class TestExact:
    def test_moments_match(self, cloud):
        cs = one_mean_coreset(cloud, 0.2, method="exact")
        assert cs.size <= 30 + 3
        C = np.vstack([sample_centers(cloud, 100, seed=1), np.random.default_rng(0).standard_normal((50, 30)) * 1e3])
        assert eval_one_mean(cloud, cs, C) <= 1e-8


class TestProperties:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(2, 200), st.integers(1, 6), st.sampled_from([0.1, 0.3, 0.6, 1.0]), st.integers(0, 10_000))
    def test_guarantee(self, n, d, eps, seed):
        A = np.random.default_rng(seed).standard_normal((n, d)) * 3 + 1
        cs = one_mean_coreset(A, eps)
        assert cs.size <= int(np.ceil(4 / eps**2))
        assert np.all(cs.weights > 0) and np.all(np.diff(cs.indices) > 0)
        centers = sample_centers(A, 50, seed=seed)
        assert eval_one_mean(A, cs, centers) <= eps + 1e-12

    def test_json(self, cloud):
        cs = one_mean_coreset(cloud, 0.5)
        d = json.loads(cs.to_json())
        assert set(d) >= {"indices", "weights", "n_source"}
        back = OneMeanCoreset.from_dict(d)
        np.testing.assert_array_equal(back.weights, cs.weights)
