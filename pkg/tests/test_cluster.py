import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from labeltree.cluster import (SplitConfig, combined_split, fano_partition, node_frequency,
                               solve_alpha_lp, split_objective, update_centroids)
from labeltree.freq import InterpolationParams
from oracles import brute_force_balanced_2means, lp_vertex_oracle


class TestAlphaLP:
    def test_fractional_entry(self):
        beta, f = [4, 0.35, -1], [0.4, 0.35, 0.25]
        alpha = solve_alpha_lp(beta, f)
        np.testing.assert_allclose(alpha, [1, -3 / 7, -1], atol=1e-15)
        best, _ = lp_vertex_oracle(beta, f)
        assert abs(np.dot(beta, alpha) - best) < 1e-12

    def test_fractional_entry_lands_on_bound(self):
        alpha = solve_alpha_lp([3, 1, -2], [0.5, 0.25, 0.25])
        assert alpha.tolist() == [1, -1, -1]

    def test_symmetric_tie(self):
        assert solve_alpha_lp([1, 1], [0.5, 0.5]).tolist() == [1, -1]

    def test_massless_labels_follow_beta_sign(self):
        alpha = solve_alpha_lp([2.0, -1.0, 0.5, 0.0], [0.0, 0.0, 1.0, 0.0])
        assert alpha[0] == 1 and alpha[1] == -1 and alpha[3] == -1
        assert abs(np.dot(alpha, [0, 0, 1, 0])) == 0

    def test_errors(self):
        with pytest.raises(ValueError):
            solve_alpha_lp([1, 2], [0.5, 0.3, 0.2])
        with pytest.raises(ValueError):
            solve_alpha_lp([1, 2], [0.0, 0.0])
        with pytest.raises(ValueError):
            solve_alpha_lp([1, 2], [-0.5, 1.5])


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2 ** 32 - 1))
def test_lp_matches_oracles(n, seed):
    rng = np.random.default_rng(seed)
    beta = rng.uniform(-5, 5, n)
    f = rng.random(n) + 1e-3
    f /= f.sum()
    alpha = solve_alpha_lp(beta, f)
    best, _ = lp_vertex_oracle(beta, f)
    assert abs(np.dot(beta, alpha) - best) < 1e-9
    assert abs(np.dot(alpha, f)) < 1e-12
    assert np.all(np.abs(alpha) <= 1)
    assert np.sum(np.abs(alpha) < 1) <= 1
    # second, unrelated reference: a general-purpose LP solver
    res = linprog(-beta, A_eq=f[None, :], b_eq=[0.0], bounds=[(-1, 1)] * n, method="highs")
    assert abs(-res.fun - best) < 1e-7
    # positive rescaling of beta keeps the assignment
    np.testing.assert_array_equal(solve_alpha_lp(beta * 3.7, f), alpha)


class TestFano:
    def test_four_labels(self):
        assert fano_partition([0.4, 0.3, 0.2, 0.1]).tolist() == [1, 1, -1, -1]

    def test_threshold_is_inclusive(self):
        assert fano_partition([0.5, 0.25, 0.25]).tolist() == [1, -1, -1]

    def test_symmetric(self):
        assert fano_partition([0.5, 0.5]).tolist() == [1, -1]

    def test_unsorted_input_and_dominant_label(self):
        assert fano_partition([0.1, 0.9, 0.0]).tolist() == [-1, 1, -1]

    def test_right_side_never_empty(self):
        alpha = fano_partition([0.3, 0.3, 0.4 - 1e-17])
        assert (alpha < 0).any() and (alpha > 0).any()


class TestCentroids:
    V = sp.csr_matrix(np.eye(2))

    def test_singletons(self):
        mp, mm = update_centroids([1, -1], [0.5, 0.5], self.V)
        np.testing.assert_allclose(mp, [1, 0])
        np.testing.assert_allclose(mm, [0, 1])

    def test_weighted_center(self):
        mp, _ = update_centroids([1, 1], [0.75, 0.25], self.V)
        np.testing.assert_allclose(mp, [0.9486832980505138, 0.31622776601683794], rtol=1e-12)

    def test_empty_side_keeps_previous(self):
        prev = np.array([0.6, 0.8])
        mp, mm = update_centroids([-1, -1], [0.5, 0.5], self.V, prev_plus=prev)
        assert mp is prev
        np.testing.assert_allclose(mm, [2 ** -0.5, 2 ** -0.5])


def _random_node(rng, n, d=5):
    V = rng.standard_normal((n, d)) * (rng.random((n, d)) < 0.7)
    norms = np.linalg.norm(V, axis=1, keepdims=True)
    V = np.divide(V, norms, out=np.zeros_like(V), where=norms > 0)
    f = rng.random(n) ** 3
    ft = f * (rng.random(n) < 0.6)
    return sp.csr_matrix(V), f / f.sum(), (ft / ft.sum() if ft.sum() else ft)


class TestCombinedSplit:
    def test_two_clear_groups(self):
        V = np.array([[1.0, 0], [1.0, 0], [0, 1.0], [0, 1.0]])
        best, mask = brute_force_balanced_2means(V)
        assert sorted([mask.tolist(), (~mask).tolist()]) == [[False, False, True, True],
                                                             [True, True, False, False]]
        f = np.full(4, 0.25)
        for seed in range(10):
            res = combined_split(V, f, f, SplitConfig(InterpolationParams(0.0, 0.0), seed=seed))
            assert sorted([res.left.tolist(), res.right.tolist()]) == [[0, 1], [2, 3]]
            np.testing.assert_allclose(res.objective_trace[-1] / 2, best)

    def test_needs_two_labels(self):
        with pytest.raises(ValueError):
            combined_split(np.ones((1, 2)), [1.0], [1.0], SplitConfig(InterpolationParams(0.0)))

    def test_dominant_label_is_split_off(self):
        V = np.eye(3)
        res = combined_split(V, [1.0, 0, 0], [1.0, 0, 0], SplitConfig(InterpolationParams(1.0, 0.0)))
        assert res.left.tolist() == [0]

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 30), st.integers(0, 2 ** 32 - 1), st.floats(0, 2), st.floats(0, 0.5))
    def test_trace_monotone_and_sides_non_empty(self, n, seed, lam, gamma):
        rng = np.random.default_rng(seed)
        V, f, ft = _random_node(rng, n)
        res = combined_split(V, f, ft, SplitConfig(InterpolationParams(lam, gamma), seed=seed))
        assert res.converged and res.iterations <= 50
        assert np.all(np.diff(res.objective_trace) >= -1e-12)
        assert len(res.left) and len(res.right)
        assert set(np.unique(res.alpha).tolist()) <= {-1, 1}
        last = split_objective(res.alpha, res.mu_plus, res.mu_minus, res.flam, V, lam)
        assert last == pytest.approx(res.objective_trace[-1])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 30), st.integers(0, 2 ** 32 - 1), st.floats(0, 0.5))
    def test_lambda_two_is_fano(self, n, seed, gamma):
        rng = np.random.default_rng(seed)
        V, f, ft = _random_node(rng, n)
        params = InterpolationParams(2.0, gamma)
        res = combined_split(V, f, ft, SplitConfig(params, seed=seed))
        expected = fano_partition(node_frequency(f, ft, params))
        np.testing.assert_array_equal(res.alpha, expected)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 40), st.integers(0, 2 ** 32 - 1))
    def test_lambda_zero_is_balanced(self, n, seed):
        rng = np.random.default_rng(seed)
        V, f, ft = _random_node(rng, n)
        res = combined_split(V, f, ft, SplitConfig(InterpolationParams(0.0, 0.0), seed=seed))
        assert abs(len(res.left) - len(res.right)) <= 1
