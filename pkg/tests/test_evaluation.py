import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import contexts
from labeltree.data import train_test_split
from labeltree.evaluation import (PipelineConfig, coverage_curve, coverage_to_csv,
                                  expected_depth_at_k, precision_at_k, read_reports_csv,
                                  reports_to_csv, sweep_lambda)
from labeltree.freq import InterpolationParams, greedy_ftilde, marginal_frequencies, marginal_ftilde
from labeltree.model import Prediction
from labeltree.synth import make_zipf_dataset
from labeltree.tree import build_tree, tree_expected_depth

A, B, C = 0, 1, 2


def pred(labels, depths=None):
    labels = np.asarray(labels, dtype=np.int64)
    depths = np.zeros(len(labels), dtype=np.int64) if depths is None else np.asarray(depths)
    return Prediction(labels, -np.arange(len(labels), dtype=float), depths)


class TestPrecision:
    def test_partial_hit(self):
        assert precision_at_k([pred([A, B, C])], [[A, C]], 3) == pytest.approx(2 / 3)

    def test_top_one(self):
        assert precision_at_k([pred([A, B])], [[A]], 1) == 1.0

    def test_empty_truth_scores_zero(self):
        assert precision_at_k([pred([A]), pred([A])], [[A], []], 1) == 0.5

    def test_short_prediction_counts_misses(self):
        assert precision_at_k([pred([A])], [[A, B]], 2) == 0.5

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            precision_at_k([pred([A])], [[A]], 0)


class TestExpectedDepth:
    def test_mean_of_top_one(self):
        assert expected_depth_at_k([pred([A], [1]), pred([B], [3])], 1) == 2.0

    def test_max_over_top_k(self):
        assert expected_depth_at_k([pred([A, B, C], [2, 5, 9])], 2) == 5.0

    def test_root_leaf(self):
        assert expected_depth_at_k([pred([A, B], [0, 0])], 2) == 0.0

    def test_empty_truth_excluded(self):
        preds = [pred([A], [1]), pred([B], [7])]
        assert expected_depth_at_k(preds, 1, truths=[[A], []]) == 1.0

    def test_errors(self):
        with pytest.raises(ValueError):
            expected_depth_at_k([pred([A], [1])], 0)
        with pytest.raises(ValueError, match="context 0"):
            expected_depth_at_k([pred([])], 1)


@st.composite
def scored_contexts(draw):
    n = draw(st.integers(1, 15))
    preds, truths = [], []
    for _ in range(n):
        labs = draw(st.lists(st.integers(0, 9), min_size=1, max_size=6, unique=True))
        depths = draw(st.lists(st.integers(0, 8), min_size=len(labs), max_size=len(labs)))
        preds.append(pred(labs, depths))
        truths.append(draw(st.lists(st.integers(0, 9), max_size=4, unique=True)))
    return preds, truths


@settings(max_examples=80, deadline=None)
@given(scored_contexts(), st.randoms(use_true_random=False))
def test_metric_properties(data, rnd):
    preds, truths = data
    order = list(range(len(preds)))
    rnd.shuffle(order)
    for k in (1, 2, 5):
        p = precision_at_k(preds, truths, k)
        assert 0 <= p <= 1
        assert p == pytest.approx(precision_at_k([preds[i] for i in order],
                                                 [truths[i] for i in order], k))
    depths = [expected_depth_at_k(preds, k) for k in range(1, 7)]
    assert all(a <= b for a, b in zip(depths, depths[1:]))


class TestCoverage:
    def test_shared_context(self):
        ds = contexts([{A, B}, {A}, {B}])
        assert coverage_curve(ds, marginal_frequencies(ds), [0.5])[0][1] == pytest.approx(2 / 3)

    def test_perfect_cooccurrence(self):
        ds = contexts([{A, B}, {A, B}])
        assert coverage_curve(ds, marginal_frequencies(ds), [0.5]) == [(0.5, 1.0)]

    def test_modes(self):
        ds = contexts([{A, B, C}, {A}, {C}], n_labels=4)
        f = np.array([0.4, 0.3, 0.2, 0.1])
        assert coverage_curve(ds, f, [0.5], mode="any")[0][1] == pytest.approx(2 / 3)
        assert coverage_curve(ds, f, [0.5], mode="all")[0][1] == pytest.approx(1 / 3)
        assert coverage_curve(ds, f, [0.75], mode="three")[0][1] == pytest.approx(1.0)

    def test_bad_inputs(self):
        ds = contexts([{A}])
        with pytest.raises(ValueError):
            coverage_curve(ds, [1.0], [1.5])
        with pytest.raises(ValueError):
            coverage_curve(ds, [1.0], [0.5], mode="most")

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.sets(st.integers(0, 7), max_size=4), min_size=1, max_size=15),
           st.sampled_from(["any", "three", "all"]))
    def test_monotone_and_ends_at_non_empty_share(self, rows, mode):
        ds = contexts(rows, n_labels=8)
        grid = np.linspace(0, 1, 17)
        f = np.bincount([l for r in rows for l in r], minlength=8).astype(float)
        cov = [c for _, c in coverage_curve(ds, f, grid, mode)]
        assert all(a <= b + 1e-15 for a, b in zip(cov, cov[1:]))
        assert cov[0] == 0.0
        assert cov[-1] == pytest.approx(sum(1 for r in rows if r) / len(rows))

    def test_csv(self):
        assert coverage_to_csv([(0.5, 2 / 3)]) == (
            "label_fraction,context_fraction\n0.5,0.6666666666666666\n")


def _greedy_representatives(rows, n_labels):
    alive = set(range(len(rows)))
    rep = {}
    while True:
        counts = [sum(1 for i in alive if l in rows[i]) for l in range(n_labels)]
        if max(counts) == 0:
            return rep
        best = counts.index(max(counts))
        for i in [i for i in alive if best in rows[i]]:
            rep[i] = best
            alive.discard(i)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sets(st.integers(0, 9), min_size=1, max_size=3), min_size=1, max_size=25),
       st.integers(0, 2 ** 32 - 1), st.floats(0, 2))
def test_oracle_depth_matches_tree_depth(rows, seed, lam):
    ds = contexts(rows, n_labels=10)
    f = marginal_frequencies(ds)
    tree = build_tree(np.random.default_rng(seed).random((10, 3)), f, marginal_ftilde(ds),
                      InterpolationParams(lam), leaf_size=1, seed=seed)
    depth = tree.label_depths()
    for ftilde, rep in (
            (marginal_ftilde(ds), {i: min(r, key=lambda l: (-f[l], l)) for i, r in enumerate(rows)}),
            (greedy_ftilde(ds), _greedy_representatives(rows, 10))):
        preds = [pred([rep[i]], [depth[rep[i]]]) for i in range(len(rows))]
        assert expected_depth_at_k(preds, 1, ds.labels) == pytest.approx(
            tree_expected_depth(tree, ftilde), abs=1e-12)


@pytest.fixture(scope="module")
def zipf_split():
    ds, _ = make_zipf_dataset(1500, 64, n_clusters=4, seed=2)
    return train_test_split(ds, 0.2, seed=0)


def test_sweep_endpoints(zipf_split):
    train, test = zipf_split
    config = PipelineConfig(leaf_size=1, beam_width=10)
    reports = sweep_lambda(train, test, [0, 100000], config)
    assert [r.lambda_prime for r in reports] == [0.0, 100000.0]
    assert reports[1].expected_depth_at[1] < reports[0].expected_depth_at[1]
    text = reports_to_csv(reports)
    assert text.splitlines()[0] == "lambda_prime,lambda,p@1,p@3,p@5,ed@1,ed@3,ed@5"
    back = read_reports_csv(text)
    assert back[1].expected_depth_at == reports[1].expected_depth_at
    assert back[0].precision_at == reports[0].precision_at


def test_sweep_empty_list(zipf_split):
    train, test = zipf_split
    assert sweep_lambda(train, test, []) == []
    assert reports_to_csv([]).count("\n") == 1


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(ftilde_mode="soft")
    with pytest.raises(ValueError):
        PipelineConfig(ks=(0,))
    with pytest.raises(ValueError):
        PipelineConfig(leaf_size=0)
