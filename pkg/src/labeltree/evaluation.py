"""Precision@k, expected depth@k, label coverage curves and trade-off sweeps."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .data import l2_normalize_rows
from .embed import pifa_embeddings
from .freq import FTILDE_BUILDERS, InterpolationParams, marginal_frequencies
from .model import predict_batch, train_node_classifiers
from .tree import build_tree

DEFAULT_KS = (1, 3, 5)
# default lambda' grid for trade-off sweeps
DEFAULT_LAMBDA_PRIMES = (0, 0.5, 1, 2, 6, 10, 30, 100, 300, 1000, 100000)


def _labels_of(pred):
    return np.asarray(getattr(pred, "labels", pred), dtype=np.int64)


def precision_at_k(predictions, truths, k):
    """Mean of ``|top-k ∩ truth| / k``; short predictions count as misses."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(predictions) != len(truths):
        raise ValueError("one prediction per context is required")
    if not len(truths):
        return 0.0
    hits = 0
    for pred, truth in zip(predictions, truths):
        top = _labels_of(pred)[:k]
        hits += int(np.isin(top, np.asarray(truth)).sum())
    return hits / (k * len(truths))


def expected_depth_at_k(predictions, k, truths=None):
    """Mean over contexts of the deepest leaf among the top-k predictions.

    When ``truths`` is given, contexts with no relevant label are left out.
    A context with fewer than ``k`` predictions uses its deepest one.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    total = 0.0
    count = 0
    for i, pred in enumerate(predictions):
        if truths is not None and len(truths[i]) == 0:
            continue
        if len(pred.depths) == 0:
            raise ValueError(f"context {i} has no predicted labels")
        total += float(np.max(pred.depths[:k]))
        count += 1
    return total / count if count else 0.0


COVERAGE_MODES = ("any", "three", "all")


def coverage_curve(dataset, freq, fractions, mode="any"):
    """Share of contexts covered by the most frequent ``ceil(q L)`` labels.

    ``mode`` sets what covered means: ``any`` relevant label, ``three`` (at
    least ``min(3, |truth|)``) or ``all`` relevant labels.  Contexts are
    weighted by the dataset's context weights.  Returns ``(q, coverage)``
    pairs in the order of ``fractions``.
    """
    if mode not in COVERAGE_MODES:
        raise ValueError(f"mode must be one of {COVERAGE_MODES}")
    freq = np.asarray(freq, dtype=np.float64)
    n_labels = dataset.n_labels
    rank = np.empty(n_labels, dtype=np.int64)
    rank[np.argsort(-freq, kind="stable")] = np.arange(n_labels)
    p = dataset.weights
    p = p / math.fsum(p) if math.fsum(p) > 0 else p
    # smallest label budget m that covers each context
    need = np.full(dataset.n_points, np.iinfo(np.int64).max)
    for i, row in enumerate(dataset.labels):
        if not len(row):
            continue
        r = np.sort(rank[row])
        if mode == "any":
            need[i] = r[0] + 1
        elif mode == "three":
            need[i] = r[min(3, len(r)) - 1] + 1
        else:
            need[i] = r[-1] + 1
    out = []
    for q in fractions:
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"label fraction {q} outside [0, 1]")
        m = math.ceil(q * n_labels - 1e-9)
        out.append((float(q), float(math.fsum(p[need <= m]))))
    return out


@dataclass(frozen=True)
class PipelineConfig:
    leaf_size: int = 100
    beam_width: int = 10
    ks: tuple = DEFAULT_KS
    gamma: float = 0.1
    ftilde_mode: str = "marginal"
    seed: int = 0
    reg_cost: float = 1.0
    max_iterations: int = 50
    rel_tolerance: float = 1e-4
    threads: int = 1

    def __post_init__(self):
        if self.leaf_size < 1 or self.beam_width < 1:
            raise ValueError("leaf_size and beam_width must be >= 1")
        if not self.ks or min(self.ks) < 1:
            raise ValueError("k values must be >= 1")
        if self.ftilde_mode not in FTILDE_BUILDERS:
            raise ValueError(f"ftilde_mode must be one of {sorted(FTILDE_BUILDERS)}")
        if self.gamma < 0 or self.reg_cost <= 0:
            raise ValueError("gamma must be >= 0 and reg_cost > 0")
        if self.max_iterations < 1 or self.rel_tolerance <= 0:
            raise ValueError("max_iterations must be >= 1 and rel_tolerance > 0")


@dataclass
class EvalReport:
    lam: float
    lambda_prime: float
    precision_at: dict = field(default_factory=dict)
    expected_depth_at: dict = field(default_factory=dict)
    coverage: list = field(default_factory=list)
    n_contexts: int = 0
    n_empty_truth: int = 0
    n_short: dict = field(default_factory=dict)


def evaluate_predictions(predictions, truths, ks, lam, lambda_prime):
    report = EvalReport(lam, lambda_prime, n_contexts=len(truths))
    report.n_empty_truth = sum(1 for t in truths if len(t) == 0)
    for k in ks:
        report.precision_at[k] = precision_at_k(predictions, truths, k)
        report.expected_depth_at[k] = expected_depth_at_k(predictions, k, truths)
        report.n_short[k] = sum(1 for p in predictions if len(p) < k)
    return report


@dataclass
class FittedModel:
    tree: object
    f: np.ndarray
    ftilde: np.ndarray


def fit_pipeline(train, params, config, stats=None):
    """Normalize rows, build PIFA embeddings and the tree, then train classifiers."""
    train_n, zero_rows = l2_normalize_rows(train)
    f = marginal_frequencies(train)
    ftilde = FTILDE_BUILDERS[config.ftilde_mode](train)
    V, empty_labels = pifa_embeddings(train_n)
    tree = build_tree(V, f, ftilde, params, config.leaf_size, config.seed,
                      config.max_iterations, config.rel_tolerance, config.threads)
    tree = train_node_classifiers(tree, train_n, config.reg_cost, threads=config.threads)
    if stats is not None:
        stats.update(zero_rows=zero_rows, labels_without_positives=empty_labels)
    return FittedModel(tree, f, ftilde)


def evaluate_model(tree, test, ks=DEFAULT_KS, beam_width=10, lambda_prime=None):
    test_n, _ = l2_normalize_rows(test)
    preds = predict_batch(tree, test_n.X, max(ks), beam_width)
    lam = tree.params.lam
    if lambda_prime is None:
        lambda_prime = math.inf if lam >= 2.0 else lam / (2.0 - lam)
    return evaluate_predictions(preds, test.labels, ks, lam, lambda_prime), preds


def sweep_lambda(train, test, lambda_primes, config=PipelineConfig()):
    """One :class:`EvalReport` per ``lambda'``: build, train, predict, score."""
    reports = []
    for lp in lambda_primes:
        params = InterpolationParams.from_lambda_prime(lp, config.gamma)
        model = fit_pipeline(train, params, config)
        report, _ = evaluate_model(model.tree, test, config.ks, config.beam_width, float(lp))
        reports.append(report)
    return reports


def _fmt(x):
    return repr(float(x))


def reports_to_csv(reports, ks=DEFAULT_KS):
    """CSV text with columns ``lambda_prime, lambda, p@k..., ed@k...``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["lambda_prime", "lambda"] + [f"p@{k}" for k in ks] + [f"ed@{k}" for k in ks])
    for r in reports:
        writer.writerow([_fmt(r.lambda_prime), _fmt(r.lam)]
                        + [_fmt(r.precision_at[k]) for k in ks]
                        + [_fmt(r.expected_depth_at[k]) for k in ks])
    return buf.getvalue()


def read_reports_csv(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        ks = [int(c[2:]) for c in row if c.startswith("p@")]
        r = EvalReport(float(row["lambda"]), float(row["lambda_prime"]))
        for k in ks:
            r.precision_at[k] = float(row[f"p@{k}"])
            r.expected_depth_at[k] = float(row[f"ed@{k}"])
        out.append(r)
    return out


def coverage_to_csv(curve):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label_fraction", "context_fraction"])
    for q, c in curve:
        writer.writerow([_fmt(q), _fmt(c)])
    return buf.getvalue()
