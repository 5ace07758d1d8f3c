"""Synthetic power-law multi-label data with clustered label features."""

import numpy as np
import scipy.sparse as sp

from .data import make_dataset


def zipf_pmf(n, s=1.0):
    w = 1.0 / np.arange(1, n + 1, dtype=np.float64) ** s
    return w / w.sum()


def make_zipf_dataset(n_points, n_labels, n_clusters=20, s=1.0, block=8, extra_rate=0.5,
                      noise=0.3, n_noise_features=64, seed=0):
    """Rows whose labels follow a Zipf law and whose features reveal them.

    Label ``l`` has popularity rank ``l`` and belongs to one of
    ``n_clusters`` groups.  A row draws a primary label from the Zipf law,
    then a geometric number (mean ``extra_rate``) of further labels from the
    same group.  Its features are the group's ``block`` dedicated columns,
    one dedicated column per label, and a few shared noise columns.
    Returns ``(dataset, cluster_of_label)``.
    """
    rng = np.random.default_rng(seed)
    cluster_of = rng.permutation(n_labels) % n_clusters
    pmf = zipf_pmf(n_labels, s)
    members = [np.flatnonzero(cluster_of == c) for c in range(n_clusters)]
    member_pmf = [pmf[m] / pmf[m].sum() for m in members]

    label_col0 = n_clusters * block
    noise_col0 = label_col0 + n_labels
    n_features = noise_col0 + n_noise_features

    primary = rng.choice(n_labels, size=n_points, p=pmf)
    n_extra = rng.geometric(1.0 / (1.0 + extra_rate), size=n_points) - 1
    rows, cols, vals = [], [], []
    label_rows = []
    for i in range(n_points):
        c = cluster_of[primary[i]]
        labs = {int(primary[i])}
        if n_extra[i]:
            labs.update(rng.choice(members[c], size=n_extra[i], p=member_pmf[c]).tolist())
        labs = sorted(labs)
        label_rows.append(labs)
        feat = list(range(c * block, (c + 1) * block))
        feat += [label_col0 + l for l in labs]
        nz = rng.choice(n_noise_features, size=3, replace=False) + noise_col0
        feat += nz.tolist()
        v = np.concatenate([1.0 + noise * rng.standard_normal(block),
                            np.full(len(labs), 2.0) + noise * rng.standard_normal(len(labs)),
                            noise * rng.random(3) * 3.0])
        rows.extend([i] * len(feat))
        cols.extend(feat)
        vals.extend(np.abs(v).tolist())
    X = sp.csr_matrix((vals, (rows, cols)), shape=(n_points, n_features))
    return make_dataset(X, label_rows, n_labels), cluster_of


def make_two_cluster_dataset(n_points=400, n_labels=8, seed=0):
    """Two label groups with disjoint, noisy feature blocks."""
    rng = np.random.default_rng(seed)
    half = n_labels // 2
    d = 2 * 4 + n_labels
    X = np.zeros((n_points, d))
    labels = []
    for i in range(n_points):
        g = i % 2
        lab = int(rng.integers(half)) + g * half
        X[i, g * 4:(g + 1) * 4] = 1.0 + 0.1 * rng.standard_normal(4)
        X[i, 8 + lab] = 1.5
        labels.append([lab])
    return make_dataset(np.abs(X), labels, n_labels)
