"""Node classifier training with teacher forcing, and beam-search prediction."""

from __future__ import annotations

import copy
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linear import NodeClassifier, stack_weights, train_classifier


class UntrainedTreeError(ValueError):
    pass


@dataclass
class Prediction:
    """Top-k labels with their log-scores and leaf depths, best first."""

    labels: np.ndarray
    scores: np.ndarray
    depths: np.ndarray

    @property
    def ranked(self):
        return list(zip(self.labels.tolist(), self.scores.tolist(), self.depths.tolist()))

    def __len__(self):
        return len(self.labels)


def node_instances(tree, dataset):
    """Rows routed to every node under teacher forcing.

    A row reaches a node when at least one of its labels lies in the
    node's subtree.  Returns a list of sorted row-index arrays by node id.
    """
    Yc = dataset.label_matrix().tocsc()
    Yc.sort_indices()
    rows_of = [None] * len(tree.nodes)
    # children always have larger ids than parents, so go in reverse
    for node in reversed(tree.nodes):
        if node.is_leaf:
            parts = [Yc.indices[Yc.indptr[l]:Yc.indptr[l + 1]] for l in node.labels.tolist()]
        else:
            parts = [rows_of[c] for c in node.children]
        rows_of[node.id] = (np.unique(np.concatenate(parts)) if parts
                            else np.zeros(0, dtype=np.int64))
    return rows_of


def train_node_classifiers(tree, dataset, reg_cost=1.0, tol=1e-3, threads=1):
    """Return a copy of ``tree`` with every node's classifiers fitted.

    Internal nodes get one classifier per child, trained on the rows that
    reach the node: positive when the row has a label under that child.
    Leaves get one classifier per bucket label, positive when the row
    carries that label.  ``dataset`` rows should be L2-normalized.
    """
    tree = copy.deepcopy(tree)
    X = dataset.X
    Y = dataset.label_matrix().tocsc()
    rows_of = node_instances(tree, dataset)

    tasks = []
    for node in tree.nodes:
        rows = rows_of[node.id]
        if node.is_leaf:
            for lab in node.labels.tolist():
                pos = Y.indices[Y.indptr[lab]:Y.indptr[lab + 1]]
                tasks.append((node.id, rows, np.isin(rows, pos)))
        else:
            for c in node.children:
                tasks.append((node.id, rows, np.isin(rows, rows_of[c])))

    def fit(task):
        _, rows, positive = task
        if len(rows) == 0:
            return NodeClassifier.untrained()
        y = np.where(positive, 1.0, -1.0)
        return train_classifier(X[rows], y, C=reg_cost, tol=tol)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            fitted = list(pool.map(fit, tasks))
    else:
        fitted = [fit(t) for t in tasks]

    for node in tree.nodes:
        node.classifiers = []
    for (node_id, _, _), clf in zip(tasks, fitted):
        tree.nodes[node_id].classifiers.append(clf)
    return tree


def log_sigmoid(m):
    return -np.logaddexp(0.0, -np.asarray(m, dtype=np.float64))


class _CompiledTree:
    """Tree classifiers stacked into two weight matrices for batched margins."""

    def __init__(self, tree, n_features):
        if not tree.is_trained:
            raise UntrainedTreeError("tree has no classifiers; train it first")
        self.tree = tree
        internal = []
        leaf = []
        self.int_col = {}
        self.leaf_col = {}
        for node in tree.nodes:
            if node.is_leaf:
                self.leaf_col[node.id] = len(leaf)
                leaf.extend(node.classifiers)
            else:
                self.int_col[node.id] = len(internal)
                internal.extend(node.classifiers)
        width = max([n_features] + [int(c.indices.max()) + 1
                                    for c in internal + leaf if len(c.indices)])
        self.n_features = n_features
        self.W_int, self.b_int = stack_weights(internal, width)
        self.W_leaf, self.b_leaf = stack_weights(leaf, width)
        if width > n_features:
            self.W_int = self.W_int[:n_features]
            self.W_leaf = self.W_leaf[:n_features]

    def margins(self, X):
        X = sp.csr_matrix(X)
        mi = np.asarray((X @ self.W_int).todense()) + self.b_int
        ml = np.asarray((X @ self.W_leaf).todense()) + self.b_leaf
        return log_sigmoid(mi), log_sigmoid(ml)

    def search(self, ls_int, ls_leaf, k, beam_width):
        nodes = self.tree.nodes
        beam = [(0.0, self.tree.root_id)]
        while any(not nodes[nid].is_leaf for _, nid in beam):
            cand = []
            for score, nid in beam:
                node = nodes[nid]
                if node.is_leaf:
                    cand.append((score, nid))
                    continue
                col = self.int_col[nid]
                for slot, c in enumerate(node.children):
                    cand.append((score + ls_int[col + slot], c))
            cand.sort(key=lambda item: (-item[0], item[1]))
            beam = cand[:beam_width]
        labels = []
        scores = []
        depths = []
        for score, nid in beam:
            node = nodes[nid]
            col = self.leaf_col[nid]
            labels.append(node.labels)
            scores.append(score + ls_leaf[col:col + len(node.labels)])
            depths.append(np.full(len(node.labels), node.depth, dtype=np.int64))
        labels = np.concatenate(labels)
        scores = np.concatenate(scores)
        depths = np.concatenate(depths)
        order = np.lexsort((labels, -scores))[:k]
        return Prediction(labels[order], scores[order], depths[order])


def predict_beam(tree, x, k=5, beam_width=10):
    """Beam search for one feature row ``x`` (1 x d sparse or dense)."""
    x = sp.csr_matrix(x)
    return predict_batch(tree, x, k, beam_width)[0]


def predict_batch(tree, X, k=5, beam_width=10, chunk=2048):
    """Beam search for every row of ``X``; returns a list of :class:`Prediction`.

    Path scores add ``log sigmoid(margin)`` of each traversed child
    classifier; a label's score adds its leaf classifier on top.  Leaves
    reached early stay in the beam and compete with deeper paths.
    """
    if k < 1 or beam_width < 1:
        raise ValueError("k and beam_width must be >= 1")
    X = sp.csr_matrix(X)
    compiled = _CompiledTree(tree, X.shape[1])
    out = []
    for lo in range(0, X.shape[0], chunk):
        ls_int, ls_leaf = compiled.margins(X[lo:lo + chunk])
        for r in range(ls_int.shape[0]):
            out.append(compiled.search(ls_int[r], ls_leaf[r], k, beam_width))
    return out


def format_predictions(predictions):
    """One line per query: ``label:score`` and depth columns, tab-separated."""
    lines = []
    for pred in predictions:
        cols = []
        for lab, score, depth in pred.ranked:
            cols.append(f"{lab}:{score!r}")
            cols.append(str(depth))
        lines.append("\t".join(cols))
    return "\n".join(lines) + "\n"


def parse_predictions(text):
    out = []
    for line in text.split("\n")[:-1]:
        cols = line.split("\t") if line else []
        labels, scores, depths = [], [], []
        for pair, depth in zip(cols[::2], cols[1::2]):
            lab, _, score = pair.partition(":")
            labels.append(int(lab))
            scores.append(float(score))
            depths.append(int(depth))
        out.append(Prediction(np.asarray(labels, dtype=np.int64), np.asarray(scores),
                              np.asarray(depths, dtype=np.int64)))
    return out
