"""L2-regularized squared-hinge linear classifiers.

Minimizes ``0.5 |w|^2 + C sum_i max(0, 1 - y_i w.x_i)^2`` with a
Newton-CG method on the generalized Hessian and an Armijo line search,
so every accepted step lowers the objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass
class NodeClassifier:
    """Sparse weight vector plus bias; ``trained_on == 0`` means untrained."""

    indices: np.ndarray
    values: np.ndarray
    bias: float = 0.0
    trained_on: int = 0

    @classmethod
    def untrained(cls):
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0), 0.0, 0)

    @property
    def is_trained(self):
        return self.trained_on > 0

    def margin(self, x):
        """Margin for one CSR row (or 1 x d matrix)."""
        x = sp.csr_matrix(x)
        if not self.is_trained:
            return 0.0
        x.sum_duplicates()
        _, iw, ix = np.intersect1d(self.indices, x.indices, assume_unique=True,
                                   return_indices=True)
        return float(np.dot(self.values[iw], x.data[ix]) + self.bias)

    def __eq__(self, other):
        if not isinstance(other, NodeClassifier):
            return NotImplemented
        return (self.trained_on == other.trained_on
                and self.bias == other.bias
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))


def _objective(w, X, y, C):
    z = 1.0 - y * (X @ w)
    act = z > 0
    loss = 0.5 * w @ w + C * np.dot(z[act], z[act])
    grad = w - 2.0 * C * (X[act].T @ (y[act] * z[act]))
    return loss, grad, act


def fit_squared_hinge(X, y, C=1.0, tol=1e-3, max_iter=200, cg_iter=100, history=None):
    """Solve the primal problem for labels ``y`` in {-1, +1}.

    ``X`` should already contain any bias column.  Stops when
    ``|grad| <= tol * (1 + |w|)``.  If ``history`` is a list the objective
    after every accepted step is appended to it.
    """
    X = sp.csr_matrix(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.zeros(X.shape[1])
    loss, grad, act = _objective(w, X, y, C)
    if history is not None:
        history.append(loss)
    for _ in range(max_iter):
        gnorm = np.linalg.norm(grad)
        if gnorm <= tol * (1.0 + np.linalg.norm(w)):
            break
        Xa = X[act]

        def hess(v):
            return v + 2.0 * C * (Xa.T @ (Xa @ v))

        # conjugate gradient on H d = -g, loose inner tolerance
        d = np.zeros_like(w)
        r = -grad.copy()
        p = r.copy()
        rr = r @ r
        cg_tol = min(0.1, np.sqrt(gnorm)) * gnorm
        for _ in range(cg_iter):
            Hp = hess(p)
            step = rr / (p @ Hp)
            d += step * p
            r -= step * Hp
            rr_new = r @ r
            if np.sqrt(rr_new) <= cg_tol:
                break
            p = r + (rr_new / rr) * p
            rr = rr_new
        slope = grad @ d
        t = 1.0
        while True:
            cand = w + t * d
            new_loss, new_grad, new_act = _objective(cand, X, y, C)
            if new_loss <= loss + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-12:
                return w
        w, loss, grad, act = cand, new_loss, new_grad, new_act
        if history is not None:
            history.append(loss)
    return w


def train_classifier(X, y, C=1.0, tol=1e-3):
    """Fit on the rows of ``X`` (no bias column) and return a :class:`NodeClassifier`.

    Only feature columns present in ``X`` can get nonzero weight, so the
    problem is solved on that reduced column set.  An appended constant
    column plays the role of the bias.
    """
    X = sp.csr_matrix(X)
    n = X.shape[0]
    if n == 0:
        return NodeClassifier.untrained()
    cols = np.unique(X.indices)
    Xr = X[:, cols] if len(cols) < X.shape[1] else X
    Xb = sp.hstack([Xr, np.ones((n, 1))], format="csr")
    w = fit_squared_hinge(Xb, y, C=C, tol=tol)
    vals = w[:-1]
    keep = vals != 0
    return NodeClassifier(cols[keep].astype(np.int64), vals[keep].copy(), float(w[-1]), n)


def stack_weights(classifiers, n_features):
    """Column-stack classifiers into a ``d x m`` CSC matrix and a bias vector."""
    indptr = [0]
    rows = []
    vals = []
    bias = np.zeros(len(classifiers))
    for k, clf in enumerate(classifiers):
        rows.append(clf.indices)
        vals.append(clf.values)
        indptr.append(indptr[-1] + len(clf.indices))
        bias[k] = clf.bias
    W = sp.csc_matrix(
        (np.concatenate(vals) if vals else np.zeros(0),
         np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64),
         np.asarray(indptr, dtype=np.int64)),
        shape=(n_features, len(classifiers)))
    return W, bias
