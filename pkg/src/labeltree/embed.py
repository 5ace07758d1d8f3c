"""Positive-instance feature aggregation (PIFA) label embeddings."""

import numpy as np
import scipy.sparse as sp


def normalize_rows(M):
    """Return a CSR copy of ``M`` with nonzero rows at unit norm, plus the zero-row count."""
    M = sp.csr_matrix(M, dtype=np.float64, copy=True)
    M.sort_indices()
    norms = np.sqrt(np.asarray(M.multiply(M).sum(axis=1)).ravel())
    zero = norms == 0
    norms[zero] = 1.0
    M.data /= np.repeat(norms, np.diff(M.indptr))
    return M, int(zero.sum())


def pifa_embeddings(dataset):
    """Embed each label as the normalized sum of its positive instances.

    Returns ``(V, n_empty)`` where ``V`` is an ``L x d`` CSR matrix and
    ``n_empty`` counts labels with no positive instance (their rows stay
    zero).
    """
    V = dataset.label_matrix().T.tocsr() @ dataset.X
    V = sp.csr_matrix(V)
    V.eliminate_zeros()
    return normalize_rows(V)
