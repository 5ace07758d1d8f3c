"""Sparse multi-label datasets in the XMC repository text format.

The format is a header line ``N d L`` followed by ``N`` rows of the form
``l1,l2,... i1:v1 i2:v2 ...``.  The label list may be empty.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from ._atomic import write_text

INDEX_DTYPE = np.int64


class XMCParseError(ValueError):
    """Raised for malformed dataset text; carries the 1-based line number."""

    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``X`` (CSR, N x d) and per-row sorted label arrays.

    ``context_weights`` is the optional per-row weight vector ``p``; when it
    is ``None`` every row weighs the same.
    """

    X: sp.csr_matrix
    labels: tuple
    n_labels: int
    context_weights: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.X.shape[0] != len(self.labels):
            raise ValueError(
                f"{self.X.shape[0]} feature rows but {len(self.labels)} label rows")
        for i, row in enumerate(self.labels):
            if len(row) and (row[0] < 0 or row[-1] >= self.n_labels):
                raise ValueError(f"row {i}: label index out of range [0, {self.n_labels})")
        if self.context_weights is not None:
            p = np.asarray(self.context_weights, dtype=np.float64)
            if p.shape != (self.n_points,) or np.any(p < 0) or not np.all(np.isfinite(p)):
                raise ValueError("context weights must be finite, nonnegative, one per row")

    @property
    def n_points(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    @property
    def weights(self):
        """Per-row weights ``p``; uniform ``1/N`` when none were given."""
        if self.context_weights is not None:
            return np.asarray(self.context_weights, dtype=np.float64)
        n = max(self.n_points, 1)
        return np.full(self.n_points, 1.0 / n)

    @property
    def empty_label_rows(self):
        """Indices of rows with no relevant label."""
        return np.array([i for i, row in enumerate(self.labels) if len(row) == 0],
                        dtype=INDEX_DTYPE)

    def label_matrix(self):
        """Binary label matrix ``Y`` as CSR (N x L)."""
        indptr = np.zeros(self.n_points + 1, dtype=INDEX_DTYPE)
        indptr[1:] = np.cumsum([len(row) for row in self.labels])
        indices = (np.concatenate(self.labels).astype(INDEX_DTYPE)
                   if self.n_points else np.zeros(0, dtype=INDEX_DTYPE))
        data = np.ones(len(indices), dtype=np.float64)
        return sp.csr_matrix((data, indices, indptr), shape=(self.n_points, self.n_labels))

    def subset(self, rows):
        rows = np.asarray(rows, dtype=INDEX_DTYPE)
        p = None if self.context_weights is None else np.asarray(self.context_weights)[rows]
        return Dataset(self.X[rows], tuple(self.labels[i] for i in rows), self.n_labels, p)

    def with_context_weights(self, p):
        return replace(self, context_weights=np.asarray(p, dtype=np.float64))


def make_dataset(X, labels, n_labels, context_weights=None):
    """Build a canonical Dataset from any sparse/dense matrix and label iterables."""
    X = sp.csr_matrix(X, dtype=np.float64)
    X.sum_duplicates()
    X.eliminate_zeros()
    X.sort_indices()
    rows = tuple(np.unique(np.asarray(list(row), dtype=INDEX_DTYPE)) for row in labels)
    return Dataset(X, rows, int(n_labels), context_weights)


def _parse_header(line):
    parts = line.split()
    if len(parts) != 3:
        raise XMCParseError(1, f"expected header 'N d L', got {line.strip()!r}")
    try:
        n, d, n_labels = (int(tok) for tok in parts)
    except ValueError:
        raise XMCParseError(1, f"non-integer header {line.strip()!r}") from None
    if n < 0 or d < 0 or n_labels < 0:
        raise XMCParseError(1, "negative header count")
    return n, d, n_labels


def parse_xmc_file(stream):
    """Parse an XMC-format text stream (or string) into a :class:`Dataset`.

    Duplicate labels in a row collapse to one; duplicate feature indices are
    summed.  Rows are kept in file order, including rows without labels.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    lines = iter(stream)
    try:
        header = next(lines)
    except StopIteration:
        raise XMCParseError(1, "empty input") from None
    n, d, n_labels = _parse_header(header)

    indptr = [0]
    indices = []
    values = []
    label_rows = []
    lineno = 1
    for raw in lines:
        lineno += 1
        line = raw.rstrip("\r\n")
        if len(label_rows) == n:
            if line.strip():
                raise XMCParseError(lineno, f"more rows than the {n} declared")
            continue
        tokens = line.split()
        row_labels = []
        if tokens and ":" not in tokens[0]:
            for tok in tokens[0].split(","):
                if not tok:
                    continue
                try:
                    lab = int(tok)
                except ValueError:
                    raise XMCParseError(lineno, f"non-integer label {tok!r}") from None
                if lab < 0 or lab >= n_labels:
                    raise XMCParseError(lineno, f"label index {lab} >= L={n_labels}")
                row_labels.append(lab)
            tokens = tokens[1:]
        for tok in tokens:
            idx, sep, val = tok.partition(":")
            if not sep:
                raise XMCParseError(lineno, f"expected index:value, got {tok!r}")
            try:
                j = int(idx)
                v = float(val)
            except ValueError:
                raise XMCParseError(lineno, f"non-numeric feature {tok!r}") from None
            if j < 0 or j >= d:
                raise XMCParseError(lineno, f"feature index {j} >= d={d}")
            if not math.isfinite(v):
                raise XMCParseError(lineno, f"non-finite value {val!r}")
            indices.append(j)
            values.append(v)
        indptr.append(len(indices))
        label_rows.append(np.unique(np.asarray(row_labels, dtype=INDEX_DTYPE)))
    if len(label_rows) != n:
        raise XMCParseError(lineno, f"header declares {n} rows, found {len(label_rows)}")

    X = sp.csr_matrix(
        (np.asarray(values, dtype=np.float64),
         np.asarray(indices, dtype=INDEX_DTYPE),
         np.asarray(indptr, dtype=INDEX_DTYPE)),
        shape=(n, d))
    X.sum_duplicates()
    X.eliminate_zeros()
    X.sort_indices()
    return Dataset(X, tuple(label_rows), n_labels)


def load_xmc(path):
    with open(path, encoding="utf-8", newline=None) as fh:
        return parse_xmc_file(fh)


def format_xmc(dataset):
    """Serialize a dataset to XMC text; ``parse_xmc_file`` reads it back exactly."""
    X = dataset.X
    out = [f"{dataset.n_points} {dataset.n_features} {dataset.n_labels}"]
    for i in range(dataset.n_points):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        feats = " ".join(f"{j}:{v!r}" for j, v in zip(X.indices[lo:hi].tolist(),
                                                      X.data[lo:hi].tolist()))
        labs = ",".join(str(l) for l in dataset.labels[i].tolist())
        out.append(" ".join(part for part in (labs, feats) if part))
    return "\n".join(out) + "\n"


def save_xmc(dataset, path):
    write_text(path, format_xmc(dataset))


def l2_normalize_rows(dataset):
    """Scale every nonzero row of ``X`` to unit Euclidean norm.

    Returns ``(normalized_dataset, n_zero_rows)``.  Zero rows are left as
    they are and only counted.
    """
    X = dataset.X.copy()
    sq = np.asarray(X.multiply(X).sum(axis=1)).ravel()
    norms = np.sqrt(sq)
    zero = norms == 0
    norms[zero] = 1.0
    X.data /= np.repeat(norms, np.diff(X.indptr))
    return replace(dataset, X=X), int(zero.sum())


def train_test_split(dataset, test_fraction=0.2, seed=0):
    """Random row split; both parts keep their original relative order."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    n_test = int(round(test_fraction * dataset.n_points))
    test = np.sort(rng.choice(dataset.n_points, size=n_test, replace=False))
    mask = np.ones(dataset.n_points, dtype=bool)
    mask[test] = False
    return dataset.subset(np.flatnonzero(mask)), dataset.subset(test)
