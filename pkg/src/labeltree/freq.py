"""Label frequency vectors consumed by the split objective.

All vectors are plain float64 arrays of length ``L``.  ``f`` is the
marginal label distribution, ``ftilde`` credits each context to a single
representative label, and :func:`interpolated_frequency` blends uniform,
``f`` and ``ftilde`` as the trade-off parameter moves from 0 to 2.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from ._atomic import write_text

DEFAULT_GAMMA = 0.1


@dataclass(frozen=True)
class InterpolationParams:
    """Trade-off ``lam`` in [0, 2] and additive smoothing ``gamma``.

    ``lambda_prime`` is the unbounded reparametrization used for sweeps,
    with ``lam = 2 * lambda_prime / (1 + lambda_prime)``.
    """

    lam: float
    gamma: float = DEFAULT_GAMMA
    lambda_prime: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "gamma", float(self.gamma))
        if not 0.0 <= self.lam <= 2.0:
            raise ValueError(f"lambda must lie in [0, 2], got {self.lam}")
        if self.gamma < 0 or not math.isfinite(self.gamma):
            raise ValueError(f"gamma must be a nonnegative number, got {self.gamma}")

    @classmethod
    def from_lambda_prime(cls, lambda_prime, gamma=DEFAULT_GAMMA):
        return cls(lambda_from_prime(lambda_prime), gamma, float(lambda_prime))


def lambda_from_prime(lambda_prime):
    if lambda_prime < 0 or math.isnan(lambda_prime):
        raise ValueError(f"lambda' must be nonnegative, got {lambda_prime}")
    if math.isinf(lambda_prime):
        return 2.0
    return 2.0 * lambda_prime / (1.0 + lambda_prime)


def lambda_to_prime(lam):
    return math.inf if lam >= 2.0 else lam / (2.0 - lam)


def _normalized(w):
    total = math.fsum(w)
    if total <= 0:
        raise ValueError("frequency vector has no mass")
    return np.asarray(w, dtype=np.float64) / total


def marginal_frequencies(dataset):
    """``f`` proportional to ``Y^T p``; rows without labels add nothing."""
    counts = dataset.label_matrix().T @ dataset.weights
    if not np.any(counts > 0):
        raise ValueError("label matrix carries no frequency mass")
    return _normalized(counts)


def _label_rows(dataset):
    """Rows containing each label, as a CSC view of ``Y``."""
    Yc = dataset.label_matrix().tocsc()
    Yc.sort_indices()
    return Yc.indptr, Yc.indices


def greedy_ftilde(dataset, normalize=True):
    """Greedy representative-label frequencies.

    Repeatedly take the label with the largest remaining weighted count,
    credit it with that count and drop every context containing it.  Ties
    go to the lowest label index.
    """
    p = dataset.weights
    indptr, rows = _label_rows(dataset)
    n_labels = dataset.n_labels
    alive = np.ones(dataset.n_points, dtype=bool)

    def count(lab):
        r = rows[indptr[lab]:indptr[lab + 1]]
        return math.fsum(p[r[alive[r]]])

    # counts only shrink, so heap keys are upper bounds; re-check on pop
    heap = [(-count(lab), lab) for lab in range(n_labels)]
    heapq.heapify(heap)
    out = np.zeros(n_labels)
    while heap:
        neg, lab = heapq.heappop(heap)
        if -neg <= 0:
            break
        current = count(lab)
        if current != -neg:
            heapq.heappush(heap, (-current, lab))
            continue
        out[lab] = current
        alive[rows[indptr[lab]:indptr[lab + 1]]] = False
    if not normalize:
        return out
    return _normalized(out) if np.any(out > 0) else out


def marginal_ftilde(dataset, normalize=True):
    """Each context gives its whole weight to its most frequent label.

    Frequency order is the marginal ``Y^T p``; ties go to the lowest index.
    """
    p = dataset.weights
    Y = dataset.label_matrix()
    f = Y.T @ p
    row_of = np.repeat(np.arange(dataset.n_points), np.diff(Y.indptr))
    lab = Y.indices
    out = np.zeros(dataset.n_labels)
    if len(lab):
        order = np.lexsort((lab, -f[lab], row_of))
        r_sorted = row_of[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = r_sorted[1:] != r_sorted[:-1]
        winners = lab[order[first]]
        np.add.at(out, winners, p[r_sorted[first]])
    if not normalize:
        return out
    return _normalized(out) if np.any(out > 0) else out


FTILDE_BUILDERS = {"greedy": greedy_ftilde, "marginal": marginal_ftilde}


def interpolated_frequency(f, ftilde, lam, gamma=DEFAULT_GAMMA):
    """Smoothed frequency blend used by the split objective.

    ``f_l(lam) = ((2-lam) f_l^min(lam,1) + (lam-1)_+ ftilde_l + gamma/L)
    / ((2-lam) sum_j f_j^min(lam,1) + (lam-1)_+ + gamma)``

    ``f`` and ``ftilde`` must be normalized.  ``0**0`` is taken as 1, so
    ``lam == 0`` gives the uniform vector whatever ``gamma`` is.
    """
    f = np.asarray(f, dtype=np.float64)
    ftilde = np.asarray(ftilde, dtype=np.float64)
    if f.shape != ftilde.shape or f.ndim != 1:
        raise ValueError(f"length mismatch: {f.shape} vs {ftilde.shape}")
    if not 0.0 <= lam <= 2.0:
        raise ValueError(f"lambda must lie in [0, 2], got {lam}")
    n = len(f)
    expo = min(lam, 1.0)
    if expo == 0.0:
        return np.full(n, 1.0 / n)
    shrunk = np.power(f, expo)
    # f is normalized, so the exponent-1 sum is 1 by precondition
    shrunk_total = 1.0 if expo == 1.0 else math.fsum(shrunk)
    hi = max(lam - 1.0, 0.0)
    num = (2.0 - lam) * shrunk + hi * ftilde + gamma / n
    den = (2.0 - lam) * shrunk_total + hi + gamma
    return num / den


def write_frequencies(vec, path):
    """One ``index value`` pair per line below an ``L`` header."""
    vec = np.asarray(vec, dtype=np.float64)
    lines = [str(len(vec))] + [f"{i} {v!r}" for i, v in enumerate(vec.tolist())]
    write_text(path, "\n".join(lines) + "\n")


def read_frequencies(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 1:
            raise ValueError(f"{path}: expected a single 'L' header")
        out = np.zeros(int(header[0]))
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'index value'")
            out[int(parts[0])] = float(parts[1])
    return out
