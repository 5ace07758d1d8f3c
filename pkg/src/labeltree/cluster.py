"""Binary label splits under the frequency/similarity trade-off objective.

A split assigns each label ``l`` of a node to the left (``alpha_l = +1``) or
right (``alpha_l = -1``) child.  For a trade-off ``lam`` in [0, 2] the
relaxed objective is

    sum_l f_l(lam) (2 - lam) ((1 + a_l)/2 v_l.mu+ + (1 - a_l)/2 v_l.mu-)
          + a_l (lam - 1)_+ f_l(lam)^2

subject to ``|mu+| = |mu-| = 1``, ``a in [-1, 1]^L`` and ``a.f(lam) = 0``.
It is maximized by alternating between the centroids and the assignment;
the assignment step is a linear program solved exactly by a sort.
``lam = 0`` is balanced spherical 2-means, ``lam = 1`` frequency-weighted
2-means and ``lam = 2`` a Fano code split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .freq import InterpolationParams, interpolated_frequency

# relative slack when deciding that the running mass has reached one half
HALF_MASS_SLACK = 1e-13
DENSE_LIMIT = 1 << 18


@dataclass(frozen=True)
class SplitConfig:
    params: InterpolationParams
    max_iterations: int = 50
    rel_tolerance: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.rel_tolerance > 0:
            raise ValueError("rel_tolerance must be positive")


@dataclass
class ClusterSplit:
    alpha: np.ndarray
    mu_plus: np.ndarray
    mu_minus: np.ndarray
    flam: np.ndarray
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    @property
    def left(self):
        return np.flatnonzero(self.alpha > 0)

    @property
    def right(self):
        return np.flatnonzero(self.alpha < 0)


def _restrict(vec):
    """Renormalize a restricted frequency vector; no mass means uniform."""
    vec = np.asarray(vec, dtype=np.float64)
    total = math.fsum(vec)
    if total <= 0:
        return np.full(len(vec), 1.0 / len(vec))
    return vec / total


def node_frequency(f_node, ftilde_node, params):
    """``f(lam)`` for the labels of one node, from the restricted ``f`` and ``ftilde``."""
    return interpolated_frequency(_restrict(f_node), _restrict(ftilde_node),
                                  params.lam, params.gamma)


def _descending(keys):
    # stable, so equal keys keep ascending label order
    return np.argsort(-np.asarray(keys, dtype=np.float64), kind="stable")


def _lp_ratio(beta, flam):
    ratio = np.empty(len(beta))
    pos = flam > 0
    ratio[pos] = beta[pos] / flam[pos]
    # massless labels cost nothing: take them exactly when beta > 0
    ratio[~pos] = np.where(beta[~pos] > 0, np.inf, -np.inf)
    return ratio


def solve_alpha_lp(beta, flam, ratio=None):
    """Maximize ``alpha.beta`` over ``alpha in [-1, 1]^L`` with ``alpha.flam = 0``.

    Labels are visited by decreasing ``beta/flam`` and switched to +1 until
    the signed mass turns positive; the label that crosses is set
    fractionally so the constraint holds with equality.  ``ratio`` may be
    given when ``beta/flam`` is available in closed form.
    """
    beta = np.asarray(beta, dtype=np.float64)
    flam = np.asarray(flam, dtype=np.float64)
    if beta.shape != flam.shape or beta.ndim != 1:
        raise ValueError(f"length mismatch: {beta.shape} vs {flam.shape}")
    if np.any(flam < 0) or not np.all(np.isfinite(flam)):
        raise ValueError("frequencies must be finite and nonnegative")
    total = math.fsum(flam)
    if total <= 0:
        raise ValueError("frequencies carry no mass")
    if ratio is None:
        ratio = _lp_ratio(beta, flam)
    order = _descending(ratio)
    return _fill_by_order(order, flam, total)


def _fill_by_order(order, flam, total):
    alpha = -np.ones(len(flam))
    cum = np.cumsum(flam[order])
    t = int(np.flatnonzero(2.0 * cum > total)[0])
    alpha[order[:t]] = 1.0
    before = cum[t - 1] if t > 0 else 0.0
    gap = total - 2.0 * before
    ft = flam[order[t]]
    if gap <= HALF_MASS_SLACK * total:
        alpha[order[t]] = -1.0
    else:
        alpha[order[t]] = (gap - ft) / ft
    return alpha


def fano_partition(fvec):
    """Classic Fano split of one node: returns alpha in {-1, +1}.

    Labels sorted by decreasing frequency go left until the left mass
    reaches half of the node mass; the rest go right.
    """
    fvec = np.asarray(fvec, dtype=np.float64)
    n = len(fvec)
    if n < 2:
        raise ValueError("a split needs at least two labels")
    total = math.fsum(fvec)
    if total <= 0:
        raise ValueError("frequencies carry no mass")
    order = _descending(fvec)
    cum = np.cumsum(fvec[order])
    j = int(np.flatnonzero(2.0 * cum >= total * (1.0 - HALF_MASS_SLACK))[0])
    j = min(j, n - 2)
    alpha = -np.ones(n, dtype=np.int8)
    alpha[order[:j + 1]] = 1
    return alpha


def update_centroids(alpha, flam, V, prev_plus=None, prev_minus=None):
    """Frequency-weighted cluster centers, scaled to unit norm.

    A side with zero weighted sum keeps its previous centroid.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    flam = np.asarray(flam, dtype=np.float64)
    out = []
    for w, prev in ((flam * (1.0 + alpha), prev_plus), (flam * (1.0 - alpha), prev_minus)):
        mu = np.asarray(V.T @ w).ravel()
        norm = np.linalg.norm(mu)
        if norm > 0:
            out.append(mu / norm)
        else:
            out.append(np.zeros(V.shape[1]) if prev is None else prev)
    return out[0], out[1]


def split_objective(alpha, mu_plus, mu_minus, flam, V, lam):
    alpha = np.asarray(alpha, dtype=np.float64)
    sim_p = np.asarray(V @ mu_plus).ravel()
    sim_m = np.asarray(V @ mu_minus).ravel()
    sim = 0.5 * ((1.0 + alpha) * sim_p + (1.0 - alpha) * sim_m)
    hi = max(lam - 1.0, 0.0)
    return float((2.0 - lam) * np.dot(flam, sim) + hi * np.dot(alpha, flam * flam))


def _round(alpha, order):
    """Snap the fractional entry to +1 and keep both sides non-empty."""
    rounded = np.where(alpha > -1.0, 1, -1).astype(np.int8)
    if np.all(rounded > 0):
        rounded[order[-1]] = -1
    elif np.all(rounded < 0):
        rounded[order[0]] = 1
    return rounded


def _initial_pair(V, rng, max_tries=64):
    """Two random labels, preferring a pair with distinct embeddings."""
    perm = rng.permutation(V.shape[0])
    cands = perm[:max_tries + 1]
    sub = V[cands]
    if sp.issparse(sub):
        diff = sub - sp.csr_matrix(np.ones((len(cands), 1))) @ sub[0]
        diff.eliminate_zeros()
        distinct = np.flatnonzero(diff.getnnz(axis=1))
    else:
        distinct = np.flatnonzero(np.any(sub != sub[0], axis=1))
    second = cands[distinct[0]] if len(distinct) else perm[1]
    pair = V[[perm[0], second]]
    pair = pair.toarray() if sp.issparse(pair) else np.array(pair)
    return pair[0], pair[1]


def combined_split(V, f_node, ftilde_node, config, rng=None):
    """Split one node's labels under the interpolated objective.

    ``V`` holds the node's label embeddings (rows, unit or zero norm) and
    ``f_node``/``ftilde_node`` their restricted frequencies.  Iterations run
    until the relative objective gain drops below ``config.rel_tolerance``;
    an iteration whose rounded assignment lowers the objective is discarded,
    so the trace never decreases.
    """
    V = sp.csr_matrix(V)
    n = V.shape[0]
    if n < 2:
        raise ValueError("a split needs at least two labels")
    if n * V.shape[1] <= DENSE_LIMIT:
        # small nodes: dense products avoid per-call sparse overhead
        V = V.toarray()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    lam = config.params.lam
    hi = max(lam - 1.0, 0.0)
    flam = node_frequency(f_node, ftilde_node, config.params)
    total = math.fsum(flam)

    heavy = int(np.argmax(flam))
    if flam[heavy] >= total * (1.0 - HALF_MASS_SLACK):
        alpha = -np.ones(n, dtype=np.int8)
        alpha[heavy] = 1
        mu_p, mu_m = update_centroids(alpha, flam, V)
        obj = split_objective(alpha, mu_p, mu_m, flam, V, lam)
        return ClusterSplit(alpha, mu_p, mu_m, flam, [obj], 1, True)

    mu_p, mu_m = _initial_pair(V, rng)
    alpha = None
    trace = []
    converged = False
    for _ in range(config.max_iterations):
        proj = np.asarray(V @ (mu_p - mu_m)).ravel()
        ratio = 0.5 * (2.0 - lam) * proj + hi * flam
        beta = flam * ratio
        frac = solve_alpha_lp(beta, flam, ratio=ratio)
        cand = _round(frac, _descending(ratio))
        cand_p, cand_m = update_centroids(cand, flam, V, mu_p, mu_m)
        obj = split_objective(cand, cand_p, cand_m, flam, V, lam)
        if trace and obj < trace[-1]:
            converged = True
            break
        gain = obj - trace[-1] if trace else math.inf
        alpha, mu_p, mu_m = cand, cand_p, cand_m
        trace.append(obj)
        if gain < config.rel_tolerance * max(abs(trace[-1]), 1e-12):
            converged = True
            break
    return ClusterSplit(alpha, mu_p, mu_m, flam, trace, len(trace), converged)
