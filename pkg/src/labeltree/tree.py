"""Label trees: recursive construction, Huffman baseline, depth statistics, text format."""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._atomic import write_text
from .cluster import SplitConfig, combined_split
from .freq import InterpolationParams
from .linear import NodeClassifier

FORMAT_TAG = "PLT v1"


class TreeFormatError(ValueError):
    pass


@dataclass
class TreeNode:
    id: int
    parent: int
    depth: int
    children: tuple | None = None
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    # internal: [left child, right child]; leaf: one per bucket label
    classifiers: list | None = None

    @property
    def is_leaf(self):
        return self.children is None


@dataclass
class LabelTree:
    nodes: list
    n_labels: int
    leaf_size: int
    seed: int = 0
    params: InterpolationParams = field(default_factory=lambda: InterpolationParams(0.0, 0.0))
    root_id: int = 0

    @property
    def root(self):
        return self.nodes[self.root_id]

    def leaves(self):
        return [node for node in self.nodes if node.is_leaf]

    def internal_nodes(self):
        return [node for node in self.nodes if not node.is_leaf]

    def label_depths(self):
        """Depth of the leaf holding each label (root depth is 0)."""
        depths = np.full(self.n_labels, -1, dtype=np.int64)
        for leaf in self.leaves():
            depths[leaf.labels] = leaf.depth
        return depths

    def leaf_of_label(self):
        where = np.full(self.n_labels, -1, dtype=np.int64)
        for leaf in self.leaves():
            where[leaf.labels] = leaf.id
        return where

    def subtree_labels(self, node_id):
        out = []
        stack = [node_id]
        while stack:
            node = self.nodes[stack.pop()]
            if node.is_leaf:
                out.append(node.labels)
            else:
                stack.extend(node.children)
        return np.sort(np.concatenate(out)) if out else np.zeros(0, dtype=np.int64)

    @property
    def is_trained(self):
        return all(node.classifiers is not None for node in self.nodes)

    def structure_equal(self, other):
        if len(self.nodes) != len(other.nodes) or self.n_labels != other.n_labels:
            return False
        for a, b in zip(self.nodes, other.nodes):
            if (a.id, a.parent, a.depth, a.children) != (b.id, b.parent, b.depth, b.children):
                return False
            if not np.array_equal(a.labels, b.labels):
                return False
        return True


def _node_seed(seed, path):
    """Per-node RNG keyed on the tree seed and the root-to-node bit path."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path)))


def build_tree(V, f, ftilde, params, leaf_size=100, seed=0, max_iterations=50,
               rel_tolerance=1e-4, threads=1):
    """Split label sets recursively until each node holds at most ``leaf_size`` labels.

    Nodes are numbered breadth-first.  Each split draws from its own RNG
    stream keyed on ``(seed, path)``, so the result does not depend on the
    number of worker threads.
    """
    V = sp.csr_matrix(V)
    n_labels = V.shape[0]
    if n_labels < 1:
        raise ValueError("need at least one label")
    if leaf_size < 1:
        raise ValueError("leaf_size must be >= 1")
    f = np.asarray(f, dtype=np.float64)
    ftilde = np.asarray(ftilde, dtype=np.float64)
    config = SplitConfig(params, max_iterations, rel_tolerance, seed)

    def split(item):
        labels, path = item
        res = combined_split(V[labels], f[labels], ftilde[labels], config,
                             rng=_node_seed(seed, path))
        return labels[res.left], labels[res.right]

    nodes = [TreeNode(0, -1, 0)]
    frontier = [(0, np.arange(n_labels, dtype=np.int64), ())]
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        while frontier:
            to_split = []
            for node_id, labels, path in frontier:
                if len(labels) <= leaf_size:
                    nodes[node_id].labels = labels
                else:
                    to_split.append((node_id, labels, path))
            items = [(labels, path) for _, labels, path in to_split]
            results = list(pool.map(split, items)) if pool else [split(it) for it in items]
            frontier = []
            for (node_id, _, path), (left, right) in zip(to_split, results):
                parent = nodes[node_id]
                ids = []
                for bit, part in ((0, left), (1, right)):
                    child = TreeNode(len(nodes), node_id, parent.depth + 1)
                    nodes.append(child)
                    ids.append(child.id)
                    frontier.append((child.id, np.sort(part), path + (bit,)))
                parent.children = tuple(ids)
    finally:
        if pool:
            pool.shutdown()
    return LabelTree(nodes, n_labels, leaf_size, seed, params)


def huffman_tree(fvec):
    """Bottom-up Huffman tree with one label per leaf.

    Merges always take the two lightest subtrees; ties go to the subtree
    whose smallest label index is lowest.
    """
    fvec = np.asarray(fvec, dtype=np.float64)
    n = len(fvec)
    if n < 1:
        raise ValueError("need at least one label")
    if math.fsum(fvec) <= 0:
        raise ValueError("frequencies carry no mass")
    # heap entries: (mass, smallest label, key); key indexes `kids`
    heap = [(float(fvec[i]), i, i) for i in range(n)]
    heapq.heapify(heap)
    kids = {}
    next_key = n
    while len(heap) > 1:
        m1, lo1, k1 = heapq.heappop(heap)
        m2, lo2, k2 = heapq.heappop(heap)
        kids[next_key] = (k1, k2)
        heapq.heappush(heap, (m1 + m2, min(lo1, lo2), next_key))
        next_key += 1
    root_key = heap[0][2]

    nodes = []
    queue = [(root_key, -1, 0)]
    head = 0
    pending = {}
    while head < len(queue):
        key, parent, depth = queue[head]
        head += 1
        node = TreeNode(len(nodes), parent, depth)
        nodes.append(node)
        if parent >= 0:
            pending.setdefault(parent, []).append(node.id)
        if key < n:
            node.labels = np.array([key], dtype=np.int64)
        else:
            for child_key in kids[key]:
                queue.append((child_key, node.id, depth + 1))
    for parent, ids in pending.items():
        nodes[parent].children = tuple(ids)
    return LabelTree(nodes, n, 1, 0, InterpolationParams(2.0, 0.0))


def tree_expected_depth(tree, fvec):
    """``sum_l f_l * depth(l)``."""
    fvec = np.asarray(fvec, dtype=np.float64)
    depths = tree.label_depths()
    if len(fvec) != tree.n_labels:
        raise ValueError(f"{len(fvec)} frequencies for a tree over {tree.n_labels} labels")
    if np.any(depths < 0):
        raise ValueError(f"label {int(np.flatnonzero(depths < 0)[0])} is missing from the tree")
    return float(np.dot(fvec, depths))


# --- text format -------------------------------------------------------------

def _format_classifier(clf):
    feats = " ".join(f"{i}:{v!r}" for i, v in zip(clf.indices.tolist(), clf.values.tolist()))
    head = f"{clf.trained_on} {clf.bias!r}"
    return f"{head} {feats}" if feats else head


def _parse_classifier(text, where):
    parts = text.split()
    if len(parts) < 2:
        raise TreeFormatError(f"{where}: classifier row needs 'count bias'")
    try:
        trained_on = int(parts[0])
        bias = float(parts[1])
        idx = []
        vals = []
        for tok in parts[2:]:
            i, _, v = tok.partition(":")
            idx.append(int(i))
            vals.append(float(v))
    except ValueError:
        raise TreeFormatError(f"{where}: malformed classifier row") from None
    return NodeClassifier(np.asarray(idx, dtype=np.int64), np.asarray(vals, dtype=np.float64),
                          bias, trained_on)


def serialize_tree(tree):
    p = tree.params
    lines = [f"{FORMAT_TAG} {tree.n_labels} {tree.leaf_size} {tree.seed} {p.lam!r} {p.gamma!r}"]
    for node in tree.nodes:
        kind = "leaf" if node.is_leaf else "internal"
        left, right = node.children if node.children else (-1, -1)
        labels = " ".join(str(l) for l in node.labels.tolist())
        clfs = "" if node.classifiers is None else " ; ".join(
            _format_classifier(c) for c in node.classifiers)
        lines.append(f"{node.id} {kind} {node.parent} {left} {right} | {labels} | {clfs}")
    return "\n".join(lines) + "\n"


def deserialize_tree(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TreeFormatError("empty tree text")
    head = lines[0].split()
    if len(head) != 7 or " ".join(head[:2]) != FORMAT_TAG:
        raise TreeFormatError(f"bad header {lines[0]!r}")
    try:
        n_labels, leaf_size, seed = int(head[2]), int(head[3]), int(head[4])
        params = InterpolationParams(float(head[5]), float(head[6]))
    except ValueError as exc:
        raise TreeFormatError(f"bad header {lines[0]!r}: {exc}") from None

    raw = []
    for ln in lines[1:]:
        fields = ln.split("|")
        if len(fields) != 3:
            raise TreeFormatError(f"node line needs three '|' fields: {ln!r}")
        meta = fields[0].split()
        if len(meta) != 5 or meta[1] not in ("leaf", "internal"):
            raise TreeFormatError(f"bad node header {fields[0]!r}")
        try:
            nid, parent, left, right = int(meta[0]), int(meta[2]), int(meta[3]), int(meta[4])
            labels = np.asarray([int(t) for t in fields[1].split()], dtype=np.int64)
        except ValueError:
            raise TreeFormatError(f"non-integer field in {ln!r}") from None
        where = f"node {nid}"
        clf_text = fields[2].strip()
        if not clf_text:
            clfs = None
        else:
            clfs = [_parse_classifier(part, where) for part in clf_text.split(";")]
        raw.append((nid, meta[1], parent, left, right, labels, clfs))

    n_nodes = len(raw)
    nodes = []
    for pos, (nid, kind, parent, left, right, labels, clfs) in enumerate(raw):
        if nid != pos:
            raise TreeFormatError(f"node ids must run 0..{n_nodes - 1}; got {nid} at {pos}")
        if kind == "internal":
            for c in (left, right):
                if not 0 <= c < n_nodes:
                    raise TreeFormatError(f"node {nid}: missing child {c}")
            if len(labels):
                raise TreeFormatError(f"node {nid}: internal node lists labels")
            children = (left, right)
        else:
            if (left, right) != (-1, -1):
                raise TreeFormatError(f"node {nid}: leaf with children")
            if not len(labels):
                raise TreeFormatError(f"node {nid}: empty leaf")
            children = None
        nodes.append(TreeNode(nid, parent, 0, children, labels, clfs))

    if nodes[0].parent != -1:
        raise TreeFormatError("node 0 must be the root")
    seen = np.zeros(n_nodes, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        node = nodes[stack.pop()]
        if node.children is None:
            continue
        for c in node.children:
            if seen[c]:
                raise TreeFormatError(f"node {node.id}: child {c} reached twice")
            if nodes[c].parent != node.id:
                raise TreeFormatError(f"node {c}: parent {nodes[c].parent} != {node.id}")
            seen[c] = True
            nodes[c].depth = node.depth + 1
            stack.append(c)
    if not seen.all():
        raise TreeFormatError(f"node {int(np.flatnonzero(~seen)[0])} is unreachable")

    covered = np.zeros(n_labels, dtype=np.int64)
    for node in nodes:
        if node.is_leaf:
            if node.labels.min() < 0 or node.labels.max() >= n_labels:
                raise TreeFormatError(f"node {node.id}: label out of range")
            np.add.at(covered, node.labels, 1)
    if np.any(covered != 1):
        bad = int(np.flatnonzero(covered != 1)[0])
        raise TreeFormatError(f"label {bad} covered {covered[bad]} times")
    return LabelTree(nodes, n_labels, leaf_size, seed, params)


def save_tree(tree, path):
    write_text(path, serialize_tree(tree))


def load_tree(path):
    with open(path, encoding="utf-8") as fh:
        return deserialize_tree(fh.read())
