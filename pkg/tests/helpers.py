import numpy as np

from labeltree.data import make_dataset


def contexts(label_sets, n_labels=None, p=None):
    """Dataset with one dummy feature per row and the given label sets."""
    n = len(label_sets)
    if n_labels is None:
        n_labels = 1 + max((max(s) for s in label_sets if s), default=0)
    return make_dataset(np.ones((n, 1)), label_sets, n_labels, p)
