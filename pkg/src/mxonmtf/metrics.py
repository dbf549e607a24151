"""Partition quality: normalized mutual information and modularity density."""

from dataclasses import dataclass

import numpy as np


@dataclass
class ConfusionTable:
    counts: np.ndarray

    @property
    def rows(self):
        return self.counts.sum(axis=1)

    @property
    def cols(self):
        return self.counts.sum(axis=0)

    @property
    def total(self):
        return int(self.counts.sum())


def confusion(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.size != b.size:
        raise ValueError(f"label vectors differ in length: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("label vectors are empty")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    counts = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(counts, (ia.ravel(), ib.ravel()), 1)
    return ConfusionTable(counts)


def nmi(a, b):
    """Normalized mutual information in the form of Danon et al.

    ``-2 sum N_ij log(N_ij N / (N_i. N_.j)) / (sum N_i. log(N_i./N) + sum N_.j log(N_.j/N))``.
    Two single-cluster partitions score 1; one single-cluster partition
    against a nontrivial one scores 0.
    """
    t = confusion(a, b)
    N = float(t.total)
    ni, nj = t.rows.astype(float), t.cols.astype(float)
    if ni.size == 1 and nj.size == 1:
        return 1.0
    i, j = np.nonzero(t.counts)
    nij = t.counts[i, j].astype(float)
    num = -2.0 * np.sum(nij * np.log(nij * N / (ni[i] * nj[j])))
    den = np.sum(ni * np.log(ni / N)) + np.sum(nj * np.log(nj / N))
    if den == 0:
        return 0.0
    return float(min(max(num / den, 0.0), 1.0))


def multiplex_nmi(pred, truth, pooled=False):
    """Mean per-layer NMI, or NMI of the concatenated label vectors.

    ``truth`` may be one vector (compared with every layer) or one per layer.
    """
    pred = [np.asarray(p) for p in pred]
    if isinstance(truth, np.ndarray) and truth.ndim == 1 or (
        len(truth) and np.ndim(truth[0]) == 0
    ):
        truth = [np.asarray(truth)] * len(pred)
    truth = [np.asarray(t) for t in truth]
    if len(truth) != len(pred):
        raise ValueError(f"{len(pred)} predicted layers but {len(truth)} reference layers")
    if pooled:
        return nmi(np.concatenate(pred), np.concatenate(truth))
    return float(np.mean([nmi(p, t) for p, t in zip(pred, truth)]))


def per_layer_nmi(pred, truth):
    return [nmi(p, t) for p, t in zip(pred, truth)]


def modularity_density(a, labels):
    """``Q_D = sum_c (2 in(c) - out(c)) / |c|``.

    ``in(c)`` is the edge weight inside ``c`` (each edge once) and ``out(c)``
    the weight between ``c`` and the rest of the graph.
    """
    a = np.asarray(a, dtype=float)
    labels = np.asarray(labels).ravel()
    if labels.size != a.shape[0]:
        raise ValueError("labels must cover every node")
    _, inv = np.unique(labels, return_inverse=True)
    inv = inv.ravel()
    k = inv.max() + 1
    member = np.zeros((a.shape[0], k))
    member[np.arange(a.shape[0]), inv] = 1.0
    block = member.T @ a @ member
    inside2 = np.diag(block)
    strength = block.sum(axis=1)
    out = strength - inside2
    sizes = member.sum(axis=0)
    return float(np.sum((inside2 - out) / sizes))


def multiplex_modularity_density(net, labels):
    """Unweighted mean over layers of each layer's modularity density."""
    return float(np.mean([modularity_density(a, lab) for a, lab in zip(net.layers, labels)]))
