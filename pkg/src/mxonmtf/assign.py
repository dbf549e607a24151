"""Per-layer labels from converged factors.

For each layer, decide which common communities (columns of ``H``) are
present, then give every node either a common id or a private id. Common
communities use ids ``0..k_c-1``; layer ``l``'s private communities follow
at ``k_c + sum(k_p[:l])``.
"""

from dataclasses import dataclass

import numpy as np

SCORE_EPS = 1e-12


@dataclass
class CommonPresence:
    """Per layer: indices of the common communities judged present and their scores."""

    columns: list
    scores: list
    members: list

    def matrix(self, k_c):
        """``L x k_c`` boolean presence matrix."""
        out = np.zeros((len(self.columns), k_c), dtype=bool)
        for l, cols in enumerate(self.columns):
            out[l, cols] = True
        return out


@dataclass
class LabeledPartition:
    labels: list
    k_c: int
    k_p: list

    def private_range(self, l):
        lo = self.k_c + sum(self.k_p[:l])
        return lo, lo + self.k_p[l]

    def __getitem__(self, l):
        return self.labels[l]

    def __len__(self):
        return len(self.labels)


def _density_score(a, member, rule):
    n = a.shape[0]
    m = int(member.sum())
    if m <= 1:
        return 0.0
    within = float(member @ a @ member)
    rest = float(a.sum()) - within
    if rule == "legacy":
        # literal form: rest density over within density, normalizers swapped
        num = rest / (m * (m - 1))
        den = within / (m * (n - m)) if m < n else 0.0
        return num / (den + SCORE_EPS)
    inside = within / (m * (m - 1))
    outside = rest / (m * (n - m)) if m < n else 0.0
    return inside / (outside + SCORE_EPS)


def common_presence(net, f, order, rule="corrected"):
    """Which common communities each layer contains.

    Nodes are first assigned to their strongest column of ``[H | H_l]``; each
    common column is scored on ``A_l`` by its within-community edge density
    relative to the density of the remaining edges, and the
    ``k_l - k_p[l]`` best-scoring columns are kept. ``rule="legacy"`` uses
    the inverted ratio and keeps ``k_p[l]`` columns.
    """
    if rule not in ("corrected", "legacy"):
        raise ValueError(f"unknown presence rule {rule!r}")
    k_c = f.kc
    columns, scores, members = [], [], []
    for l, a in enumerate(net.layers):
        if k_c == 0:
            columns.append([])
            scores.append(np.zeros(0))
            members.append(np.zeros((net.n, 0), dtype=bool))
            continue
        W = np.hstack([f.H, f.Hl[l]])
        idx = np.argmax(W, axis=1)
        binary = idx[:, None] == np.arange(k_c)[None, :]
        q = np.array([_density_score(a, binary[:, j].astype(float), rule) for j in range(k_c)])
        keep = order.k_p[l] if rule == "legacy" else order.common_in_layer(l)
        keep = max(0, min(keep, k_c))
        ranked = np.argsort(-q, kind="stable")
        columns.append(sorted(int(j) for j in ranked[:keep]))
        scores.append(q)
        members.append(binary)
    return CommonPresence(columns, scores, members)


def final_labels(net, f, presence, order=None):
    """Per-layer global labels.

    A node takes common id ``j*`` (its strongest present common column) when
    that membership value exceeds its strongest private value, otherwise its
    strongest private column offset into the layer's id range. Ties go to the
    lowest column.
    """
    k_c = f.kc
    k_p = f.kp
    labels = []
    for l in range(net.L):
        cols = presence.columns[l]
        Hc = f.H[:, cols]
        Hl = f.Hl[l]
        offset = k_c + sum(k_p[:l])
        n = net.n
        if Hl.shape[1]:
            priv_best = Hl.max(axis=1)
            priv_id = offset + np.argmax(Hl, axis=1)
        else:
            priv_best = np.full(n, -np.inf)
            priv_id = np.full(n, -1)
        if Hc.shape[1]:
            common_best = Hc.max(axis=1)
            common_id = np.asarray(cols)[np.argmax(Hc, axis=1)]
        elif Hl.shape[1] == 0:
            # nothing present and nothing private: fall back to all common columns
            common_best = f.H.max(axis=1)
            common_id = np.argmax(f.H, axis=1)
        else:
            common_best = np.full(n, -np.inf)
            common_id = np.full(n, -1)
        lab = np.where(common_best > priv_best, common_id, priv_id)
        labels.append(lab.astype(np.int64))
    return LabeledPartition(labels, k_c, list(k_p))


def label_layers(net, f, order, rule="corrected"):
    presence = common_presence(net, f, order, rule)
    return final_labels(net, f, presence, order), presence
