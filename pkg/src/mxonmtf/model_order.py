"""Estimation of the per-layer, common and private community counts.

Per layer the count comes from an eigengap calibrated against Erdos-Renyi
graphs of the same density. Each layer is then embedded with single-layer
ONMTF, the community profiles of all layers are stacked and clustered
agglomeratively, and profiles that merge at near-identical small distances
are read as copies of one common community.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster import hierarchy

from .factorize import SolverOptions, single_layer_run
from .multiplex import normalized_laplacian
from .numerics import RandomStream, as_generator, quantile, sym_eigvals

log = logging.getLogger(__name__)

JUMP = 0.5
ZERO_DISTANCE = 1e-6
NULL_QUANTILE = 0.95
EMBED_RESTARTS = 5


@dataclass
class Linkage:
    """Merge table ``F``: rows ``(id_a, id_b, distance)``.

    Leaves are numbered ``1..m`` and the cluster formed at step ``i`` (1-based)
    gets id ``m + i``.
    """

    merges: np.ndarray

    @property
    def m(self):
        return self.merges.shape[0] + 1

    def __len__(self):
        return self.merges.shape[0]


@dataclass
class ModelOrder:
    k_l: list
    k_c: int
    k_p: list
    cut: int = None
    deltas: list = field(default=None, repr=False)

    def __post_init__(self):
        self.k_l = [int(k) for k in self.k_l]
        self.k_p = [int(k) for k in self.k_p]
        self.k_c = int(self.k_c)
        if len(self.k_l) != len(self.k_p):
            raise ValueError("k_l and k_p need one entry per layer")
        if self.k_c < 0:
            raise ValueError("k_c must be nonnegative")
        for l, (kl, kp) in enumerate(zip(self.k_l, self.k_p)):
            if not 0 <= kp <= kl:
                raise ValueError(f"layer {l}: need 0 <= k_p <= k_l, got k_p={kp}, k_l={kl}")
            if self.k_c + kp < 1:
                raise ValueError(f"layer {l} has no communities")

    @classmethod
    def from_counts(cls, k_c, k_p):
        """Order in which every common community is present in every layer."""
        k_p = list(k_p)
        return cls(k_l=[k_c + k for k in k_p], k_c=k_c, k_p=k_p)

    @property
    def L(self):
        return len(self.k_l)

    def common_in_layer(self, l):
        return min(self.k_l[l] - self.k_p[l], self.k_c)

    def record(self):
        cut = "none" if self.cut is None else self.cut
        return f"k_l={list(self.k_l)} k_c={self.k_c} k_p={list(self.k_p)} cut={cut}"

    def to_dict(self):
        return {"k_l": self.k_l, "k_c": self.k_c, "k_p": self.k_p, "cut": self.cut}


def spectrum(a):
    """``|eigenvalues|`` of the normalized adjacency ``I - L``, descending.

    Isolated nodes have a zero Laplacian row, i.e. contribute a unit value.
    """
    lap = normalized_laplacian(a)
    return np.sort(np.abs(sym_eigvals(np.eye(lap.shape[0]) - lap)))[::-1]


def _gaps(values):
    return values[:-1] - values[1:]


def er_graph(rng, n, density):
    upper = np.triu(rng.random((n, n)) < density, 1).astype(float)
    return upper + upper.T


def null_max_gaps(n, density, stream, trials=50):
    """Largest non-trivial spectral gap of ``trials`` Erdos-Renyi graphs."""
    if n < 3:
        raise ValueError(f"null model needs n >= 3, got {n}")
    if not 0 < density < 1:
        raise ValueError(f"density must lie in (0, 1), got {density}")
    rng = as_generator(stream)
    out = np.empty(trials)
    for t in range(trials):
        gaps = _gaps(spectrum(er_graph(rng, n, density)))
        out[t] = gaps[1:].max()
    return out


def null_threshold(n, density, stream, trials=50, q=NULL_QUANTILE):
    """``delta``: the ``q`` quantile of the null model's largest gap beyond the first."""
    return quantile(null_max_gaps(n, density, stream, trials), q)


def estimate_k_layer(a, delta, rule="gap"):
    """Community count of one layer from its spectral gaps.

    Gaps are ``|lambda_i| - |lambda_{i+1}|`` over the normalized adjacency
    spectrum. With ``rule="gap"`` the first gap, which always separates the
    trivial eigenvalue, is skipped as in the null calibration; the count is
    the position of the largest remaining gap when it exceeds ``delta``,
    otherwise the layer is one community.

    ``rule="literal"`` returns the smallest ``k`` such that every gap at
    position ``i > k`` exceeds ``delta``. When no gap does, only ``k = n - 1``
    satisfies the condition (vacuously).
    """
    values = spectrum(a)
    if values.size < 3:
        return 1
    if rule == "literal":
        low = np.flatnonzero(_gaps(values) <= delta)
        return max(int(low[-1]) + 1, 1) if low.size else 1
    if rule != "gap":
        raise ValueError(f"unknown eigengap rule {rule!r}")
    gaps = _gaps(values)[1:]
    i = int(np.argmax(gaps))
    return i + 2 if gaps[i] > delta else 1


def estimate_k(net, stream, trials=50):
    """Per-layer counts and thresholds; ``delta`` uses a density-matched null per layer."""
    ks, deltas = [], []
    for l, a in enumerate(net.layers):
        dens = min(max(net.density(l), 1.0 / (net.n * (net.n - 1))), 1 - 1e-9)
        delta = null_threshold(net.n, dens, stream.child("null", l), trials)
        ks.append(estimate_k_layer(a, delta))
        deltas.append(delta)
    return ks, deltas


def embed_layer(a, k, stream, opts=None, restarts=EMBED_RESTARTS):
    """Single-layer ONMTF membership ``U`` with the lowest objective over ``restarts`` fits."""
    best = None
    for r in range(restarts):
        run = single_layer_run(a, int(k), stream.child(r), opts)
        if best is None or run.final_objective < best.final_objective:
            best = run
    return best.factors.Hl[0]


def embed_layers(net, k_l, stream, normalize=True, opts=None, restarts=EMBED_RESTARTS):
    """Stack the transposed single-layer ONMTF factors into ``X`` (``sum k_l x n``).

    Row ``offset_l + j`` is layer ``l``'s community-``j`` profile over nodes,
    scaled to unit norm when ``normalize`` is set.
    """
    rows = []
    for l, (a, k) in enumerate(zip(net.layers, k_l)):
        rows.append(embed_layer(a, k, stream.child("embed", l), opts, restarts).T)
    X = np.vstack(rows)
    if normalize:
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        X = X / np.where(norms > 0, norms, 1.0)
    return X


def linkage(x, method="single"):
    """Agglomerative clustering of the rows of ``x`` with Euclidean distance."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        raise ValueError("linkage needs at least two rows")
    if method not in ("single", "average", "complete"):
        raise ValueError(f"unknown linkage method {method!r}")
    Z = hierarchy.linkage(x, method=method, metric="euclidean")
    F = np.column_stack([Z[:, 0] + 1, Z[:, 1] + 1, Z[:, 2]])
    return Linkage(F)


def _relative_jump(prev, cur):
    # a run of zero distances means exact duplicates; keep scanning
    return (cur - prev) / prev if prev > 0 else 0.0


def count_common(F, k_l, rule="prose", zero_tol=ZERO_DISTANCE):
    """Read ``k_c`` and the private counts off a merge table.

    ``rule="prose"`` scans merges while the merge distance grows by less than
    50% step over step and cuts before the first larger jump; leaf-leaf merges
    below the cut are common communities. A lone first merge is not enough to
    establish a run, so a jump at the second merge leaves nothing below the
    cut. ``rule="literal"`` counts leaf-leaf merges while the jump condition
    holds and stops at the first merge that does not jump.

    Merge distances below ``zero_tol`` count as exact duplicates (distance 0),
    and a step away from a zero distance is never a jump.
    """
    if isinstance(F, Linkage):
        F = F.merges
    F = np.asarray(F, dtype=float)
    k_l = [int(k) for k in k_l]
    m = sum(k_l)
    if F.shape != (m - 1, 3):
        raise ValueError(f"merge table has shape {F.shape}, expected {(m - 1, 3)} for m={m}")
    leaf_pair = np.maximum(F[:, 0], F[:, 1]) <= m
    dist = np.where(F[:, 2] < zero_tol, 0.0, F[:, 2])

    if rule == "prose":
        cut = max(m - 2, 0)
        for i in range(2, m - 1):
            if _relative_jump(dist[i - 2], dist[i - 1]) >= JUMP:
                cut = i - 1
                break
        if cut == 1:
            cut = 0
        k_c = int(np.count_nonzero(leaf_pair[:cut]))
    elif rule == "literal":
        k_c = 0
        cut = max(m - 2, 0)
        for i in range(2, m - 1):
            if _relative_jump(dist[i - 2], dist[i - 1]) >= JUMP:
                k_c += int(leaf_pair[i - 1])
            else:
                cut = i
                break
    else:
        raise ValueError(f"unknown cut rule {rule!r}")

    below = F[:cut, :2].ravel()
    k_p = []
    start = 1
    for k in k_l:
        merged = np.count_nonzero((below >= start) & (below <= start + k - 1))
        k_p.append(k - merged)
        start += k
    for l, kp in enumerate(k_p):
        if k_c + kp < 1:
            raise ValueError(f"cut rule {rule!r} leaves layer {l} without communities "
                             f"(k_c=0, all {k_l[l]} leaves merged below cut {cut})")
    return ModelOrder(k_l=k_l, k_c=k_c, k_p=k_p, cut=cut)


def estimate_order(net, stream, trials=50, cut_rule="prose", method="single",
                   normalize=True, opts=None, embed_restarts=EMBED_RESTARTS):
    """Full model-order pipeline: eigengap counts, embedding, clustering, cut."""
    if not isinstance(stream, RandomStream):
        stream = RandomStream(int(stream))
    opts = SolverOptions.coerce(opts)
    k_l, deltas = estimate_k(net, stream, trials)
    if net.L < 2 or sum(k_l) < 2:
        order = ModelOrder(k_l=k_l, k_c=0, k_p=list(k_l), cut=0)
    else:
        X = embed_layers(net, k_l, stream, normalize=normalize, opts=opts,
                         restarts=embed_restarts)
        order = count_common(linkage(X, method), k_l, rule=cut_rule)
    order.deltas = deltas
    log.info("estimated order %s", order.record())
    return order
