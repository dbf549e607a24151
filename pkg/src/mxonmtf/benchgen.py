"""Synthetic multiplex benchmarks with planted common and private communities.

Edges follow a degree-homogeneous planted partition: every node has expected
degree ``avg_degree``, a fraction ``1 - mu`` of it inside its own community and
``mu`` spread uniformly over the layer. Common communities are drawn once from
``n_c`` reserved nodes; in each layer a common node keeps its community with
probability ``p1`` and is otherwise moved to a uniformly chosen community of
that layer. Global community ids follow the detection output: common ids
``0..k_c-1`` then each layer's private block in layer order.
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from .factorize import FactorSet
from .multiplex import MultiplexNetwork
from .numerics import RandomStream


@dataclass
class BenchmarkSpec:
    n: int = 256
    L: int = 3
    k_c: int = 2
    k_p: list = field(default_factory=lambda: [2, 2, 2])
    mu: float = 0.1
    p1: float = 1.0
    avg_degree: float = 16.0
    n_c: int = None
    presence: list = None
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.k_p, int):
            self.k_p = [self.k_p] * self.L
        self.k_p = [int(k) for k in self.k_p]
        if len(self.k_p) != self.L:
            raise ValueError(f"k_p has {len(self.k_p)} entries for {self.L} layers")
        if self.presence is None:
            self.presence = [[True] * self.L for _ in range(self.k_c)]
        self.presence = [[bool(x) for x in row] for row in self.presence]
        if len(self.presence) != self.k_c or any(len(r) != self.L for r in self.presence):
            raise ValueError("presence must be a k_c x L boolean matrix")
        for j, row in enumerate(self.presence):
            if sum(row) < 2:
                raise ValueError(f"common community {j} must be present in at least two layers")
        if self.n_c is None:
            mean_kp = float(np.mean(self.k_p)) if self.k_p else 0.0
            self.n_c = int(round(self.n * self.k_c / (self.k_c + mean_kp))) if self.k_c else 0
        if not 0 <= self.n_c <= self.n:
            raise ValueError(f"n_c must lie in [0, n], got {self.n_c}")
        if self.k_c and self.n_c < self.k_c:
            raise ValueError("n_c must leave at least one node per common community")
        if not 0.0 <= self.mu <= 1.0 or not 0.0 <= self.p1 <= 1.0:
            raise ValueError("mu and p1 must lie in [0, 1]")
        if self.avg_degree <= 0:
            raise ValueError("avg_degree must be positive")

    def present_in(self, l):
        return [j for j in range(self.k_c) if self.presence[j][l]]

    def k_l(self):
        return [len(self.present_in(l)) + self.k_p[l] for l in range(self.L)]

    def private_offset(self, l):
        return self.k_c + sum(self.k_p[:l])

    def to_dict(self):
        return asdict(self)


@dataclass
class GroundTruth:
    labels: list

    def __getitem__(self, l):
        return self.labels[l]

    def __len__(self):
        return len(self.labels)


def _split(nodes, k):
    """Equal split of ``nodes`` into ``k`` groups, remainder to the first groups."""
    return np.array_split(np.asarray(nodes), k) if k else []


def planted_labels(spec, stream):
    """Per-layer global community labels for ``spec``."""
    rng = stream.child("partition").generator()
    n = spec.n
    perm = rng.permutation(n)
    base = np.full(n, -1, dtype=np.int64)
    for j, grp in enumerate(_split(perm[: spec.n_c], spec.k_c)):
        base[grp] = j
    labels = []
    for l in range(spec.L):
        lab = np.full(n, -1, dtype=np.int64)
        present = set(spec.present_in(l))
        keep = np.array([b in present for b in base])
        lab[keep] = base[keep]
        rest = rng.permutation(np.flatnonzero(~keep))
        off = spec.private_offset(l)
        comms = sorted(present) + [off + p for p in range(spec.k_p[l])]
        if spec.k_p[l]:
            for p, grp in enumerate(_split(rest, spec.k_p[l])):
                lab[grp] = off + p
        elif rest.size:
            if not present:
                raise ValueError(f"layer {l} has no communities")
            lab[rest] = rng.choice(sorted(present), size=rest.size)
        if spec.p1 < 1.0:
            movers = np.flatnonzero(keep)
            flip = rng.random(movers.size) >= spec.p1
            lab[movers[flip]] = rng.choice(comms, size=int(flip.sum()))
        labels.append(lab)
    return labels


def edge_probabilities(labels, mu, avg_degree):
    n = labels.size
    _, inv, sizes = np.unique(labels, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    same = inv[:, None] == inv[None, :]
    s = sizes[inv].astype(float)
    within = np.where(s > 1, (1.0 - mu) * avg_degree / np.maximum(s - 1, 1), 0.0)
    P = mu * avg_degree / (n - 1) + same * within[:, None]
    np.fill_diagonal(P, 0.0)
    return P


def generate(spec, stream=None):
    """Sample a benchmark network and its ground truth.

    Returns ``(MultiplexNetwork, GroundTruth)``.
    """
    if stream is None:
        stream = RandomStream(spec.seed)
    labels = planted_labels(spec, stream)
    layers = []
    for l, lab in enumerate(labels):
        P = edge_probabilities(lab, spec.mu, spec.avg_degree)
        top = P.max(initial=0.0)
        if top > 1.0:
            raise ValueError(
                f"layer {l}: edge probability {top:.3f} exceeds 1; lower avg_degree "
                "or use larger communities"
            )
        rng = stream.child("edges", l).generator()
        draw = np.triu(rng.random(P.shape) < P, 1).astype(float)
        layers.append(draw + draw.T)
    return MultiplexNetwork(layers), GroundTruth(labels)


@dataclass
class PopulationSBM:
    """Expected adjacency ``E(A_l) = Z_l Theta_l Z_l^T``.

    ``Z[l]`` is the ``n x (k_c + k_p[l])`` one-hot membership whose first
    ``k_c`` columns are shared across layers; ``Theta[l]`` is block diagonal.
    """

    Z: list
    Theta: list
    k_c: int

    def __post_init__(self):
        for l, (z, t) in enumerate(zip(self.Z, self.Theta)):
            if not np.all(z.sum(axis=1) == 1) or not np.all((z == 0) | (z == 1)):
                raise ValueError(f"Z_{l} rows must be one-hot")
            if not np.allclose(t, t.T) or t.min() < 0 or t.max() > 1:
                raise ValueError(f"Theta_{l} must be symmetric with entries in [0, 1]")
            kc = self.k_c
            if np.any(t[:kc, kc:] != 0):
                raise ValueError(f"Theta_{l} must be block diagonal")


def population_adjacency(p):
    layers = [z @ t @ z.T for z, t in zip(p.Z, p.Theta)]
    return MultiplexNetwork(layers, allow_diagonal=True)


def analytic_factors(p):
    """Exact zero-objective factors ``H' = Z (Z^T Z)^{-1/2}``, ``F = (Z^T Z)^{1/2} Theta (Z^T Z)^{1/2}``.

    The shared common block of ``H'`` becomes ``H``; the remaining columns and
    diagonal blocks of ``F`` give ``H_l``, ``S_l`` and ``G_l``.
    """
    kc = p.k_c
    H = Hl = None
    Hls, S, G = [], [], []
    for z, t in zip(p.Z, p.Theta):
        sizes = z.sum(axis=0)
        if np.any(sizes == 0):
            raise ValueError("every community needs at least one member")
        root = np.sqrt(sizes)
        hp = z / root
        F = root[:, None] * t * root[None, :]
        if H is None:
            H = hp[:, :kc]
        Hl = hp[:, kc:]
        Hls.append(Hl)
        S.append(F[:kc, :kc])
        G.append(F[kc:, kc:])
    return FactorSet(H.copy(), Hls, S, G)


def random_population_sbm(stream, n, L, k_c, k_p):
    """Random population SBM with common communities present in every layer."""
    rng = stream.generator() if isinstance(stream, RandomStream) else stream
    if isinstance(k_p, int):
        k_p = [k_p] * L
    total = k_c + max(k_p)
    n_c = int(round(n * k_c / total)) if k_c else 0
    perm = rng.permutation(n)
    common = np.zeros((n, k_c))
    for j, grp in enumerate(_split(perm[:n_c], k_c)):
        common[grp, j] = 1
    rest = perm[n_c:]
    Z, Theta = [], []
    theta_c = rng.uniform(0, 1, size=(k_c, k_c))
    theta_c = (theta_c + theta_c.T) / 2
    for l in range(L):
        if rest.size and not k_p[l]:
            raise ValueError(f"layer {l} has no private communities for its {rest.size} "
                             "non-common nodes")
        priv = np.zeros((n, k_p[l]))
        for p_, grp in enumerate(_split(rng.permutation(rest), k_p[l])):
            priv[grp, p_] = 1
        Z.append(np.hstack([common, priv]))
        tp = rng.uniform(0, 1, size=(k_p[l], k_p[l]))
        t = np.zeros((k_c + k_p[l],) * 2)
        t[:k_c, :k_c] = theta_c
        t[k_c:, k_c:] = (tp + tp.T) / 2
        Theta.append(t)
    return PopulationSBM(Z, Theta, k_c)


def truth_order(spec):
    from .model_order import ModelOrder

    return ModelOrder(k_l=spec.k_l(), k_c=spec.k_c, k_p=list(spec.k_p))
