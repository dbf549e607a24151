"""Multiplex network container, file formats and graph transforms.

Edge-list format (UTF-8, one record per line)::

    %mxplex n=<N> L=<L>          optional header
    # comment
    <layer> <node_u> <node_v> [weight]

Ids are 0-based, weight defaults to 1.0. Labels files hold one
``<node_id> <community_id>`` pair per line.
"""

import logging
import re
from dataclasses import dataclass, field

import numpy as np

from .numerics import ShapeError

log = logging.getLogger(__name__)

_HEADER = re.compile(r"^%mxplex\s+n=(\d+)\s+L=(\d+)\s*$")


class FormatError(ValueError):
    """Malformed network or labels file; the message carries the line number."""


@dataclass
class MultiplexNetwork:
    """``L`` symmetric nonnegative ``n x n`` adjacency matrices on one node set.

    Parameters
    ----------
    layers : sequence of array_like
        Layer adjacency matrices ``A_l``.
    allow_diagonal : bool
        Skip the zero-diagonal check. Only population (expected) adjacencies
        use this.
    """

    layers: list
    allow_diagonal: bool = False
    names: dict = field(default=None, repr=False)
    _stack: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        layers = [np.array(a, dtype=float) for a in self.layers]
        if not layers:
            raise ValueError("a multiplex network needs at least one layer")
        n = layers[0].shape[0]
        for l, a in enumerate(layers):
            if a.shape != (n, n):
                raise ShapeError(f"layer {l} has shape {a.shape}, expected {(n, n)}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"layer {l} has non-finite entries")
            if np.any(a < 0):
                raise ValueError(f"layer {l} has negative entries")
            if np.max(np.abs(a - a.T), initial=0.0) > 1e-12:
                raise ValueError(f"layer {l} is not symmetric")
            if not self.allow_diagonal and np.any(np.diag(a) != 0):
                raise ValueError(f"layer {l} has a nonzero diagonal")
            a.setflags(write=False)
        self.layers = layers

    @property
    def n(self):
        return self.layers[0].shape[0]

    def stacked(self):
        """Read-only ``L x n x n`` array of the layers (built once)."""
        if self._stack is None:
            st = np.stack(self.layers)
            st.setflags(write=False)
            self._stack = st
        return self._stack

    @property
    def L(self):
        return len(self.layers)

    def __len__(self):
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    def __getitem__(self, l):
        return self.layers[l]

    def __eq__(self, other):
        if not isinstance(other, MultiplexNetwork) or other.L != self.L or other.n != self.n:
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.layers, other.layers))

    def density(self, l):
        """Fraction of node pairs joined by an edge in layer ``l`` (weights ignored)."""
        n = self.n
        if n < 2:
            return 0.0
        return float(np.count_nonzero(self.layers[l])) / (n * (n - 1))

    def is_binary(self):
        return all(np.all((a == 0) | (a == 1)) for a in self.layers)

    def max_normalized(self):
        """Copy with every layer divided by its largest weight (weights into [0, 1])."""
        out = []
        for a in self.layers:
            top = a.max(initial=0.0)
            out.append(a / top if top > 0 else a.copy())
        return MultiplexNetwork(out, self.allow_diagonal, self.names)


def canonical_labels(labels):
    """Relabel to the contiguous range ``0..K-1`` in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse.ravel()]


def load_multiplex(path, n_hint=None, normalize=False):
    """Read an edge-list file into a :class:`MultiplexNetwork`.

    Directions are merged with ``max`` and self-loops are dropped (with a
    warning). The node count is the header value, ``n_hint``, or
    ``max id + 1``, whichever is given first.
    """
    n_decl = L_decl = None
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("%"):
                m = _HEADER.match(line)
                if m is None:
                    raise FormatError(f"{path}:{lineno}: bad header {line!r}")
                n_decl, L_decl = int(m.group(1)), int(m.group(2))
                continue
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (3, 4):
                raise FormatError(f"{path}:{lineno}: expected 'layer u v [weight]', got {line!r}")
            try:
                layer, u, v = (int(p) for p in parts[:3])
                w = float(parts[3]) if len(parts) == 4 else 1.0
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
            if layer < 0 or u < 0 or v < 0:
                raise FormatError(f"{path}:{lineno}: negative id in {line!r}")
            if not np.isfinite(w) or w < 0:
                raise FormatError(f"{path}:{lineno}: weight must be finite and nonnegative, got {w}")
            if L_decl is not None and layer >= L_decl:
                raise FormatError(f"{path}:{lineno}: layer {layer} out of declared range L={L_decl}")
            if n_decl is not None and max(u, v) >= n_decl:
                raise FormatError(f"{path}:{lineno}: node id out of declared range n={n_decl}")
            records.append((layer, u, v, w))

    if n_decl is not None:
        n = n_decl
    elif n_hint is not None:
        n = int(n_hint)
    else:
        n = 1 + max((max(r[1], r[2]) for r in records), default=-1)
    if L_decl is not None:
        L = L_decl
    else:
        L = 1 + max((r[0] for r in records), default=-1)
    if L == 0:
        raise FormatError(f"{path}: no layers declared or found")
    if records and max(max(r[1], r[2]) for r in records) >= n:
        raise FormatError(f"{path}: node id exceeds n={n}")

    layers = [np.zeros((n, n)) for _ in range(L)]
    loops = 0
    for layer, u, v, w in records:
        if u == v:
            loops += 1
            continue
        a = layers[layer]
        a[u, v] = a[v, u] = max(a[u, v], w)
    if loops:
        log.warning("%s: dropped %d self-loop(s)", path, loops)
    net = MultiplexNetwork(layers)
    return net.max_normalized() if normalize else net


def save_multiplex(net, path):
    """Write ``net`` in the edge-list format; weights keep 17 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"%mxplex n={net.n} L={net.L}\n")
        for l, a in enumerate(net.layers):
            iu, ju = np.nonzero(np.triu(a, 1))
            for u, v in zip(iu, ju):
                w = a[u, v]
                if w == 1.0:
                    fh.write(f"{l} {u} {v}\n")
                else:
                    fh.write(f"{l} {u} {v} {w:.17g}\n")


def load_labels(path, n=None):
    """Read a labels file into an integer array indexed by node id."""
    pairs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected 'node community', got {line!r}")
            try:
                node, comm = int(parts[0]), int(parts[1])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-integer field in {line!r}") from None
            if node < 0 or comm < 0:
                raise FormatError(f"{path}:{lineno}: ids must be nonnegative")
            pairs[node] = comm
    size = n if n is not None else 1 + max(pairs, default=-1)
    missing = set(range(size)) - set(pairs)
    if missing:
        raise FormatError(f"{path}: no label for node(s) {sorted(missing)[:5]}")
    return np.array([pairs[i] for i in range(size)], dtype=np.int64)


def save_labels(labels, path):
    with open(path, "w", encoding="utf-8") as fh:
        for i, c in enumerate(labels):
            fh.write(f"{i} {int(c)}\n")


def degree_matrix(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"adjacency must be square, got {a.shape}")
    return np.diag(a.sum(axis=1))


def normalized_laplacian(a):
    """``D^{-1/2} (D - A) D^{-1/2}`` with zero rows/columns for isolated nodes."""
    a = np.asarray(a, dtype=float)
    d = a.sum(axis=1)
    connected = d > 0
    inv_sqrt = np.zeros_like(d)
    inv_sqrt[connected] = 1.0 / np.sqrt(d[connected])
    lap = -inv_sqrt[:, None] * a * inv_sqrt[None, :]
    # a self-loop contributes to both D and A; keep the identity form exact
    lap[np.diag_indices_from(lap)] += connected.astype(float)
    return (lap + lap.T) / 2


def aggregate_average(net):
    """Entrywise mean of the layers (the Aggregated Average network)."""
    return np.mean(np.stack(net.layers), axis=0)
