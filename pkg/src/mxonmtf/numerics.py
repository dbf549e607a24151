"""Dense matrix kernel shared by every other module.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. The helpers
here add the shape/symmetry checks and orderings the rest of the package
relies on, plus a seeded random stream that is stable across platforms.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix.

    ``eigenvalues`` are sorted by descending absolute value and column ``i`` of
    ``eigenvectors`` pairs with ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


@dataclass(frozen=True)
class RandomStream:
    """Deterministic random stream addressed by ``(master_seed, stream_index)``.

    Draws come from a Philox counter-based generator keyed through a
    ``SeedSequence``, so a given address produces the same sequence on any
    platform and regardless of how work is spread over executors. Use
    :meth:`child` to derive independent sub-streams (per layer, per trial).
    """

    master_seed: int
    stream_index: int = 0
    path: tuple = field(default=())

    def child(self, *keys):
        keys = tuple(_key(k) for k in keys)
        return RandomStream(self.master_seed, self.stream_index, self.path + keys)

    def generator(self):
        """Fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed) & (2**64 - 1),
            spawn_key=(int(self.stream_index),) + self.path,
        )
        return np.random.Generator(np.random.Philox(seq))


def _key(k):
    if isinstance(k, (int, np.integer)):
        return int(k)
    # stable across interpreter runs, unlike hash()
    return int.from_bytes(hashlib.blake2b(str(k).encode("utf-8"), digest_size=4).digest(), "little")


def as_generator(stream):
    """Accept a :class:`RandomStream`, a ``Generator`` or an int seed."""
    if isinstance(stream, RandomStream):
        return stream.generator()
    if isinstance(stream, np.random.Generator):
        return stream
    return RandomStream(int(stream)).generator()


def matmul(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = a @ b
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("matrix product produced non-finite values")
    return out


def check_symmetric(a, atol=1e-10, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > atol * scale:
        raise ValueError(f"{name} is not symmetric within {atol}")
    return a


def sym_eig(a):
    """Eigendecomposition of a real symmetric matrix.

    LAPACK ``syevd`` (Householder tridiagonalisation followed by a
    divide-and-conquer/QL solve) does the work. Eigenpairs are returned
    ordered by descending ``|lambda|``; equal magnitudes put the positive
    eigenvalue first.
    """
    a = check_symmetric(a)
    w, v = np.linalg.eigh((a + a.T) / 2)
    order = np.lexsort((-w, -np.abs(w)))
    return EigenDecomposition(w[order], v[:, order])


def sym_eigvals(a):
    """Eigenvalues only, in the same order as :func:`sym_eig`."""
    a = check_symmetric(a)
    w = np.linalg.eigvalsh((a + a.T) / 2)
    return w[np.lexsort((-w, -np.abs(w)))]


def quantile(xs, q):
    """Linear-interpolation quantile with inclusive endpoints."""
    xs = np.asarray(xs, dtype=float).ravel()
    if xs.size == 0:
        raise ValueError("quantile of an empty sample")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    return float(np.quantile(xs, q, method="linear"))


def rand_matrix(stream, rows, cols, lo=0.0, hi=1.0):
    if not lo < hi:
        raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
    return as_generator(stream).uniform(lo, hi, size=(rows, cols))
