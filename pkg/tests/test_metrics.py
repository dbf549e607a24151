import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.metrics import normalized_mutual_info_score

from mxonmtf.metrics import (confusion, modularity_density, multiplex_modularity_density,
                             multiplex_nmi, nmi)

from conftest import block_graph, random_graph


def brute_nmi(a, b):
    n = len(a)
    ca, cb = sorted(set(a)), sorted(set(b))
    if len(ca) == 1 and len(cb) == 1:
        return 1.0
    num = 0.0
    for x in ca:
        for y in cb:
            nxy = sum(1 for i in range(n) if a[i] == x and b[i] == y)
            if nxy:
                nx = a.count(x)
                ny = b.count(y)
                num += nxy * math.log(nxy * n / (nx * ny))
    den = sum(a.count(x) * math.log(a.count(x) / n) for x in ca)
    den += sum(b.count(y) * math.log(b.count(y) / n) for y in cb)
    return 0.0 if den == 0 else -2 * num / den


def brute_qd(a, labels):
    n = len(labels)
    total = 0.0
    for c in set(labels):
        members = [i for i in range(n) if labels[i] == c]
        inside = sum(a[i][j] for i in members for j in members if i < j)
        out = sum(a[i][j] for i in members for j in range(n) if labels[j] != c)
        total += (2 * inside - out) / len(members)
    return total


labels_st = st.lists(st.integers(0, 4), min_size=1, max_size=30)


class TestNMI:
    def test_identical(self):
        assert nmi([0, 0, 1, 2], [5, 5, 7, 9]) == 1.0

    def test_independent(self):
        assert nmi([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(0.0, abs=1e-15)

    def test_hand_table(self):
        a, b = [0, 0, 1, 1], [0, 0, 0, 1]
        assert nmi(a, b) == pytest.approx(brute_nmi(a, b), abs=1e-12)

    def test_trivial_partitions(self):
        assert nmi([3, 3, 3], [1, 1, 1]) == 1.0
        assert nmi([3, 3, 3], [0, 1, 1]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            nmi([0, 1], [0, 1, 1])

    def test_confusion_total(self):
        t = confusion([0, 1, 1, 2], [1, 1, 0, 0])
        assert t.total == 4 and t.counts.sum() == 4

    @given(st.integers(0, 2**32 - 1), st.integers(1, 30))
    def test_matches_brute_force(self, seed, n):
        g = np.random.default_rng(seed)
        a = g.integers(0, g.integers(1, 6), n).tolist()
        b = g.integers(0, g.integers(1, 6), n).tolist()
        assert abs(nmi(a, b) - brute_nmi(a, b)) <= 1e-12

    @given(st.integers(0, 2**32 - 1), st.integers(2, 30))
    def test_matches_sklearn_arithmetic_nmi(self, seed, n):
        # the Danon form equals NMI with arithmetic-mean normalization
        g = np.random.default_rng(seed)
        a = g.integers(0, 4, n)
        b = g.integers(0, 4, n)
        if len(set(a)) == 1 or len(set(b)) == 1:
            return
        ref = normalized_mutual_info_score(a, b, average_method="arithmetic")
        assert nmi(a, b) == pytest.approx(ref, abs=1e-12)

    @given(labels_st, st.integers(0, 2**32 - 1))
    def test_symmetric_permutation_invariant_bounded(self, a, seed):
        g = np.random.default_rng(seed)
        b = g.integers(0, 3, len(a))
        perm = g.permutation(10)
        v = nmi(a, b)
        assert 0.0 <= v <= 1.0
        assert abs(v - nmi(b, a)) <= 1e-12
        assert abs(v - nmi(perm[np.asarray(a)], b)) <= 1e-12


class TestMultiplexNMI:
    def test_broadcast_truth(self):
        truth = np.array([0, 0, 1, 1])
        assert multiplex_nmi([truth, truth[::-1]], truth) == 1.0

    def test_mean_and_pooled(self):
        p = [np.array([0, 0, 1, 1]), np.array([0, 1, 0, 1])]
        t = [np.array([0, 0, 1, 1]), np.array([0, 0, 1, 1])]
        assert multiplex_nmi(p, t) == pytest.approx(0.5)
        assert multiplex_nmi(p, t, pooled=True) == pytest.approx(
            nmi(np.concatenate(p), np.concatenate(t)))

    def test_layer_count_mismatch(self):
        with pytest.raises(ValueError):
            multiplex_nmi([[0, 1]] * 2, [[0, 1]] * 3)


class TestModularityDensity:
    def test_two_triangles(self):
        assert modularity_density(block_graph([3, 3]), [0, 0, 0, 1, 1, 1]) == pytest.approx(4.0)

    def test_one_community(self, rng):
        a = random_graph(rng, 12, 0.3)
        assert modularity_density(a, np.zeros(12)) == pytest.approx(a.sum() / 12)

    def test_singleton_counts_negative_boundary(self):
        a = block_graph([3])
        # node 2 alone: out = 2; pair {0,1}: in = 1, out = 2 -> 0
        assert modularity_density(a, [0, 0, 1]) == pytest.approx(-2.0)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 30))
    def test_matches_double_loop(self, seed, n):
        g = np.random.default_rng(seed)
        a = random_graph(g, n, g.random()) * g.random((n, n))
        a = a + a.T
        labels = g.integers(0, g.integers(1, 6), n)
        assert abs(modularity_density(a, labels) - brute_qd(a.tolist(), labels.tolist())) <= 1e-12 * max(1, a.sum())

    @given(st.integers(0, 2**32 - 1))
    def test_permutation_and_union(self, seed):
        g = np.random.default_rng(seed)
        a1, a2 = random_graph(g, 8, 0.5), random_graph(g, 6, 0.5)
        l1, l2 = g.integers(0, 3, 8), g.integers(0, 3, 6)
        q = modularity_density(a1, l1)
        assert q == pytest.approx(modularity_density(a1, (l1 + 1) * 7))
        union = np.zeros((14, 14))
        union[:8, :8], union[8:, 8:] = a1, a2
        joint = np.concatenate([l1, l2 + 10])
        assert modularity_density(union, joint) == pytest.approx(q + modularity_density(a2, l2))

    def test_multiplex_mean(self):
        from mxonmtf import MultiplexNetwork

        a = block_graph([3, 3])
        net = MultiplexNetwork([a, a])
        labs = [np.array([0, 0, 0, 1, 1, 1]), np.zeros(6, dtype=int)]
        assert multiplex_modularity_density(net, labs) == pytest.approx((4.0 + 12 / 6) / 2)
