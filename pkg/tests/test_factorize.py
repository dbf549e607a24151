import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mxonmtf import (BenchmarkSpec, ModelOrder, MultiplexNetwork, analytic_factors, generate,
                     population_adjacency, random_population_sbm, truth_order)
from mxonmtf.factorize import (FactorSet, FactorizationError, SolverOptions, init_factors,
                               objective, run_factors, run_once, single_layer_onmtf,
                               single_layer_run, update_Gl, update_H, update_Hl, update_Sl)
from mxonmtf.numerics import RandomStream, ShapeError

from conftest import block_graph, random_multiplex


def sweep_reference(net, f):
    """One Gauss-Seidel sweep through the public single-factor updates."""
    f.H = update_H(net, f)
    for l in range(net.L):
        f.Hl[l] = update_Hl(net, f, l)
    for l in range(net.L):
        f.S[l] = update_Sl(net, f, l)
    for l in range(net.L):
        f.G[l] = update_Gl(net, f, l)
    return f


def scalar_net(a):
    return MultiplexNetwork([[[a]]], allow_diagonal=True)


class TestInit:
    def test_deterministic(self):
        a = init_factors(RandomStream(3, 1), 10, 2, [1, 2])
        b = init_factors(RandomStream(3, 1), 10, 2, [1, 2])
        assert a.max_abs_diff(b) == 0.0

    def test_range_and_symmetry(self):
        for core in ("diagonal", "uniform"):
            f = init_factors(RandomStream(0), 30, 3, [2, 0, 4], core=core)
            for m in f.arrays():
                if m.size:
                    assert m.min() >= 0.1 and m.max() <= 1.0
            for m in f.S + f.G:
                np.testing.assert_array_equal(m, m.T)
            assert all(np.all(m.any(axis=0)) for m in [f.H, *f.Hl])

    def test_diagonal_core_dominant(self):
        f = init_factors(RandomStream(0), 5, 4, [3])
        s = f.S[0]
        assert np.all(np.diag(s) >= 0.5) and np.all(s[~np.eye(4, dtype=bool)] <= 0.2)

    def test_no_common(self, rng):
        net = random_multiplex(rng, n=12, L=2)
        f = init_factors(RandomStream(0), 12, 0, [2, 3])
        assert f.H.shape == (12, 0)
        assert not np.any(f.H @ f.S[0] @ f.H.T)
        assert np.isfinite(objective(net, f))

    @pytest.mark.parametrize("kc,kp", [(0, [0, 0]), (0, [1, 0]), (-1, [2])])
    def test_invalid_orders(self, kc, kp):
        with pytest.raises(ValueError):
            init_factors(RandomStream(0), 5, kc, kp)


class TestObjective:
    def test_perfect_fit(self):
        f = init_factors(RandomStream(1), 6, 2, [1, 2])
        net = MultiplexNetwork([f.layer_fit(l) for l in range(2)], allow_diagonal=True)
        assert objective(net, f) == pytest.approx(0.0, abs=1e-20)

    def test_zero_factors(self, rng):
        net = random_multiplex(rng, n=9, L=2)
        f = init_factors(RandomStream(1), 9, 1, [2, 2])
        zero = FactorSet(*[[np.zeros_like(x) for x in v] if isinstance(v, list) else np.zeros_like(v)
                           for v in (f.H, f.Hl, f.S, f.G)])
        assert objective(net, zero) == sum(float((a * a).sum()) for a in net.layers)

    def test_analytic_factors_zero(self):
        for seed in range(5):
            p = random_population_sbm(RandomStream(seed), 60, 3, 2, [1, 3, 2])
            net = population_adjacency(p)
            assert objective(net, analytic_factors(p)) < 1e-10

    def test_shape_mismatch(self, rng):
        net = random_multiplex(rng, n=9, L=2)
        with pytest.raises(ShapeError):
            objective(net, init_factors(RandomStream(0), 8, 1, [1, 1]))
        with pytest.raises(ShapeError):
            objective(net, init_factors(RandomStream(0), 9, 1, [1, 1, 1]))


class TestUpdates:
    def test_scalar_fixed_point_H(self):
        a, s, g = 0.7, 0.3, 0.9
        f = FactorSet(np.ones((1, 1)), [np.ones((1, 1))], [np.array([[s]])], [np.array([[g]])])
        # num = a s + g s, den = g s + a s
        np.testing.assert_allclose(update_H(scalar_net(a), f), [[1.0]], rtol=1e-10)
        np.testing.assert_allclose(update_Hl(scalar_net(a), f, 0), [[1.0]], rtol=1e-10)

    def test_scalar_S_G(self):
        a, s, g = 0.7, 0.3, 0.9
        f = FactorSet(np.ones((1, 1)), [np.ones((1, 1))], [np.array([[s]])], [np.array([[g]])])
        assert update_Sl(scalar_net(a), f, 0)[0, 0] == pytest.approx(s * a / (s + g))
        assert update_Gl(scalar_net(a), f, 0)[0, 0] == pytest.approx(g * a / (g + s))
        # fixed point when s + g = a
        f.S[0][0, 0], f.G[0][0, 0] = 0.3, 0.4
        assert update_Sl(scalar_net(0.7), f, 0)[0, 0] == pytest.approx(0.3)

    def test_descent_on_random_instances(self):
        for seed in range(10):
            net = random_multiplex(np.random.default_rng(seed), n=32, L=3)
            f = init_factors(RandomStream(seed), 32, 2, [2, 1, 3])
            before = objective(net, f)
            f.H = update_H(net, f, safeguard=True)
            mid = objective(net, f)
            for l in range(3):
                f.Hl[l] = update_Hl(net, f, l, safeguard=True)
            after = objective(net, f)
            assert mid <= before and after <= mid

    def test_S_G_descend(self):
        for seed in range(10):
            net = random_multiplex(np.random.default_rng(seed), n=32, L=3)
            f = init_factors(RandomStream(seed), 32, 2, [2, 1, 3])
            for l in range(3):
                before = objective(net, f)
                f.S[l] = update_Sl(net, f, l)
                f.G[l] = update_Gl(net, f, l)
                assert objective(net, f) <= before * (1 + 1e-12)

    def test_zero_target_without_private_blocks(self):
        net = MultiplexNetwork([np.zeros((16, 16))] * 2)
        f = init_factors(RandomStream(0), 16, 2, [0, 0])
        assert not update_H(net, f).any()

    def test_zero_target_safeguarded_shrinks(self):
        net = MultiplexNetwork([np.zeros((16, 16))] * 2)
        f = init_factors(RandomStream(0), 16, 2, [1, 2])
        norms, objs = [np.linalg.norm(f.H)], [objective(net, f)]
        for _ in range(10):
            f.H = update_H(net, f, safeguard=True)
            norms.append(np.linalg.norm(f.H))
            objs.append(objective(net, f))
        assert np.all(np.diff(norms) <= 0) and np.all(np.diff(objs) <= 0)

    def test_S_block_means(self):
        sizes = [5, 7, 4]
        rng = np.random.default_rng(0)
        z = np.repeat(np.eye(3), sizes, axis=0)
        a = rng.random((16, 16))
        a = (a + a.T) / 2
        np.fill_diagonal(a, 0)
        net = MultiplexNetwork([a])
        H = z / np.sqrt(z.sum(axis=0))
        f = FactorSet(H, [np.zeros((16, 1))], [np.full((3, 3), 0.5)], [np.ones((1, 1))])
        for _ in range(3):
            f.S[0] = update_Sl(net, f, 0)
        fit = f.layer_fit(0)
        for i, j in [(0, 0), (0, 2), (1, 1), (2, 1)]:
            bi, bj = z[:, i] > 0, z[:, j] > 0
            assert fit[np.ix_(bi, bj)] == pytest.approx(a[np.ix_(bi, bj)].mean())

    def test_symmetry_after_update(self, rng):
        net = random_multiplex(rng, n=20, L=2)
        f = init_factors(RandomStream(4), 20, 3, [2, 2])
        for l in range(2):
            s, g = update_Sl(net, f, l), update_Gl(net, f, l)
            assert np.max(np.abs(s - s.T)) <= 1e-12 and np.max(np.abs(g - g.T)) <= 1e-12

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_raises(self):
        net = MultiplexNetwork([[[0.0, 1.0], [1.0, 0.0]]])
        f = FactorSet(np.array([[np.inf], [1.0]]), [np.ones((2, 1))], [np.ones((1, 1))], [np.ones((1, 1))])
        with pytest.raises(FactorizationError):
            update_H(net, f)

    @given(st.integers(0, 2**32 - 1))
    def test_nonnegativity_closure(self, seed):
        g = np.random.default_rng(seed)
        net = random_multiplex(g, n=10, L=2)
        f = init_factors(RandomStream(seed), 10, int(g.integers(1, 3)), [int(g.integers(0, 3)), int(g.integers(0, 3))])
        f = sweep_reference(net, f)
        assert all(np.all(m >= 0) for m in f.arrays())

    def test_permutation_equivariance(self, rng):
        net = random_multiplex(rng, n=15, L=2)
        f = init_factors(RandomStream(2), 15, 2, [1, 2])
        perm = rng.permutation(15)
        pnet = MultiplexNetwork([a[np.ix_(perm, perm)] for a in net.layers])
        pf = FactorSet(f.H[perm], [h[perm] for h in f.Hl], f.S, f.G)
        np.testing.assert_allclose(update_H(pnet, pf), update_H(net, f)[perm], rtol=1e-12)
        for l in range(2):
            np.testing.assert_allclose(update_Hl(pnet, pf, l), update_Hl(net, f, l)[perm], rtol=1e-12)
            np.testing.assert_allclose(update_Sl(pnet, pf, l), update_Sl(net, f, l), rtol=1e-12)
            np.testing.assert_allclose(update_Gl(pnet, pf, l), update_Gl(net, f, l), rtol=1e-12)


class TestFixedPoint:
    @pytest.mark.parametrize("seed", range(4))
    def test_analytic_factors_stationary(self, seed):
        p = random_population_sbm(RandomStream(seed), 72, 3, 2, [2, 3, 1])
        net = population_adjacency(p)
        f = analytic_factors(p)
        g = sweep_reference(net, f.copy())
        assert g.max_abs_diff(f) < 1e-6
        h = f.copy()
        run_factors(net, h, SolverOptions(max_iters=1, tol=0))
        assert h.max_abs_diff(f) < 1e-6


class TestRunOnce:
    def test_stacked_sweep_matches_reference(self, rng):
        net = random_multiplex(rng, n=18, L=3)
        for kc, kp in [(2, [1, 0, 3]), (0, [2, 1, 2]), (3, [0, 0, 0])]:
            f = init_factors(RandomStream(1), 18, kc, kp)
            g = f.copy()
            res = run_factors(net, g, SolverOptions(max_iters=4, tol=0, safeguard=False))
            for _ in range(4):
                sweep_reference(net, f)
            assert f.max_abs_diff(g) < 1e-12
            assert res.final_objective == pytest.approx(objective(net, f), rel=1e-12)

    def test_max_iters_zero(self, rng):
        net = random_multiplex(rng)
        order = ModelOrder.from_counts(1, [1, 1, 1])
        res = run_once(net, order, RandomStream(5), max_iters=0)
        assert len(res.objective_trace) == 1 and res.iterations_used == 0
        init = init_factors(RandomStream(5).child("init"), net.n, 1, [1, 1, 1])
        assert res.factors.max_abs_diff(init) == 0.0

    def test_trace_monotone(self):
        for seed in range(4):
            net = random_multiplex(np.random.default_rng(seed), n=40, L=3)
            res = run_once(net, ModelOrder.from_counts(2, [1, 2, 2]), RandomStream(seed),
                           max_iters=300, tol=0)
            t = np.asarray(res.objective_trace)
            assert np.all(np.diff(t) <= 1e-9 * (1 + np.abs(t[:-1])))

    def test_descent_magnitude_on_blocks(self):
        spec = BenchmarkSpec(n=64, k_c=4, k_p=0, mu=0.0, avg_degree=15, seed=1)
        net, _ = generate(spec)
        ratios = [run_once(net, truth_order(spec), RandomStream(0, r)) for r in range(10)]
        ratios = [r.final_objective / r.objective_trace[0] for r in ratios]
        assert sum(x < 0.01 for x in ratios) >= 8

    def test_convergence_window(self, rng):
        net = random_multiplex(rng)
        res = run_once(net, ModelOrder.from_counts(1, [1, 1, 1]), RandomStream(0), tol=1e-3, window=3)
        assert res.converged and res.iterations_used < 1000
        t = res.objective_trace
        rel = [abs(t[i] - t[i + 1]) / t[i] for i in range(len(t) - 1)]
        assert all(r < 1e-3 for r in rel[-3:])

    def test_deterministic(self, rng):
        net = random_multiplex(rng)
        a = run_once(net, ModelOrder.from_counts(1, [2, 1, 1]), RandomStream(9, 2), max_iters=50)
        b = run_once(net, ModelOrder.from_counts(1, [2, 1, 1]), RandomStream(9, 2), max_iters=50)
        assert a.objective_trace == b.objective_trace
        assert a.factors.max_abs_diff(b.factors) == 0.0

    def test_layer_mismatch(self, rng):
        with pytest.raises(ValueError):
            run_once(random_multiplex(rng), ModelOrder.from_counts(1, [1, 1]), RandomStream(0))


class TestSingleLayer:
    def test_identity_descent(self):
        res = single_layer_run(np.eye(6), 6, RandomStream(0), max_iters=200, tol=0)
        t = np.asarray(res.objective_trace)
        assert np.all(np.diff(t) <= 1e-9 * (1 + t[:-1]))

    def test_two_cliques(self):
        a = block_graph([6, 9])
        U, S = single_layer_onmtf(a, 2, RandomStream(1))
        lab = U.argmax(axis=1)
        assert len(set(lab[:6])) == 1 and len(set(lab[6:])) == 1 and lab[0] != lab[6]
        assert S.shape == (2, 2)

    def test_deterministic(self, rng):
        a = random_multiplex(rng, L=1).layers[0]
        u1, _ = single_layer_onmtf(a, 3, RandomStream(2))
        u2, _ = single_layer_onmtf(a, 3, RandomStream(2))
        assert u1.tobytes() == u2.tobytes()

    def test_bad_k(self):
        with pytest.raises(ValueError):
            single_layer_onmtf(np.zeros((3, 3)), 0, RandomStream(0))
