import numpy as np
import pytest

from mxonmtf import (BenchmarkSpec, ModelOrder, MultiplexNetwork, aggregated_average, detect,
                     generate, multiplex_nmi, nmi, truth_order)
from mxonmtf.assign import label_layers
from mxonmtf.detect import run_restarts
from mxonmtf.factorize import SolverOptions, run_once
from mxonmtf.numerics import RandomStream

from conftest import block_graph, random_multiplex


class TestRestarts:
    def test_single_restart_equals_run_once(self, rng):
        net = random_multiplex(rng, n=20)
        order = ModelOrder.from_counts(1, [1, 2, 1])
        det = run_restarts(net, order, 4, restarts=1, opts=SolverOptions(max_iters=40))
        run = run_once(net, order, RandomStream(4, 0), max_iters=40)
        part, _ = label_layers(net, run.factors, order)
        assert det.run.objective_trace == run.objective_trace
        for a, b in zip(det.partition.labels, part.labels):
            np.testing.assert_array_equal(a, b)

    def test_argmax_and_threads(self, rng):
        net = random_multiplex(rng, n=20)
        order = ModelOrder.from_counts(1, [1, 1, 1])
        opts = SolverOptions(max_iters=30)
        one = run_restarts(net, order, 11, restarts=4, opts=opts)
        two = run_restarts(net, order, 11, restarts=4, opts=opts, threads=2)
        assert one.scores[one.best_index] == max(one.scores)
        assert one.scores == two.scores and one.best_index == two.best_index
        assert one.run.objective_trace == two.run.objective_trace

    def test_nmi_selector_needs_truth(self, rng):
        with pytest.raises(ValueError):
            run_restarts(random_multiplex(rng), ModelOrder.from_counts(1, [1, 1, 1]), 0,
                         restarts=1, selector="nmi")

    def test_exact_recovery_small(self):
        spec = BenchmarkSpec(n=96, k_c=2, k_p=2, mu=0.0, seed=3)
        net, truth = generate(spec)
        det = run_restarts(net, truth_order(spec), 3, restarts=30, truth=truth.labels)
        assert det.scores[det.best_index] == 1.0


class TestDetect:
    def test_estimates_order_when_missing(self):
        spec = BenchmarkSpec(n=160, k_c=2, k_p=[2, 3, 2], mu=0.0, avg_degree=10, seed=6)
        net, truth = generate(spec)
        det = detect(net, master_seed=6, restarts=10, null_trials=20)
        assert (det.order.k_c, det.order.k_p) == (2, [2, 3, 2])
        assert det.selector == "qd"
        assert multiplex_nmi(det.partition.labels, truth.labels) > 0.9

    def test_keep_runs(self, rng):
        net = random_multiplex(rng, n=16)
        det = run_restarts(net, ModelOrder.from_counts(1, [1, 1, 1]), 0, restarts=3,
                           opts=SolverOptions(max_iters=10), keep_runs=True)
        assert len(det.runs) == 3 and det.runs[det.best_index] is not None

    def test_bad_arguments(self, rng):
        net = random_multiplex(rng, n=16)
        order = ModelOrder.from_counts(1, [1, 1, 1])
        with pytest.raises(ValueError):
            run_restarts(net, order, 0, restarts=0)
        with pytest.raises(ValueError):
            run_restarts(net, order, 0, restarts=1, selector="ari")


class TestAggregatedAverage:
    def test_identical_layers(self):
        a = block_graph([10, 12, 14])
        labels, k = aggregated_average(MultiplexNetwork([a, a]), stream=RandomStream(1), null_trials=20)
        truth = np.repeat([0, 1, 2], [10, 12, 14])
        assert k == 3 and nmi(labels, truth) == 1.0

    def test_given_k(self, rng):
        labels, k = aggregated_average(random_multiplex(rng, n=20), k=2, stream=RandomStream(0))
        assert k == 2 and labels.shape == (20,) and labels.max() <= 1
