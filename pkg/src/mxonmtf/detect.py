"""Restart driver: many random initializations, labelled and scored, best kept."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .assign import label_layers
from .factorize import SolverOptions, run_once, single_layer_onmtf
from .metrics import multiplex_modularity_density, multiplex_nmi
from .model_order import estimate_k_layer, estimate_order, null_threshold
from .multiplex import MultiplexNetwork, aggregate_average
from .numerics import RandomStream

log = logging.getLogger(__name__)


@dataclass
class Detection:
    run: object
    partition: object
    presence: object
    order: object
    scores: list
    best_index: int
    selector: str


def _score(net, labels, selector, truth, pooled):
    if selector == "nmi":
        return multiplex_nmi(labels, truth, pooled=pooled)
    return multiplex_modularity_density(net, labels)


def _one_restart(args):
    net, order, seed, r, opts, selector, truth, pooled, qj_rule = args
    run = run_once(net, order, RandomStream(seed, r), opts)
    partition, presence = label_layers(net, run.factors, order, qj_rule)
    return run, partition, presence, _score(net, partition.labels, selector, truth, pooled)


def run_restarts(net, order, master_seed, restarts=50, selector=None, truth=None,
                 opts=None, threads=1, pooled=False, qj_rule="corrected", keep_runs=False):
    """Run ``restarts`` independent fits and keep the best-scoring labelled run.

    The selector is NMI against ``truth`` when given, else mean modularity
    density over layers. Restart ``r`` draws from stream ``(master_seed, r)``
    and ties go to the lowest index, so the result does not depend on
    ``threads``.
    """
    if restarts < 1:
        raise ValueError("need at least one restart")
    if selector is None:
        selector = "nmi" if truth is not None else "qd"
    if selector not in ("nmi", "qd"):
        raise ValueError(f"unknown selector {selector!r}")
    if selector == "nmi" and truth is None:
        raise ValueError("the NMI selector needs ground-truth labels")
    opts = SolverOptions.coerce(opts)
    jobs = [(net, order, master_seed, r, opts, selector, truth, pooled, qj_rule)
            for r in range(restarts)]
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_one_restart, jobs))
    else:
        results = [_one_restart(j) for j in jobs]

    scores = [res[3] for res in results]
    best = int(np.argmax(scores))  # first maximum wins
    run, partition, presence, _ = results[best]
    det = Detection(run, partition, presence, order, scores, best, selector)
    if keep_runs:
        det.runs = [res[0] for res in results]
    return det


def detect(net, order=None, master_seed=0, restarts=50, truth=None, selector=None,
           opts=None, threads=1, pooled=False, qj_rule="corrected", cut_rule="prose",
           linkage_method="single", null_trials=50):
    """Estimate the model order when not given, then run the restart driver."""
    if order is None:
        order = estimate_order(net, RandomStream(master_seed).child("order"), trials=null_trials,
                               cut_rule=cut_rule, method=linkage_method, opts=opts)
    return run_restarts(net, order, master_seed, restarts, selector, truth, opts, threads,
                        pooled, qj_rule)


def aggregated_average(net, k=None, stream=None, opts=None, null_trials=50):
    """Aggregated Average baseline: single-layer ONMTF on the mean adjacency.

    ``k`` defaults to the eigengap estimate on the averaged network. Returns
    ``(labels, k)`` with labels the row-argmax of the membership factor.
    """
    if stream is None:
        stream = RandomStream(0)
    avg = aggregate_average(net)
    if k is None:
        n = net.n
        dens = np.count_nonzero(avg) / (n * (n - 1))
        dens = min(max(dens, 1.0 / (n * (n - 1))), 1 - 1e-9)
        delta = null_threshold(n, dens, stream.child("null"), null_trials)
        k = estimate_k_layer(avg, delta)
    U, _ = single_layer_onmtf(MultiplexNetwork([avg]), int(k), stream.child("fit"), opts)
    return np.argmax(U, axis=1).astype(np.int64), int(k)
