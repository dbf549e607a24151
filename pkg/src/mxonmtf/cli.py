"""Command-line entry points: generate, estimate-k, detect, baseline, eval, sweep.

Every subcommand is deterministic for a fixed ``--seed`` (default: the
``MXPLEX_SEED`` environment variable, else 0) and writes a ``manifest.json``
next to its outputs holding the full configuration and package version.

Exit codes: 0 success, 2 unreadable or malformed input, 3 numerical failure.
"""

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .benchgen import BenchmarkSpec, generate
from .detect import aggregated_average, run_restarts
from .factorize import FactorizationError, SolverOptions
from .metrics import modularity_density, multiplex_nmi, nmi, per_layer_nmi
from .model_order import ModelOrder, estimate_order
from .multiplex import FormatError, load_labels, load_multiplex, save_labels, save_multiplex
from .numerics import RandomStream

log = logging.getLogger("mxonmtf")

EXIT_INPUT = 2
EXIT_NUMERIC = 3
SWEEP_AXES = ("mu", "p1", "kc", "n")
SWEEP_FIELDS = ("axis", "value", "method", "mean_nmi", "std_nmi", "mean_seconds", "realizations")


class InputError(Exception):
    pass


def _presence(text):
    """``"111,110"`` -> one row per common community, one 0/1 flag per layer."""
    return [[c == "1" for c in row.strip()] for row in text.split(",") if row.strip()]


def _default_seed():
    raw = os.environ.get("MXPLEX_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"MXPLEX_SEED must be an integer, got {raw!r}")


def _manifest(args, outdir, extra=None):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    doc = {"tool": "mxonmtf", "version": __version__, "command": args.command, "config": cfg}
    if extra:
        doc.update(extra)
    Path(outdir).mkdir(parents=True, exist_ok=True)
    with open(Path(outdir) / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _load_net(path):
    try:
        return load_multiplex(path)
    except (OSError, FormatError, ValueError) as exc:
        raise InputError(f"cannot read network {path}: {exc}") from exc


def _load_truth(paths, n, L):
    try:
        truth = [load_labels(p, n) for p in paths]
    except (OSError, FormatError, ValueError) as exc:
        raise InputError(f"cannot read labels: {exc}") from exc
    if len(truth) == 1:
        truth = truth * L
    if len(truth) != L:
        raise InputError(f"got {len(truth)} label files for {L} layers")
    return truth


def _opts(args):
    return SolverOptions(max_iters=args.max_iters, tol=args.tol)


def _order_from_args(args, net):
    if args.kc is None and args.kp is None:
        return None
    if args.kc is None or args.kp is None:
        raise InputError("--kc and --kp must be given together")
    kp = args.kp if len(args.kp) > 1 else args.kp * net.L
    if len(kp) != net.L:
        raise InputError(f"--kp has {len(kp)} entries for {net.L} layers")
    return ModelOrder.from_counts(args.kc, kp)


def _fmt(x):
    return repr(float(x))


def _bench(**kw):
    try:
        spec = BenchmarkSpec(**kw)
        return spec, generate(spec)
    except ValueError as exc:
        raise InputError(f"invalid benchmark: {exc}") from exc


def cmd_generate(args):
    spec, (net, truth) = _bench(
        n=args.n, L=args.layers, k_c=args.kc,
        k_p=args.kp if len(args.kp) > 1 else args.kp[0],
        mu=args.mu, p1=args.p1, avg_degree=args.avg_degree, n_c=args.nc,
        presence=_presence(args.presence) if args.presence else None, seed=args.seed,
    )
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    save_multiplex(net, out / "network.txt")
    for l, lab in enumerate(truth.labels):
        save_labels(lab, out / f"truth_layer{l}.txt")
    _manifest(args, out, {"benchmark": spec.to_dict()})
    print(f"wrote {net.L}-layer network with {net.n} nodes to {out}")
    return 0


def cmd_estimate_k(args):
    net = _load_net(args.input)
    order = estimate_order(net, RandomStream(args.seed).child("order"), trials=args.trials,
                           cut_rule=args.cut_rule, method=args.linkage)
    report = order.to_dict()
    report["deltas"] = [float(d) for d in order.deltas]
    print(order.record())
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "order.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _manifest(args, out)
    return 0


def cmd_detect(args):
    net = _load_net(args.input)
    truth = _load_truth(args.truth, net.n, net.L) if args.truth else None
    order = _order_from_args(args, net)
    if order is None:
        order = estimate_order(net, RandomStream(args.seed).child("order"), trials=args.trials,
                               cut_rule=args.cut_rule, method=args.linkage, opts=_opts(args))
    det = run_restarts(net, order, args.seed, restarts=args.restarts, selector=args.selector,
                       truth=truth, opts=_opts(args), threads=args.threads, pooled=args.pooled,
                       qj_rule=args.qj_rule)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for l, lab in enumerate(det.partition.labels):
        save_labels(lab, out / f"labels_layer{l}.txt")
    presence = det.presence.matrix(order.k_c).astype(int)
    with open(out / "presence.txt", "w", encoding="utf-8") as fh:
        for row in presence:
            fh.write(" ".join(str(x) for x in row) + "\n")
    with open(out / "trace.txt", "w", encoding="utf-8") as fh:
        fh.writelines(_fmt(v) + "\n" for v in det.run.objective_trace)
    with open(out / "scores.txt", "w", encoding="utf-8") as fh:
        fh.writelines(f"{r} {_fmt(s)}\n" for r, s in enumerate(det.scores))
    summary = {
        "order": order.to_dict(),
        "selector": det.selector,
        "best_restart": det.best_index,
        "best_score": float(det.scores[det.best_index]),
        "final_objective": float(det.run.final_objective),
        "iterations": det.run.iterations_used,
    }
    if truth is not None:
        summary["nmi_per_layer"] = per_layer_nmi(det.partition.labels, truth)
        summary["nmi"] = float(np.mean(summary["nmi_per_layer"]))
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _manifest(args, out)
    print(f"order {order.record()}")
    print(f"best restart {det.best_index}: {det.selector}={summary['best_score']:.6f}")
    if truth is not None:
        print(f"NMI {summary['nmi']:.6f}")
    return 0


def cmd_baseline(args):
    net = _load_net(args.input)
    labels, k = aggregated_average(net, k=args.k, stream=RandomStream(args.seed).child("baseline"),
                                   opts=_opts(args), null_trials=args.trials)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    save_labels(labels, out / "labels.txt")
    _manifest(args, out, {"k": k})
    print(f"aggregated average: k={k}")
    if args.truth:
        truth = _load_truth(args.truth, net.n, net.L)
        print(f"NMI {multiplex_nmi([labels] * net.L, truth):.6f}")
    return 0


def cmd_eval(args):
    try:
        pred = [load_labels(p) for p in args.pred]
    except (OSError, FormatError, ValueError) as exc:
        raise InputError(f"cannot read labels: {exc}") from exc
    n = pred[0].size
    truth = _load_truth(args.truth, n, len(pred)) if args.truth else None
    net = _load_net(args.network) if args.network else None
    if net is not None and len(pred) == 1 and net.L > 1:
        pred = pred * net.L
    rows = []
    for l, p in enumerate(pred):
        row = {"layer": l}
        if truth is not None:
            row["nmi"] = nmi(p, truth[l])
        if net is not None:
            row["qd"] = modularity_density(net.layers[l], p)
        rows.append(row)
    cols = [c for c in ("nmi", "qd") if c in rows[0]]
    if not cols:
        raise InputError("eval needs --truth, --network or both")
    print("layer " + " ".join(f"{c:>10}" for c in cols))
    for row in rows:
        print(f"{row['layer']:>5} " + " ".join(f"{row[c]:>10.6f}" for c in cols))
    means = {c: float(np.mean([r[c] for r in rows])) for c in cols}
    print(" mean " + " ".join(f"{means[c]:>10.6f}" for c in cols))
    if truth is not None and args.pooled:
        print(f"pooled NMI {multiplex_nmi(pred, truth, pooled=True):.6f}")
    return 0


def _sweep_spec(args, value, seed):
    base = dict(n=args.n, L=args.layers, k_c=args.kc, k_p=args.kp_each, mu=args.mu,
                p1=args.p1, avg_degree=args.avg_degree, seed=seed)
    if args.axis == "mu":
        base["mu"] = float(value)
    elif args.axis == "p1":
        base["p1"] = float(value)
    elif args.axis == "kc":
        base["k_c"] = int(value)
    else:
        base["n"] = int(value)
    return base


def sweep_rows(args):
    """One CSV row per (value, method): mean and std of NMI over realizations."""
    methods = ["mxonmtf", "aa"] if args.method == "both" else [args.method]
    rows = []
    for value in args.values:
        if args.axis in ("kc", "n"):
            value = int(value)
        scores = {m: [] for m in methods}
        seconds = {m: [] for m in methods}
        for r in range(args.realizations):
            seed = args.seed + r
            spec, (net, truth) = _bench(**_sweep_spec(args, value, seed))
            order = ModelOrder(k_l=spec.k_l(), k_c=spec.k_c, k_p=spec.k_p)
            for m in methods:
                t0 = time.perf_counter()
                if m == "mxonmtf":
                    det = run_restarts(net, order, seed, restarts=args.restarts, truth=truth.labels,
                                       opts=_opts(args), threads=args.threads)
                    labels = det.partition.labels
                else:
                    lab, _ = aggregated_average(net, k=None, stream=RandomStream(seed).child("baseline"),
                                                opts=_opts(args), null_trials=args.trials)
                    labels = [lab] * net.L
                seconds[m].append(time.perf_counter() - t0)
                scores[m].append(multiplex_nmi(labels, truth.labels))
        for m in methods:
            rows.append({
                "axis": args.axis, "value": value, "method": m,
                "mean_nmi": float(np.mean(scores[m])), "std_nmi": float(np.std(scores[m])),
                "mean_seconds": float(np.mean(seconds[m])), "realizations": args.realizations,
            })
            log.info("%s=%s %s NMI %.4f", args.axis, value, m, rows[-1]["mean_nmi"])
    return rows


def cmd_sweep(args):
    args.kp_each = args.kp if len(args.kp) > 1 else args.kp[0]
    rows = sweep_rows(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    # wall-clock times differ between runs; keep them out of the diffable CSV unless asked
    fields = SWEEP_FIELDS if args.timing else tuple(f for f in SWEEP_FIELDS if f != "mean_seconds")
    with open(out / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in row.items()})
    del args.kp_each
    _manifest(args, out)
    if args.plot:
        _plot(rows, args, out / "sweep.png")
    for row in rows:
        print(f"{row['axis']}={row['value']} {row['method']}: {row['mean_nmi']:.4f} "
              f"+/- {row['std_nmi']:.4f}")
    return 0


def _plot(rows, args, path):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib is not installed; skipping %s", path)
        return
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for m in sorted({r["method"] for r in rows}):
        sel = [r for r in rows if r["method"] == m]
        ax.errorbar([r["value"] for r in sel], [r["mean_nmi"] for r in sel],
                    yerr=[r["std_nmi"] for r in sel], marker="o", capsize=3, label=m)
    ax.set_xlabel(args.axis)
    ax.set_ylabel("NMI")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _solver_flags(p):
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-6)


def _order_flags(p):
    p.add_argument("--cut-rule", choices=("prose", "literal"), default="prose")
    p.add_argument("--linkage", choices=("single", "average", "complete"), default="single")
    p.add_argument("--trials", type=int, default=50, help="null-model graphs for the eigengap threshold")


def build_parser():
    parser = argparse.ArgumentParser(prog="mxonmtf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="master seed (default: $MXPLEX_SEED or 0)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker processes for restarts; results do not depend on it")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="sample a synthetic benchmark")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--kc", type=int, default=2)
    p.add_argument("--kp", type=int, nargs="+", default=[2], help="one count, or one per layer")
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--p1", type=float, default=1.0)
    p.add_argument("--avg-degree", type=float, default=16.0)
    p.add_argument("--nc", type=int, default=None, help="nodes in common communities")
    p.add_argument("--presence", default=None,
                   help="per common community a 0/1 string over layers, comma separated")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("estimate-k", parents=[common], help="estimate k_l, k_c and k_p")
    p.add_argument("input")
    p.add_argument("-o", "--output", default=None)
    _order_flags(p)
    p.set_defaults(func=cmd_estimate_k)

    p = sub.add_parser("detect", parents=[common], help="multiplex community detection")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--truth", nargs="+", default=None, help="ground-truth labels, one file or one per layer")
    p.add_argument("--kc", type=int, default=None)
    p.add_argument("--kp", type=int, nargs="+", default=None)
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--selector", choices=("nmi", "qd"), default=None)
    p.add_argument("--pooled", action="store_true", help="NMI over concatenated layers")
    p.add_argument("--qj-rule", choices=("corrected", "legacy"), default="corrected")
    _solver_flags(p)
    _order_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("baseline", parents=[common], help="aggregated-average ONMTF baseline")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--truth", nargs="+", default=None)
    p.add_argument("--trials", type=int, default=50)
    _solver_flags(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", parents=[common], help="NMI and modularity density of label files")
    p.add_argument("--pred", nargs="+", required=True)
    p.add_argument("--truth", nargs="+", default=None)
    p.add_argument("--network", default=None)
    p.add_argument("--pooled", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="benchmark grid over one parameter")
    p.add_argument("--axis", required=True, help="one of mu, p1, kc, n")
    p.add_argument("--values", type=float, nargs="+", required=True)
    p.add_argument("--realizations", type=int, default=10)
    p.add_argument("--method", choices=("mxonmtf", "aa", "both"), default="both")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--kc", type=int, default=2)
    p.add_argument("--kp", type=int, nargs="+", default=[2])
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--p1", type=float, default=1.0)
    p.add_argument("--avg-degree", type=float, default=16.0)
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--timing", action="store_true", help="add a mean_seconds column")
    p.add_argument("--plot", action="store_true", help="also write sweep.png (needs matplotlib)")
    _solver_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = _default_seed()
    if args.command == "sweep":
        if args.axis not in SWEEP_AXES:
            parser.error(f"--axis must be one of {', '.join(SWEEP_AXES)}")
        if args.axis == "n":
            args.timing = True
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FactorizationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
