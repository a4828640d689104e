"""Command-line interface.

Every command takes ``--seed``, ``--threads``, ``--out`` (an output
directory), and ``--config`` (a key=value defaults file overridden by
flags). With a fixed seed every command's CSV/JSON output is byte-identical
across repeated runs and thread counts; wall-clock fields in the runtime
benchmark are the one documented exception.
"""

import argparse
import json
import os
import sys

from . import __version__
from .bench import EDGE_MODE_NODES, bench_runtime
from .dbscan import DbscanConfig, cluster_stats, dbscan, load_labels, save_labels
from .distance import (euclidean_distances, load_attributes, load_distances,
                       pairwise_distances, save_attributes, save_distances)
from .graph import load_edge_list, save_edge_list, validate_graph
from .pipeline import IN_SCOPE_METHODS, PipelineSpec, run_pipeline
from .scoring import ami
from .synth import SbmConfig, generate_dataset
from .tsne import TsneConfig, load_embedding, save_embedding, scatter_svg, tsne_embed
from .validation import reproduce_validation


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=42, help="base RNG seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--config", default=None,
                        help="key=value file; flags override its entries")


def _apply_config(parser, argv):
    """Pre-read --config and install its entries as typed parser defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    entries = {}
    with open(known.config, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SystemExit(f"config line {lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            entries[key.strip().replace("-", "_")] = value.strip()
    for action in parser._actions:
        if action.dest in entries:
            raw_value = entries.pop(action.dest)
            value = action.type(raw_value) if action.type else raw_value
            parser.set_defaults(**{action.dest: value})
    if entries:
        raise SystemExit(f"config contains unknown keys: {', '.join(sorted(entries))}")


def _out_path(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_meta(args, name, extra):
    payload = {"command": name, "seed": args.seed, "version": __version__, **extra}
    _write_json(_out_path(args, f"{name.replace('-', '_')}_meta.json"), payload)


def _cmd_sbm_gen(argv):
    parser = argparse.ArgumentParser(prog="netclust sbm-gen",
                                     description="Generate a planted-community dataset")
    _add_common(parser)
    parser.add_argument("--k", type=int, default=4)
    parser.add_argument("--community-size", type=int, default=50)
    parser.add_argument("--avg-degree", type=float, default=20.0)
    parser.add_argument("--d-out", type=float, default=2.0)
    parser.add_argument("--sigma", type=float, default=1.0)
    parser.add_argument("--n-obs", type=int, default=300)
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    cfg = SbmConfig(k=args.k, community_size=args.community_size,
                    avg_degree=args.avg_degree, d_out=args.d_out,
                    sigma=args.sigma, n_obs=args.n_obs, seed=args.seed)
    dataset = generate_dataset(cfg)
    save_edge_list(dataset.graph, _out_path(args, "graph.edgelist"))
    save_attributes(dataset.attributes, _out_path(args, "attributes.csv"))
    with open(_out_path(args, "truth.csv"), "w", encoding="utf-8") as fh:
        fh.write("observation_id,label\n")
        for oid, lab in zip(dataset.attributes.observation_ids, dataset.truth):
            fh.write(f"{oid},{lab}\n")
    with open(_out_path(args, "node_truth.csv"), "w", encoding="utf-8") as fh:
        fh.write("node_id,community\n")
        for nid, lab in zip(dataset.graph.node_ids, dataset.node_truth):
            fh.write(f"{nid},{lab}\n")
    _write_meta(args, "sbm-gen", {
        "k": cfg.k, "community_size": cfg.community_size, "avg_degree": cfg.avg_degree,
        "d_out": cfg.d_out, "sigma": cfg.sigma, "n_obs": cfg.n_obs,
        "graph_fingerprint": dataset.graph.fingerprint()})
    return 0


def _load_graph_arg(path):
    g = load_edge_list(path)
    report = validate_graph(g)
    if not report.ok:
        raise SystemExit(f"graph {path} is not connected: components {report.component_sizes}")
    return g


def _cmd_dist(argv):
    parser = argparse.ArgumentParser(prog="netclust dist",
                                     description="Pairwise observation distances")
    _add_common(parser)
    parser.add_argument("--graph", default=None, help="edge-list path (ge metric)")
    parser.add_argument("--attrs", required=True, help="attribute CSV path")
    parser.add_argument("--metric", choices=["ge", "euclidean"], default="ge")
    parser.add_argument("--backend", choices=["dense", "solver", "auto"], default="auto")
    parser.add_argument("--tol", type=float, default=1e-8, help="solver residual tolerance")
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    meta = {"metric": args.metric}
    if args.metric == "ge":
        if not args.graph:
            raise SystemExit("--metric ge requires --graph")
        g = _load_graph_arg(args.graph)
        attrs = load_attributes(args.attrs, graph=g)
        dist = pairwise_distances(g, attrs, backend=args.backend, tol=args.tol,
                                  threads=args.threads)
        meta.update({"backend": args.backend, "tol": args.tol,
                     "graph_fingerprint": g.fingerprint()})
    else:
        attrs = load_attributes(args.attrs)
        dist = euclidean_distances(attrs)
    save_distances(dist, _out_path(args, "distances.csv"))
    _write_meta(args, "dist", meta)
    return 0


def _cmd_tsne(argv):
    parser = argparse.ArgumentParser(prog="netclust tsne",
                                     description="2-D embedding of a distance matrix")
    _add_common(parser)
    parser.add_argument("--dist", required=True, help="distance CSV path")
    parser.add_argument("--perplexity", type=float, default=30.0)
    parser.add_argument("--iterations", type=int, default=1000)
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    dist = load_distances(args.dist)
    cfg = TsneConfig(perplexity=args.perplexity, iterations=args.iterations, seed=args.seed)
    emb = tsne_embed(dist, cfg)
    save_embedding(emb, _out_path(args, "embedding.csv"))
    _write_meta(args, "tsne", {
        "perplexity": cfg.resolved_perplexity(emb.n_observations),
        "iterations": args.iterations,
        "kl_initial": emb.kl_initial, "kl_final": emb.kl_final})
    return 0


def _cmd_dbscan(argv):
    parser = argparse.ArgumentParser(prog="netclust dbscan",
                                     description="Density clustering on distances or an embedding")
    _add_common(parser)
    parser.add_argument("--dist", default=None, help="distance CSV path")
    parser.add_argument("--embedding", default=None, help="embedding CSV path")
    parser.add_argument("--eps", type=float, default=None)
    parser.add_argument("--min-pts", type=int, default=4)
    parser.add_argument("--eps-mode", choices=["knee", "scan"], default="knee")
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    if bool(args.dist) == bool(args.embedding):
        raise SystemExit("pass exactly one of --dist or --embedding")
    if args.dist:
        dist = load_distances(args.dist)
    else:
        from .tsne import embedding_distances

        dist = embedding_distances(load_embedding(args.embedding))
    cfg = DbscanConfig(eps=args.eps, min_pts=args.min_pts, eps_mode=args.eps_mode)
    eps = cfg.resolve_eps(dist)
    labels = dbscan(dist, DbscanConfig(eps=eps, min_pts=args.min_pts))
    save_labels(dist.observation_ids, labels, _out_path(args, "labels.csv"))
    _write_meta(args, "dbscan", {
        "eps": eps, "min_pts": args.min_pts,
        "eps_mode": "explicit" if args.eps is not None else args.eps_mode,
        **cluster_stats(labels)})
    return 0


def _cmd_eval(argv):
    parser = argparse.ArgumentParser(prog="netclust eval",
                                     description="AMI of predicted labels against truth")
    _add_common(parser)
    parser.add_argument("--truth", required=True, help="truth labels CSV")
    parser.add_argument("--pred", required=True, help="predicted labels CSV")
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    truth_ids, _, truth_eval = load_labels(args.truth)
    pred_ids, pred_raw, pred_eval = load_labels(args.pred)
    if truth_ids != pred_ids:
        raise SystemExit("truth and prediction observation ids differ")
    payload = {"ami": ami(truth_eval, pred_eval), **cluster_stats(pred_raw)}
    _write_json(_out_path(args, "metrics.json"), payload)
    return 0


def _cmd_pipeline(argv):
    parser = argparse.ArgumentParser(prog="netclust pipeline",
                                     description="Full method variant on user data")
    _add_common(parser)
    parser.add_argument("--graph", default=None, help="edge-list path")
    parser.add_argument("--attrs", required=True, help="attribute CSV path")
    parser.add_argument("--method", choices=list(IN_SCOPE_METHODS), default="ge+tsne")
    parser.add_argument("--eps", type=float, default=None)
    parser.add_argument("--min-pts", type=int, default=4)
    parser.add_argument("--eps-mode", choices=["scan", "knee"], default="scan")
    parser.add_argument("--perplexity", type=float, default=30.0)
    parser.add_argument("--iterations", type=int, default=1000)
    parser.add_argument("--backend", choices=["dense", "solver", "auto"], default="auto")
    parser.add_argument("--truth", default=None, help="truth labels CSV for scoring")
    parser.add_argument("--plot", action="store_true", help="write embedding.svg")
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    graph = _load_graph_arg(args.graph) if args.graph else None
    attrs = load_attributes(args.attrs, graph=graph)
    spec = PipelineSpec(
        method=args.method, backend=args.backend, seed=args.seed, threads=args.threads,
        tsne=TsneConfig(perplexity=args.perplexity, iterations=args.iterations),
        dbscan=DbscanConfig(eps=args.eps, min_pts=args.min_pts, eps_mode=args.eps_mode))
    result = run_pipeline(graph, attrs, spec)
    save_labels(result.observation_ids, result.labels, _out_path(args, "labels.csv"))
    if result.embedding is not None:
        save_embedding(result.embedding, _out_path(args, "embedding.csv"))
        if args.plot:
            scatter_svg(result.embedding, result.labels, _out_path(args, "embedding.svg"))
    metrics = {"ami": None, **cluster_stats(result.labels)}
    if args.truth:
        truth_ids, _, truth_eval = load_labels(args.truth)
        if truth_ids != result.observation_ids:
            raise SystemExit("truth observation ids do not match the attribute matrix")
        metrics["ami"] = ami(truth_eval, result.eval_labels)
    _write_json(_out_path(args, "metrics.json"), metrics)
    _write_meta(args, "pipeline", result.metadata)
    return 0


def _cmd_validate(argv):
    parser = argparse.ArgumentParser(prog="netclust validate",
                                     description="Reproduce the synthetic validation sweeps")
    _add_common(parser)
    parser.add_argument("--runs", type=int, default=10)
    parser.add_argument("--methods", default=",".join(IN_SCOPE_METHODS),
                        help="comma-separated method list")
    parser.add_argument("--no-plots", action="store_true")
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    base = SbmConfig(seed=args.seed)
    report = reproduce_validation(args.out, runs=args.runs, base=base,
                                  methods=args.methods.split(","),
                                  threads=args.threads, plots=not args.no_plots)
    for experiment, ranking in sorted(report["rankings"].items()):
        means = report["method_means"]
        shown = ", ".join(f"{m}={means[m][experiment]:.3f}" for m in ranking)
        print(f"{experiment}: {shown}")
    if report["failures"]:
        print(f"{len(report['failures'])} run(s) failed; see report.json", file=sys.stderr)
    return 0


def _cmd_bench_runtime(argv):
    parser = argparse.ArgumentParser(prog="netclust bench-runtime",
                                     description="Solver runtime scaling in nodes or edges")
    _add_common(parser)
    parser.add_argument("--mode", choices=["nodes", "edges"], default="nodes")
    parser.add_argument("--sizes", default=None,
                        help="comma-separated ascending sizes")
    parser.add_argument("--pairs", type=int, default=20, help="query pairs per size")
    parser.add_argument("--edge-nodes", type=int, default=EDGE_MODE_NODES,
                        help="fixed node count for edge mode")
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    if args.sizes:
        sizes = [int(float(s)) for s in args.sizes.split(",")]
    elif args.mode == "nodes":
        sizes = [100, 300, 1000, 3000, 10000, 30000, 100000]
    else:
        sizes = [40000, 80000, 160000, 320000, 640000]
    result = bench_runtime(args.mode, sizes, pairs_per_size=args.pairs,
                           seed=args.seed, edge_mode_nodes=args.edge_nodes)
    csv_path = _out_path(args, f"bench_{args.mode}.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("size,n_nodes,n_edges,setup_seconds,seconds_per_query\n")
        for r in result["rows"]:
            fh.write(f"{r['size']},{r['n_nodes']},{r['n_edges']},"
                     f"{r['setup_seconds']!r},{r['seconds_per_query']!r}\n")
    fit = result["fit"]
    _write_json(_out_path(args, f"bench_{args.mode}_fit.json"),
                {"mode": args.mode, "fit": fit.as_dict(), "caps": result["caps"],
                 "pairs_per_size": args.pairs, "sizes": sizes})
    print(f"{args.mode} exponent: {fit.exponent:.3f} "
          f"(95% CI [{fit.ci_low:.3f}, {fit.ci_high:.3f}])")
    return 0


_COMMANDS = {
    "sbm-gen": _cmd_sbm_gen,
    "dist": _cmd_dist,
    "tsne": _cmd_tsne,
    "dbscan": _cmd_dbscan,
    "eval": _cmd_eval,
    "pipeline": _cmd_pipeline,
    "validate": _cmd_validate,
    "bench-runtime": _cmd_bench_runtime,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print("usage: netclust <command> [options]\n\ncommands:")
        for name in _COMMANDS:
            print(f"  {name}")
        print("\nrun 'netclust <command> --help' for command options")
        return 0 if argv else 2
    if argv[0] == "--version":
        print(__version__)
        return 0
    command = _COMMANDS.get(argv[0])
    if command is None:
        print(f"unknown command {argv[0]!r}; run 'netclust --help'", file=sys.stderr)
        return 2
    try:
        return command(argv[1:])
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
