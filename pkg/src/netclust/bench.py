"""Runtime-scaling harness for the solver-backed distance queries.

Times only the per-pair distance query; graph generation and solver setup
are excluded (setup is reported separately). A log-log least-squares fit
summarizes how query time scales with node or edge count. Wall-clock values
are inherently non-reproducible, so these are the only package outputs
exempt from byte-identical determinism.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _kernels
from .distance import SolverHandle, ge_distance_solver
from .graph import Graph, largest_component
from .seeding import derive_rng
from .synth import SbmConfig, _sample_block_edges

BENCH_CLUSTERS = 4
BENCH_AVG_DEGREE = 4.0
MIXING_FRACTION = 0.1  # d_out as a share of average degree, as in the defaults
EDGE_MODE_NODES = 20_000


@dataclass
class PowerLawFit:
    exponent: float
    intercept: float
    stderr: float
    ci_low: float
    ci_high: float

    def as_dict(self):
        return {"exponent": self.exponent, "intercept": self.intercept,
                "stderr": self.stderr, "ci95": [self.ci_low, self.ci_high]}


def fit_power_law(sizes, times):
    """Least-squares exponent of time ~ size^b, with a 95% CI on b."""
    sizes = np.asarray(sizes, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    if sizes.size < 2:
        raise ValueError("need at least 2 points to fit")
    if np.any(sizes <= 0) or np.any(times <= 0):
        raise ValueError("sizes and times must be positive")
    res = stats.linregress(np.log(sizes), np.log(times))
    df = sizes.size - 2
    half = float(stats.t.ppf(0.975, df) * res.stderr) if df > 0 else 0.0
    return PowerLawFit(float(res.slope), float(res.intercept), float(res.stderr),
                       float(res.slope) - half, float(res.slope) + half)


def _bench_graph(mode, size, n_nodes_fixed, seed):
    """One SBM draw, reduced to its largest component.

    Sparse block models at average degree 4 are almost never fully connected
    at scale, so the harness times the giant component instead of resampling
    for connectivity.
    """
    if mode == "nodes":
        n_target = int(size)
        avg_degree = BENCH_AVG_DEGREE
    else:
        n_target = int(n_nodes_fixed)
        avg_degree = 2.0 * float(size) / n_target
    community_size = max(2, n_target // BENCH_CLUSTERS)
    cfg = SbmConfig(k=BENCH_CLUSTERS, community_size=community_size,
                    avg_degree=avg_degree, d_out=MIXING_FRACTION * avg_degree,
                    sigma=1.0, n_obs=BENCH_CLUSTERS, seed=0)
    cfg.validate()
    rng = derive_rng(seed, "bench-graph", mode, size)
    eu, ev = _sample_block_edges(rng, cfg)
    node_ids = [str(i) for i in range(cfg.n_nodes)]
    g = Graph.from_arrays(node_ids, eu, ev, np.ones(eu.size))
    return largest_component(g)


def bench_runtime(mode, sizes, pairs_per_size=20, seed=0,
                  edge_mode_nodes=EDGE_MODE_NODES, tol=1e-8):
    """Time solver-backed distance queries across growing problem sizes.

    ``mode`` is ``nodes`` (4 communities, average degree 4, growing node
    count) or ``edges`` (fixed node count, growing density). Returns per-size
    rows plus the fitted scaling exponent over the realized sizes.
    """
    if mode not in ("nodes", "edges"):
        raise ValueError(f"unknown mode {mode!r}")
    sizes = [int(s) for s in sizes]
    if len(sizes) < 4:
        raise ValueError("need at least 4 sizes for a scaling fit")
    if sorted(sizes) != sizes:
        raise ValueError("sizes must be ascending")
    _kernels.warmup()
    rows = []
    for size in sizes:
        g = _bench_graph(mode, size, edge_mode_nodes, seed)
        t0 = time.perf_counter()
        handle = SolverHandle(g, tol=tol)
        setup_seconds = time.perf_counter() - t0
        rng = derive_rng(seed, "bench-attrs", mode, size)
        left = rng.random((pairs_per_size, g.n_nodes))
        right = rng.random((pairs_per_size, g.n_nodes))
        ge_distance_solver(handle, left[0], right[0])  # warm path, untimed
        t0 = time.perf_counter()
        for p in range(pairs_per_size):
            ge_distance_solver(handle, left[p], right[p])
        query_seconds = (time.perf_counter() - t0) / pairs_per_size
        rows.append({"size": size, "n_nodes": g.n_nodes, "n_edges": g.n_edges,
                     "setup_seconds": setup_seconds,
                     "seconds_per_query": query_seconds})
    x_key = "n_nodes" if mode == "nodes" else "n_edges"
    fit = fit_power_law([r[x_key] for r in rows], [r["seconds_per_query"] for r in rows])
    return {"mode": mode, "rows": rows, "fit": fit,
            "caps": {"edge_mode_nodes": edge_mode_nodes if mode == "edges" else None,
                     "kernel_backend": _kernels.ACTIVE_BACKEND}}
