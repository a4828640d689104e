"""Planted-community benchmark data: SBM graphs plus noisy block attributes."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .distance import AttributeMatrix
from .graph import Graph
from .seeding import derive_rng

SWEEP_EXPERIMENTS = ("sigma", "dout", "nodes", "nobs")


class SbmConnectivityError(RuntimeError):
    """All resampling attempts produced a disconnected graph."""


@dataclass(frozen=True)
class SbmConfig:
    """Stochastic block model plus attribute-noise settings.

    ``avg_degree`` is the expected total degree of a node and ``d_out`` the
    expected number of its edges leaving its own community.
    """

    k: int = 4
    community_size: int = 50
    avg_degree: float = 20.0
    d_out: float = 2.0
    sigma: float = 1.0
    n_obs: int = 300
    seed: int = 0

    @property
    def n_nodes(self):
        return self.k * self.community_size

    def validate(self):
        if self.k < 1:
            raise ValueError("community count must be at least 1")
        if self.community_size < 2:
            raise ValueError("community size must be at least 2")
        if not 0.0 <= self.d_out <= self.avg_degree:
            raise ValueError("d_out must lie in [0, avg_degree]")
        if self.k == 1 and self.d_out > 0.0:
            raise ValueError("d_out must be 0 with a single community")
        if self.sigma < 0.0:
            raise ValueError("sigma must be non-negative")
        if self.n_obs < self.k:
            raise ValueError("need at least one observation per community")
        if self.edge_probabilities()[0] > 1.0 or self.edge_probabilities()[1] > 1.0:
            raise ValueError("edge probability above 1; lower avg_degree or enlarge communities")

    def edge_probabilities(self):
        p_in = (self.avg_degree - self.d_out) / (self.community_size - 1)
        p_out = (self.d_out / (self.n_nodes - self.community_size)
                 if self.k > 1 else 0.0)
        return p_in, p_out


@dataclass
class LabeledDataset:
    graph: Graph
    attributes: AttributeMatrix
    truth: np.ndarray
    node_truth: np.ndarray


def _distinct_uniform(rng, n_total, m):
    """Uniform m-subset of range(n_total), returned sorted."""
    if m <= 0:
        return np.empty(0, dtype=np.int64)
    if m >= n_total:
        return np.arange(n_total, dtype=np.int64)
    uniq = np.unique(rng.integers(0, n_total, size=m + int(3 * np.sqrt(m)) + 16))
    while uniq.size < m:
        extra = rng.integers(0, n_total, size=(m - uniq.size) + 16)
        uniq = np.union1d(uniq, extra)
    if uniq.size == m:
        return uniq
    # the unique pool is exchangeable over values, so a uniform subset of it
    # is a uniform subset of the full range
    sel = rng.choice(uniq.size, size=m, replace=False)
    return np.sort(uniq[sel])


def _sample_block_edges(rng, cfg):
    p_in, p_out = cfg.edge_probabilities()
    s = cfg.community_size
    us, vs = [], []
    offsets = np.arange(s, dtype=np.int64) * (s - 1) - (
        np.arange(s, dtype=np.int64) * (np.arange(s, dtype=np.int64) - 1)) // 2
    n_pairs_in = s * (s - 1) // 2
    for a in range(cfg.k):
        base = a * s
        if p_in > 0.0:
            m = int(rng.binomial(n_pairs_in, p_in))
            idx = _distinct_uniform(rng, n_pairs_in, m)
            i = np.searchsorted(offsets, idx, side="right") - 1
            j = i + 1 + (idx - offsets[i])
            us.append(base + i)
            vs.append(base + j)
        for b in range(a + 1, cfg.k):
            if p_out <= 0.0:
                continue
            m = int(rng.binomial(s * s, p_out))
            idx = _distinct_uniform(rng, s * s, m)
            us.append(base + idx // s)
            vs.append(b * s + idx % s)
    if us:
        return np.concatenate(us), np.concatenate(vs)
    return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)


def generate_sbm_graph(cfg, max_attempts=100):
    """Sample a connected SBM graph and per-node community labels.

    Whole graphs are resampled (fresh RNG stream per attempt) until one is
    connected, preserving the block-model distribution conditioned on
    connectivity.
    """
    cfg.validate()
    node_ids = [str(i) for i in range(cfg.n_nodes)]
    node_truth = np.repeat(np.arange(cfg.k), cfg.community_size)
    for attempt in range(max_attempts):
        rng = derive_rng(cfg.seed, "sbm-graph", attempt)
        eu, ev = _sample_block_edges(rng, cfg)
        g = Graph.from_arrays(node_ids, eu, ev, np.ones(eu.size))
        n_comp, _ = g.component_labels()
        if n_comp == 1:
            return g, node_truth
    raise SbmConnectivityError(
        f"no connected sample in {max_attempts} attempts; "
        "increase avg_degree or d_out to raise edge density")


def generate_observations(cfg, node_truth, graph=None):
    """Community-aligned noisy observations plus their ground-truth labels.

    Observation ``i`` belongs to community ``i mod k``. Entries over the own
    community's nodes are uniform on [0.5, 1); all others uniform on
    [0, 0.5). Gaussian noise with standard deviation ``sigma`` is then added
    entrywise, without clipping.
    """
    cfg.validate()
    node_truth = np.asarray(node_truth)
    if node_truth.size != cfg.n_nodes:
        raise ValueError("node_truth length does not match the configured node count")
    rng = derive_rng(cfg.seed, "sbm-obs")
    truth = np.arange(cfg.n_obs, dtype=np.int64) % cfg.k
    uniform = rng.random((cfg.n_obs, cfg.n_nodes))
    member = truth[:, None] == node_truth[None, :]
    values = np.where(member, 0.5 + 0.5 * uniform, 0.5 * uniform)
    values = values + rng.normal(0.0, cfg.sigma, size=values.shape)
    attrs = AttributeMatrix(
        values,
        observation_ids=[f"o{i}" for i in range(cfg.n_obs)],
        column_ids=graph.node_ids if graph is not None else None,
        graph_fingerprint=graph.fingerprint() if graph is not None else None)
    return attrs, truth


def generate_dataset(cfg):
    graph, node_truth = generate_sbm_graph(cfg)
    attrs, truth = generate_observations(cfg, node_truth, graph)
    return LabeledDataset(graph, attrs, truth, node_truth)


def config_for_sweep_value(base, experiment, value):
    if experiment == "sigma":
        return replace(base, sigma=float(value))
    if experiment == "dout":
        return replace(base, d_out=float(value))
    if experiment == "nodes":
        size, rem = divmod(int(value), base.k)
        if rem:
            raise ValueError(f"node count {value} is not divisible by k={base.k}")
        return replace(base, community_size=size)
    if experiment == "nobs":
        return replace(base, n_obs=int(value))
    raise ValueError(f"unknown experiment {experiment!r}; choose from {SWEEP_EXPERIMENTS}")


@dataclass
class SweepResult:
    experiment: str
    rows: list          # dicts: value, method, run, ami, n_clusters, n_noise
    failures: list      # dicts: value, method, run, error
    summary: list       # dicts: value, method, ami_mean, ami_std, n_runs

    def series(self, method):
        """(values, means, stds) for one method, in value order."""
        entries = [s for s in self.summary if s["method"] == method]
        return ([s["value"] for s in entries],
                [s["ami_mean"] for s in entries],
                [s["ami_std"] for s in entries])


def sweep(experiment, values, runs, base, methods, threads=1):
    """AMI of each method over a parameter sweep with independent runs.

    Every (value, run) cell generates one dataset from a seed derived from
    the base seed and the cell coordinates, runs every method on it, and
    scores against the planted labels. Failed runs are excluded from the
    aggregates and reported in ``failures``.
    """
    from .pipeline import score_method_on_dataset, validate_methods

    validate_methods(methods)
    if experiment not in SWEEP_EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}; choose from {SWEEP_EXPERIMENTS}")

    cells = [(vi, value, run) for vi, value in enumerate(values) for run in range(runs)]

    def run_cell(cell):
        _, value, run = cell
        out = []
        try:
            cfg = config_for_sweep_value(base, experiment, value)
            cfg = replace(cfg, seed=derive_entropy_seed(base.seed, experiment, value, run))
            dataset = generate_dataset(cfg)
        except Exception as exc:  # dataset failure poisons every method in the cell
            return [(value, method, run, None, f"{type(exc).__name__}: {exc}")
                    for method in methods]
        for method in methods:
            try:
                scored = score_method_on_dataset(dataset, method,
                                                 seed=derive_entropy_seed(cfg.seed, method))
                out.append((value, method, run, scored, None))
            except Exception as exc:
                out.append((value, method, run, None, f"{type(exc).__name__}: {exc}"))
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cell_results = list(pool.map(run_cell, cells))
    else:
        cell_results = [run_cell(c) for c in cells]

    rows, failures = [], []
    for results in cell_results:
        for value, method, run, scored, error in results:
            if error is not None:
                failures.append({"value": value, "method": method, "run": run, "error": error})
            else:
                rows.append({"value": value, "method": method, "run": run, **scored})
    summary = []
    for value in values:
        for method in methods:
            amis = [r["ami"] for r in rows if r["value"] == value and r["method"] == method]
            if amis:
                arr = np.array(amis)
                std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
                summary.append({"value": value, "method": method,
                                "ami_mean": float(arr.mean()), "ami_std": std,
                                "n_runs": arr.size})
    return SweepResult(experiment, rows, failures, summary)


def derive_entropy_seed(*parts):
    """64-bit seed derived from a label path; stable across platforms."""
    from .seeding import derive_entropy

    return derive_entropy(*parts) % (1 << 63)
