"""Generalized Euclidean distances between node-attribute vectors.

The distance between two attribute vectors is the square root of the
quadratic form of their difference under the Laplacian pseudoinverse, i.e.
the effective-resistance norm of the difference signal. Small graphs use a
cached dense pseudoinverse; large graphs solve one Laplacian linear system
per pair instead.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels
from .graph import build_laplacian

DENSE_CROSSOVER = 10_000  # advisory node count above which the solver wins
DEFAULT_SOLVER_TOL = 1e-8


class SolverConvergenceError(RuntimeError):
    """CG failed to reach the target residual; carries what it achieved."""

    def __init__(self, residual, iterations, message=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message or
                         f"solver stalled at relative residual {residual:.3e} "
                         f"after {iterations} iterations")


class PairwiseDistanceError(RuntimeError):
    """A per-pair failure inside a pairwise computation, with the pair indices."""

    def __init__(self, i, j, cause):
        self.pair = (i, j)
        super().__init__(f"pair ({i}, {j}): {cause}")


class AttributeMatrix:
    """Observations as rows; one column per graph node, in graph node order."""

    def __init__(self, values, observation_ids=None, column_ids=None, graph_fingerprint=None):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("attribute values must be a 2-D array")
        if not np.all(np.isfinite(values)):
            raise ValueError("attribute values must be finite")
        self.values = values
        self.values.setflags(write=False)
        n = values.shape[0]
        self.observation_ids = (list(observation_ids) if observation_ids is not None
                                else [f"o{i}" for i in range(n)])
        if len(self.observation_ids) != n:
            raise ValueError("observation id count does not match row count")
        self.column_ids = list(column_ids) if column_ids is not None else None
        if self.column_ids is not None and len(self.column_ids) != values.shape[1]:
            raise ValueError("column id count does not match column count")
        self.graph_fingerprint = graph_fingerprint

    @property
    def n_observations(self):
        return self.values.shape[0]

    @property
    def n_columns(self):
        return self.values.shape[1]

    def check_graph(self, g):
        """Verify column compatibility with ``g``; raises on mismatch."""
        if self.n_columns != g.n_nodes:
            raise ValueError(
                f"attribute matrix has {self.n_columns} columns, graph has {g.n_nodes} nodes")
        if self.graph_fingerprint is not None and self.graph_fingerprint != g.fingerprint():
            raise ValueError("attribute matrix was built for a different graph "
                             "(fingerprint mismatch)")
        if self.column_ids is not None and self.column_ids != g.node_ids:
            raise ValueError("attribute columns do not match graph node order")


class DistanceMatrix:
    """Symmetric non-negative pairwise distances with a metric tag."""

    def __init__(self, values, observation_ids=None, metric="euclidean"):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.array_equal(values, values.T):
            raise ValueError("distance matrix must be symmetric")
        if np.any(np.diag(values) != 0.0):
            raise ValueError("distance matrix must have a zero diagonal")
        if np.any(values < 0.0) or not np.all(np.isfinite(values)):
            raise ValueError("distances must be finite and non-negative")
        self.values = values
        self.values.setflags(write=False)
        n = values.shape[0]
        self.observation_ids = (list(observation_ids) if observation_ids is not None
                                else [f"o{i}" for i in range(n)])
        if len(self.observation_ids) != n:
            raise ValueError("observation id count does not match matrix size")
        self.metric = metric

    @property
    def n_observations(self):
        return self.values.shape[0]


class PseudoinverseCache:
    """Dense Moore-Penrose pseudoinverse of a graph Laplacian."""

    def __init__(self, matrix, fingerprint):
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float64)
        self.matrix.setflags(write=False)
        self.fingerprint = fingerprint

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def save(self, path):
        np.savez_compressed(path, matrix=self.matrix, fingerprint=np.str_(self.fingerprint))

    @classmethod
    def load(cls, path, graph=None):
        with np.load(path) as data:
            cache = cls(data["matrix"], str(data["fingerprint"]))
        if graph is not None and cache.fingerprint != graph.fingerprint():
            raise ValueError("cached pseudoinverse belongs to a different graph")
        return cache


def build_pinv_cache(g):
    """Pseudoinverse via rank-one deflation: invert L + J/n, subtract J/n.

    Adding the constant matrix J/n moves the null eigenvalue to one while
    leaving the orthogonal complement of the ones vector untouched, so the
    shifted matrix is invertible and subtracting J/n restores the zero mode.
    """
    view = build_laplacian(g)
    n = view.dimension
    shifted = view.matrix.toarray() + 1.0 / n
    pinv = np.linalg.inv(shifted) - 1.0 / n
    pinv = (pinv + pinv.T) / 2.0
    return PseudoinverseCache(pinv, view.fingerprint)


class SolverHandle:
    """Preconditioned-CG state for repeated Laplacian solves on one graph."""

    def __init__(self, g, tol=DEFAULT_SOLVER_TOL, max_iter=None):
        view = build_laplacian(g)
        mat = view.matrix
        self.indptr = np.ascontiguousarray(mat.indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(mat.indices, dtype=np.int64)
        self.data = np.ascontiguousarray(mat.data, dtype=np.float64)
        diag = mat.diagonal()
        self.inv_diag = np.where(diag > 0.0, 1.0 / np.where(diag > 0.0, diag, 1.0), 1.0)
        self.tol = float(tol)
        self.max_iter = int(max_iter) if max_iter is not None else max(200, 2 * view.dimension)
        self.fingerprint = view.fingerprint
        self.dimension = view.dimension

    def solve(self, b):
        """Solve L x = b for b orthogonal to ones; returns x re-centered to 1^T x = 0."""
        b = np.ascontiguousarray(b, dtype=np.float64)
        b = b - b.mean()
        x, rel, iters, ok = _kernels.cg_solve(
            self.indptr, self.indices, self.data, self.inv_diag, b, self.tol, self.max_iter)
        if not ok:
            raise SolverConvergenceError(rel, iters)
        return x - x.mean()


def _check_vector(vec, dim, name):
    vec = np.ascontiguousarray(vec, dtype=np.float64)
    if vec.shape != (dim,):
        raise ValueError(f"{name} has shape {vec.shape}, expected ({dim},)")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{name} contains non-finite values")
    return vec


def ge_distance_dense(cache, obs_a, obs_b):
    """Resistance-metric distance using the cached dense pseudoinverse."""
    obs_a = _check_vector(obs_a, cache.dimension, "first vector")
    obs_b = _check_vector(obs_b, cache.dimension, "second vector")
    diff = obs_a - obs_b
    quad = float(diff @ (cache.matrix @ diff))
    return float(np.sqrt(max(0.0, quad)))


def ge_distance_solver(handle, obs_a, obs_b):
    """Resistance-metric distance via one CG solve; no pseudoinverse needed."""
    obs_a = _check_vector(obs_a, handle.dimension, "first vector")
    obs_b = _check_vector(obs_b, handle.dimension, "second vector")
    diff = obs_a - obs_b
    centered = diff - diff.mean()
    if not np.any(centered):
        return 0.0
    x = handle.solve(centered)
    return float(np.sqrt(max(0.0, float(centered @ x))))


def _euclidean_pairwise(values):
    n = values.shape[0]
    out = np.zeros((n, n))
    for i in range(n - 1):
        diff = values[i + 1:] - values[i]
        out[i, i + 1:] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    upper = np.triu(out, 1)
    return upper + upper.T


def euclidean_distances(attrs):
    """Plain pairwise L2 distances between observation rows."""
    values = attrs.values if isinstance(attrs, AttributeMatrix) else np.asarray(attrs, float)
    if not np.all(np.isfinite(values)):
        raise ValueError("attribute values must be finite")
    ids = attrs.observation_ids if isinstance(attrs, AttributeMatrix) else None
    return DistanceMatrix(_euclidean_pairwise(values), ids, metric="euclidean")


def _ge_pairwise_dense(cache, values):
    # reuse L+ across all pairs: project rows once, then pair up differences
    proj = values @ cache.matrix
    n = values.shape[0]
    out = np.zeros((n, n))
    for i in range(n - 1):
        d_obs = values[i + 1:] - values[i]
        d_proj = proj[i + 1:] - proj[i]
        quad = np.einsum("ij,ij->i", d_obs, d_proj)
        out[i, i + 1:] = np.sqrt(np.maximum(quad, 0.0))
    upper = np.triu(out, 1)
    return upper + upper.T


def _ge_pairwise_solver(handle, values, threads):
    n = values.shape[0]
    out = np.zeros((n, n))

    def fill_row(i):
        for j in range(i + 1, n):
            try:
                out[i, j] = ge_distance_solver(handle, values[i], values[j])
            except (SolverConvergenceError, ValueError) as exc:
                raise PairwiseDistanceError(i, j, exc) from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_row, range(n - 1)))
    else:
        for i in range(n - 1):
            fill_row(i)
    upper = np.triu(out, 1)
    return upper + upper.T


def pairwise_distances(g, attrs, backend="auto", cache=None, handle=None,
                       tol=DEFAULT_SOLVER_TOL, max_iter=None, threads=1,
                       dense_crossover=DENSE_CROSSOVER):
    """All-pairs resistance-metric distances over the rows of ``attrs``.

    ``backend`` is ``dense`` (cached pseudoinverse), ``solver`` (one CG solve
    per pair), or ``auto``, which picks dense up to ``dense_crossover`` nodes.
    Either backend yields the same matrix within the solver tolerance.
    """
    attrs.check_graph(g)
    if backend == "auto":
        backend = "dense" if g.n_nodes <= dense_crossover else "solver"
    if backend == "dense":
        if cache is None:
            cache = build_pinv_cache(g)
        values_out = _ge_pairwise_dense(cache, attrs.values)
    elif backend == "solver":
        if handle is None:
            handle = SolverHandle(g, tol=tol, max_iter=max_iter)
        values_out = _ge_pairwise_solver(handle, attrs.values, threads)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return DistanceMatrix(values_out, attrs.observation_ids, metric="ge")


def save_distances(dm, path):
    """CSV with observation ids as header row and leading column."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("observation_id," + ",".join(dm.observation_ids) + "\n")
        for oid, row in zip(dm.observation_ids, dm.values):
            fh.write(oid + "," + ",".join(repr(float(v)) for v in row) + "\n")


def load_distances(path, metric="euclidean"):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if header[0] != "observation_id":
            raise ValueError("distance CSV must start with an observation_id header")
        ids = header[1:]
        rows = []
        row_ids = []
        for line in fh:
            cells = line.rstrip("\n").split(",")
            row_ids.append(cells[0])
            rows.append([float(c) for c in cells[1:]])
    if row_ids != ids:
        raise ValueError("distance CSV row ids do not match header ids")
    return DistanceMatrix(np.array(rows, dtype=np.float64), ids, metric=metric)


def save_attributes(attrs, path):
    columns = attrs.column_ids or [f"c{i}" for i in range(attrs.n_columns)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("observation_id," + ",".join(columns) + "\n")
        for oid, row in zip(attrs.observation_ids, attrs.values):
            fh.write(oid + "," + ",".join(repr(float(v)) for v in row) + "\n")


def load_attributes(path, graph=None):
    """Read an attribute CSV; when ``graph`` is given, verify column order."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if header[0] != "observation_id":
            raise ValueError("attribute CSV must start with an observation_id header")
        columns = header[1:]
        ids = []
        rows = []
        for line in fh:
            cells = line.rstrip("\n").split(",")
            ids.append(cells[0])
            rows.append([float(c) for c in cells[1:]])
    attrs = AttributeMatrix(np.array(rows, dtype=np.float64), ids, column_ids=columns)
    if graph is not None:
        if columns != graph.node_ids:
            raise ValueError("attribute columns do not match graph node order")
        attrs.graph_fingerprint = graph.fingerprint()
    return attrs
