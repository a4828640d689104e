"""Exact tSNE over a precomputed distance matrix.

Works on any metric because affinities are built directly from the given
distances: per-row Gaussian bandwidths are calibrated to a target perplexity
by binary search, the joint affinity matrix is symmetrized, and a 2-D layout
is optimized against the Student-t kernel by momentum gradient descent with
early exaggeration and adaptive gains.

The initial layout draws each point's coordinates from an RNG stream keyed
to (seed, observation id), and every in-loop reduction is order-invariant,
so permuting the rows of the input (with their ids) permutes the rows of the
embedding bitwise.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .distance import DistanceMatrix
from .seeding import derive_rng

INIT_STD = 1e-4
MIN_GAIN = 0.01


class CalibrationError(RuntimeError):
    """Bandwidth binary search failed to bracket the target perplexity."""


class DegenerateInputError(ValueError):
    """The distance matrix carries no usable structure (all zeros)."""


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    exaggeration: float = 12.0
    exaggeration_iters: int = 250
    learning_rate: float = None  # resolved to max(n / 12, 50)
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    calibration_tol: float = 1e-5
    calibration_max_iter: int = 200
    seed: int = 0

    def validate(self):
        for name in ("perplexity", "iterations", "exaggeration", "exaggeration_iters",
                     "momentum_early", "momentum_late", "calibration_tol",
                     "calibration_max_iter"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def resolved_perplexity(self, n):
        return min(self.perplexity, (n - 1) / 3.0)

    def resolved_learning_rate(self, n):
        return self.learning_rate if self.learning_rate is not None else max(n / 12.0, 50.0)


@dataclass
class Embedding:
    coords: np.ndarray
    observation_ids: list
    kl_initial: float
    kl_final: float

    @property
    def n_observations(self):
        return self.coords.shape[0]


def _sorted_mean(column):
    return float(np.sum(np.sort(column))) / column.size


def _initial_layout(observation_ids, seed):
    coords = np.empty((len(observation_ids), 2))
    for i, oid in enumerate(observation_ids):
        coords[i] = derive_rng(seed, "tsne-init", oid).normal(0.0, INIT_STD, size=2)
    coords[:, 0] -= _sorted_mean(coords[:, 0])
    coords[:, 1] -= _sorted_mean(coords[:, 1])
    return coords


def joint_affinities(dist, perplexity, tol=1e-5, max_iter=200):
    """Symmetrized affinity matrix P from a distance matrix.

    P is symmetric, non-negative, has a zero diagonal, and sums to one.
    Raises ``CalibrationError`` naming the first row whose bandwidth search
    fails.
    """
    values = dist.values if isinstance(dist, DistanceMatrix) else np.asarray(dist, float)
    n = values.shape[0]
    _, cond, bad = _kernels.calibrate_affinities(
        values * values, float(np.log2(perplexity)), tol, max_iter)
    if bad >= 0:
        ids = dist.observation_ids if isinstance(dist, DistanceMatrix) else None
        label = f"row {bad}" + (f" ({ids[bad]})" if ids else "")
        raise CalibrationError(f"bandwidth search did not converge for {label}; "
                               f"target perplexity {perplexity} may be infeasible")
    return (cond + cond.T) / (2.0 * n)


def tsne_embed(dist, cfg=TsneConfig()):
    """Embed the observations behind a distance matrix into 2-D."""
    cfg.validate()
    values = dist.values
    n = values.shape[0]
    if n < 4:
        raise ValueError(f"need at least 4 observations, got {n}")
    if not values.any():
        raise DegenerateInputError(
            "all pairwise distances are zero; perplexity calibration is impossible")
    perplexity = cfg.resolved_perplexity(n)
    p = joint_affinities(dist, perplexity, cfg.calibration_tol, cfg.calibration_max_iter)
    y0 = _initial_layout(dist.observation_ids, cfg.seed)
    coords, kl_init, kl_final = _kernels.tsne_run(
        p, y0, int(cfg.iterations), float(cfg.resolved_learning_rate(n)),
        float(cfg.exaggeration), int(cfg.exaggeration_iters),
        float(cfg.momentum_early), float(cfg.momentum_late), MIN_GAIN)
    if not np.all(np.isfinite(coords)):
        raise RuntimeError("embedding diverged to non-finite coordinates")
    return Embedding(coords, list(dist.observation_ids), float(kl_init), float(kl_final))


def perplexity_calibration(row_distances, target_perplexity, tol=1e-5, max_iter=200):
    """Gaussian precision whose conditional distribution hits the target perplexity.

    ``row_distances`` are the (unsquared) distances from one observation to
    the others. Convergence means the base-2 log of the achieved perplexity
    is within ``tol`` of the target's.
    """
    d = np.ascontiguousarray(row_distances, dtype=np.float64)
    if np.count_nonzero(np.isfinite(d) & (d > 0)) < 2:
        raise ValueError("need at least 2 finite positive distances")
    if not np.all(np.isfinite(d)):
        raise ValueError("distances must be finite")
    beta, _, achieved, ok = _kernels.calibrate_row(
        d * d, float(np.log2(target_perplexity)), tol, max_iter)
    if not ok:
        raise CalibrationError(
            f"bandwidth search did not converge: achieved log2-perplexity {achieved:.6f}, "
            f"target {np.log2(target_perplexity):.6f}")
    return float(beta)


def conditional_from_bandwidth(row_distances, beta):
    """Conditional neighbor distribution implied by a bandwidth; test aid."""
    d = np.asarray(row_distances, float)
    w = np.exp(-beta * (d * d - np.min(d * d)))
    return w / w.sum()


def embedding_distances(emb):
    """Euclidean distances between embedded points, as a DistanceMatrix."""
    from .distance import _euclidean_pairwise

    return DistanceMatrix(_euclidean_pairwise(emb.coords), emb.observation_ids,
                          metric="euclidean")


def save_embedding(emb, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("observation_id,x,y\n")
        for oid, (x, y) in zip(emb.observation_ids, emb.coords):
            fh.write(f"{oid},{float(x)!r},{float(y)!r}\n")


def load_embedding(path):
    ids, coords = [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "observation_id,x,y":
            raise ValueError("embedding CSV must have header observation_id,x,y")
        for line in fh:
            oid, x, y = line.rstrip("\n").split(",")
            ids.append(oid)
            coords.append((float(x), float(y)))
    return Embedding(np.array(coords, dtype=np.float64), ids, float("nan"), float("nan"))


def scatter_svg(emb, labels, path, title=None):
    """Cluster-colored scatter plot of an embedding, written as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "netclust"}):
        fig, ax = plt.subplots(figsize=(5, 5))
        labels = np.asarray(labels)
        for lab in np.unique(labels):
            mask = labels == lab
            name = "noise" if lab == -1 else f"cluster {lab}"
            ax.scatter(emb.coords[mask, 0], emb.coords[mask, 1], s=12, label=name)
        ax.legend(loc="best", fontsize="small")
        if title:
            ax.set_title(title)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
