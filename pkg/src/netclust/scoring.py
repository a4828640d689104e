"""Clustering agreement scores: adjusted mutual information and parts.

AMI = (MI - E[MI]) / (mean(H(U), H(V)) - E[MI]), with the expectation taken
under the permutation model: cell counts follow the hypergeometric
distribution given both sets of marginals. Natural logarithms throughout;
the arithmetic mean normalizes. Factorials enter only through a log table
so the expectation stays finite at any sample size.
"""

import numpy as np
from scipy.special import gammaln


class ContingencyTable:
    """Co-occurrence counts between two labelings of the same observations."""

    def __init__(self, counts):
        counts = np.ascontiguousarray(counts, dtype=np.int64)
        if counts.ndim != 2 or np.any(counts < 0):
            raise ValueError("contingency counts must be a non-negative 2-D table")
        self.counts = counts
        self.row_totals = counts.sum(axis=1)
        self.col_totals = counts.sum(axis=0)
        self.n = int(counts.sum())

    @classmethod
    def from_labelings(cls, labels_a, labels_b):
        labels_a = np.asarray(labels_a)
        labels_b = np.asarray(labels_b)
        if labels_a.shape != labels_b.shape or labels_a.ndim != 1:
            raise ValueError("labelings must be 1-D arrays of equal length")
        if labels_a.size == 0:
            raise ValueError("labelings are empty")
        _, ia = np.unique(labels_a, return_inverse=True)
        _, ib = np.unique(labels_b, return_inverse=True)
        counts = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
        np.add.at(counts, (ia, ib), 1)
        return cls(counts)


def entropy(labeling):
    """Natural-log Shannon entropy of the label frequencies."""
    labeling = np.asarray(labeling)
    if labeling.size == 0:
        raise ValueError("labeling is empty")
    _, counts = np.unique(labeling, return_counts=True)
    p = counts / labeling.size
    return float(-np.sum(p * np.log(p)))


def mutual_information(ct):
    """MI of the joint distribution in a contingency table, in nats."""
    n = ct.n
    rows, cols = np.nonzero(ct.counts)
    nij = ct.counts[rows, cols].astype(np.float64)
    outer = ct.row_totals[rows].astype(np.float64) * ct.col_totals[cols].astype(np.float64)
    return float(np.sum((nij / n) * (np.log(n * nij) - np.log(outer))))


def expected_mutual_information(ct):
    """E[MI] over random labelings with the table's marginals held fixed."""
    n = ct.n
    a = ct.row_totals
    b = ct.col_totals
    log_fact = gammaln(np.arange(n + 1, dtype=np.float64) + 1.0)
    emi = 0.0
    for ai in a:
        if ai == 0:
            continue
        for bj in b:
            if bj == 0:
                continue
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1, dtype=np.int64)
            log_p = (log_fact[ai] + log_fact[bj] + log_fact[n - ai] + log_fact[n - bj]
                     - log_fact[n] - log_fact[nij] - log_fact[ai - nij]
                     - log_fact[bj - nij] - log_fact[n - ai - bj + nij])
            terms = (nij / n) * (np.log(n * nij) - np.log(float(ai) * float(bj)))
            emi += float(np.sum(terms * np.exp(log_p)))
    return emi


def ami(truth, predicted):
    """Adjusted mutual information between two labelings.

    Expects noise already expanded to singleton clusters when scoring
    density-based output. Zero entropies on both sides mean both partitions
    are the single trivial one, which scores 1; a vanishing denominator with
    anything left in the numerator scores 0.
    """
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    if truth.shape != predicted.shape:
        raise ValueError(f"labelings differ in length: {truth.shape} vs {predicted.shape}")
    ct = ContingencyTable.from_labelings(truth, predicted)
    h_truth = entropy(truth)
    h_pred = entropy(predicted)
    if h_truth == 0.0 and h_pred == 0.0:
        return 1.0
    mi = mutual_information(ct)
    emi = expected_mutual_information(ct)
    denominator = 0.5 * (h_truth + h_pred) - emi
    if abs(denominator) < 1e-12:
        return 0.0
    # roundoff can overshoot the codomain by an ulp; clamp into [-1, 1]
    return float(min(1.0, max(-1.0, (mi - emi) / denominator)))


def evaluation_metrics(truth_eval, predicted_raw, predicted_eval):
    """The metrics JSON payload for one scored clustering."""
    from .dbscan import cluster_stats

    stats = cluster_stats(predicted_raw)
    return {"ami": ami(truth_eval, predicted_eval), **stats}
