from fractions import Fraction
from math import comb, log

import numpy as np
import pytest

from netclust.scoring import (ContingencyTable, ami, entropy,
                              expected_mutual_information, mutual_information)


def emi_oracle(counts):
    """Exact-probability hypergeometric expectation, term by term."""
    counts = np.asarray(counts)
    a = counts.sum(axis=1)
    b = counts.sum(axis=0)
    n = int(counts.sum())
    total = 0.0
    for ai in a:
        for bj in b:
            if ai == 0 or bj == 0:
                continue
            for nij in range(max(1, ai + bj - n), min(ai, bj) + 1):
                prob = Fraction(comb(ai, nij) * comb(n - ai, bj - nij), comb(n, bj))
                total += float(prob) * (nij / n) * log(n * nij / (ai * bj))
    return total


def ami_oracle(truth, pred):
    ct = ContingencyTable.from_labelings(truth, pred)
    h_u, h_v = entropy(truth), entropy(pred)
    if h_u == 0.0 and h_v == 0.0:
        return 1.0
    mi = sum((nij / ct.n) * log(ct.n * nij / (ai * bj))
             for i, ai in enumerate(ct.row_totals)
             for j, bj in enumerate(ct.col_totals)
             if (nij := int(ct.counts[i, j])) > 0)
    emi = emi_oracle(ct.counts)
    denom = 0.5 * (h_u + h_v) - emi
    if abs(denom) < 1e-12:
        return 0.0
    return (mi - emi) / denom


class TestEntropyAndMi:
    def test_uniform_two_labels(self):
        assert entropy([0, 1, 0, 1]) == pytest.approx(np.log(2), abs=1e-15)

    def test_single_label(self):
        assert entropy([3, 3, 3]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            entropy([])

    def test_independent_table_has_zero_mi(self):
        ct = ContingencyTable.from_labelings([0, 0, 1, 1], [0, 1, 0, 1])
        assert abs(mutual_information(ct)) <= 1e-12

    def test_mi_bounded_by_entropies(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = rng.integers(0, 4, size=30)
            b = rng.integers(0, 5, size=30)
            ct = ContingencyTable.from_labelings(a, b)
            assert mutual_information(ct) <= min(entropy(a), entropy(b)) + 1e-12


class TestExpectedMi:
    def test_matches_exact_oracle_on_random_tables(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            r = rng.integers(2, 11)
            c = rng.integers(2, 11)
            n = rng.integers(10, 60)
            a = rng.integers(0, r, size=n)
            b = rng.integers(0, c, size=n)
            ct = ContingencyTable.from_labelings(a, b)
            assert expected_mutual_information(ct) == pytest.approx(
                emi_oracle(ct.counts), abs=1e-10)


class TestAmi:
    def test_identical_labelings(self):
        assert ami([0, 0, 1, 1, 2], [0, 0, 1, 1, 2]) == pytest.approx(1.0, abs=1e-12)

    def test_identical_up_to_renaming(self):
        assert ami([0, 0, 1, 1], [5, 5, 2, 2]) == pytest.approx(1.0, abs=1e-12)

    def test_spec_example_matches_oracle(self):
        truth = np.array([0, 0, 1, 1])
        pred = np.array([0, 1, 1, 1])
        assert ami(truth, pred) == pytest.approx(ami_oracle(truth, pred), abs=1e-10)

    def test_blocks_vs_single_cluster_is_zero(self):
        truth = np.repeat(np.arange(4), 5)
        pred = np.zeros(20, dtype=int)
        assert ami(truth, pred) == 0.0

    def test_both_trivial_partitions(self):
        assert ami([7, 7, 7], [1, 1, 1]) == 1.0

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = rng.integers(0, 4, size=40)
            b = rng.integers(0, 6, size=40)
            assert ami(a, b) == pytest.approx(ami(b, a), abs=1e-12)

    def test_label_permutation_invariance(self):
        rng = np.random.default_rng(3)
        a = rng.integers(0, 4, size=50)
        b = rng.integers(0, 4, size=50)
        remap = {0: 9, 1: 4, 2: 0, 3: 7}
        b_renamed = np.array([remap[x] for x in b])
        assert ami(a, b) == pytest.approx(ami(a, b_renamed), abs=1e-14)

    def test_random_labelings_center_on_zero(self):
        rng = np.random.default_rng(4)
        truth = np.repeat(np.arange(4), 25)
        scores = []
        for _ in range(200):
            scores.append(ami(truth, rng.integers(0, 4, size=100)))
        assert abs(float(np.mean(scores))) <= 0.02

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length"):
            ami([0, 1], [0, 1, 2])

    def test_within_codomain(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = rng.integers(0, 3, size=12)
            b = rng.integers(0, 3, size=12)
            assert -1.0 <= ami(a, b) <= 1.0
