import numpy as np
import pytest

from netclust.distance import (AttributeMatrix, DistanceMatrix, PairwiseDistanceError,
                               PseudoinverseCache, SolverConvergenceError, SolverHandle,
                               build_pinv_cache, euclidean_distances, ge_distance_dense,
                               ge_distance_solver, load_attributes, load_distances,
                               pairwise_distances, save_attributes, save_distances)
from netclust.graph import Graph, build_laplacian
from netclust.synth import SbmConfig, generate_dataset
from tests.conftest import (assert_solver_matches_dense, laplacian_pinv_oracle,
                            make_sbm)


class TestEffectiveResistanceFixtures:
    # frozen values confirmed against the independent SVD pseudoinverse below

    def test_single_edge_unit_resistance(self, single_edge):
        cache = build_pinv_cache(single_edge)
        d = ge_distance_dense(cache, np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        assert abs(d - 1.0) <= 1e-9

    def test_path3_endpoints(self, path3):
        cache = build_pinv_cache(path3)
        d = ge_distance_dense(cache, np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]))
        assert abs(d - np.sqrt(2.0)) <= 1e-9

    def test_triangle_edge(self, triangle):
        cache = build_pinv_cache(triangle)
        d = ge_distance_dense(cache, np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
        assert abs(d - np.sqrt(2.0 / 3.0)) <= 1e-9

    def test_fixtures_against_svd_oracle(self, single_edge, path3, triangle):
        for g, diff, expected in [
            (single_edge, np.array([1.0, -1.0]), 1.0),
            (path3, np.array([1.0, 0.0, -1.0]), np.sqrt(2.0)),
            (triangle, np.array([1.0, -1.0, 0.0]), np.sqrt(2.0 / 3.0)),
        ]:
            oracle = np.sqrt(diff @ laplacian_pinv_oracle(g) @ diff)
            assert abs(oracle - expected) <= 1e-12
            cache = build_pinv_cache(g)
            assert abs(ge_distance_dense(cache, diff, np.zeros_like(diff)) - oracle) <= 1e-9


class TestPseudoinverseCache:
    @pytest.mark.parametrize("n_nodes", [40, 120, 500])
    def test_moore_penrose_identity(self, n_nodes):
        g = make_sbm(n_nodes=n_nodes, seed=3)
        lap = build_laplacian(g).matrix.toarray()
        pinv = build_pinv_cache(g).matrix
        err = np.linalg.norm(lap @ pinv @ lap - lap) / np.linalg.norm(lap)
        assert err <= 1e-8

    def test_annihilates_constants(self):
        g = make_sbm(n_nodes=100, seed=4)
        pinv = build_pinv_cache(g).matrix
        assert np.abs(pinv @ np.ones(100)).max() <= 1e-10

    def test_matches_svd_oracle(self):
        g = make_sbm(n_nodes=60, seed=5)
        assert np.abs(build_pinv_cache(g).matrix - laplacian_pinv_oracle(g)).max() <= 1e-9

    def test_save_load_round_trip(self, tmp_path, triangle):
        cache = build_pinv_cache(triangle)
        path = tmp_path / "cache.npz"
        cache.save(path)
        loaded = PseudoinverseCache.load(path, graph=triangle)
        assert np.array_equal(loaded.matrix, cache.matrix)

    def test_load_rejects_wrong_graph(self, tmp_path, triangle, path3):
        path = tmp_path / "cache.npz"
        build_pinv_cache(triangle).save(path)
        with pytest.raises(ValueError, match="different graph"):
            PseudoinverseCache.load(path, graph=path3)


class TestGeDistanceDense:
    def test_identical_vectors(self, triangle):
        cache = build_pinv_cache(triangle)
        v = np.array([0.3, -1.2, 4.0])
        assert ge_distance_dense(cache, v, v) == 0.0

    def test_dimension_mismatch(self, single_edge):
        cache = build_pinv_cache(single_edge)
        with pytest.raises(ValueError, match="shape"):
            ge_distance_dense(cache, np.ones(3), np.ones(3))

    def test_nan_rejected(self, single_edge):
        cache = build_pinv_cache(single_edge)
        with pytest.raises(ValueError, match="finite"):
            ge_distance_dense(cache, np.array([np.nan, 0.0]), np.zeros(2))


class TestGeDistanceSolver:
    def test_matches_dense_on_fixtures(self, single_edge, path3, triangle):
        cases = [
            (single_edge, np.array([1.0, 0.0]), np.array([0.0, 1.0])),
            (path3, np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])),
            (triangle, np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
        ]
        for g, a, b in cases:
            dense = ge_distance_dense(build_pinv_cache(g), a, b)
            solver = ge_distance_solver(SolverHandle(g), a, b)
            assert_solver_matches_dense(dense, solver)

    def test_identical_vectors_give_zero(self, path3):
        handle = SolverHandle(path3)
        v = np.array([2.0, 5.0, -1.0])
        assert ge_distance_solver(handle, v, v) == 0.0

    def test_constant_shift_gives_zero(self, path3):
        handle = SolverHandle(path3)
        v = np.array([2.0, 5.0, -1.0])
        for c in (1.0, -3.5, 1e6):
            assert ge_distance_solver(handle, v + c, v) <= 1e-9

    def test_solution_orthogonal_to_ones(self):
        g = make_sbm(n_nodes=100, seed=6)
        handle = SolverHandle(g)
        rng = np.random.default_rng(0)
        b = rng.normal(size=100)
        x = handle.solve(b - b.mean())
        assert abs(x.sum()) <= 1e-10

    def test_nonconvergence_carries_residual(self):
        g = make_sbm(n_nodes=100, seed=7)
        handle = SolverHandle(g, max_iter=1)
        rng = np.random.default_rng(1)
        with pytest.raises(SolverConvergenceError) as err:
            ge_distance_solver(handle, rng.normal(size=100), rng.normal(size=100))
        assert err.value.residual > 0.0
        assert err.value.iterations == 1


class TestPairwise:
    def test_single_observation(self, triangle):
        attrs = AttributeMatrix(np.array([[1.0, 2.0, 3.0]]))
        dm = pairwise_distances(triangle, attrs)
        assert dm.values.shape == (1, 1) and dm.values[0, 0] == 0.0

    def test_identical_rows_give_zero_matrix(self, triangle):
        attrs = AttributeMatrix(np.tile([1.0, 2.0, 3.0], (3, 1)))
        dm = pairwise_distances(triangle, attrs)
        assert np.array_equal(dm.values, np.zeros((3, 3)))

    def test_dense_matches_per_pair_function(self):
        g = make_sbm(n_nodes=60, seed=8)
        rng = np.random.default_rng(2)
        attrs = AttributeMatrix(rng.normal(size=(12, 60)))
        cache = build_pinv_cache(g)
        dm = pairwise_distances(g, attrs, backend="dense", cache=cache)
        for i in range(12):
            for j in range(i + 1, 12):
                direct = ge_distance_dense(cache, attrs.values[i], attrs.values[j])
                assert abs(dm.values[i, j] - direct) <= 1e-9 * max(1.0, direct)

    def test_dense_vs_solver_cross_backend(self):
        cfg = SbmConfig(k=4, community_size=50, seed=11, n_obs=50)
        dataset = generate_dataset(cfg)
        dense = pairwise_distances(dataset.graph, dataset.attributes, backend="dense")
        solver = pairwise_distances(dataset.graph, dataset.attributes, backend="solver")
        scale = np.maximum(dense.values, 1e-3)
        assert (np.abs(solver.values - dense.values) / scale).max() <= 1e-6

    def test_thread_count_does_not_change_bits(self):
        g = make_sbm(n_nodes=80, seed=9)
        rng = np.random.default_rng(3)
        attrs = AttributeMatrix(rng.normal(size=(10, 80)))
        one = pairwise_distances(g, attrs, backend="solver", threads=1)
        four = pairwise_distances(g, attrs, backend="solver", threads=4)
        assert np.array_equal(one.values, four.values)

    def test_auto_backend_selects_dense_for_small_graphs(self, triangle):
        attrs = AttributeMatrix(np.eye(3))
        dm = pairwise_distances(triangle, attrs, backend="auto")
        assert dm.metric == "ge"

    def test_pair_error_carries_indices(self):
        g = make_sbm(n_nodes=100, seed=10)
        rng = np.random.default_rng(4)
        attrs = AttributeMatrix(rng.normal(size=(3, 100)))
        handle = SolverHandle(g, max_iter=1)
        with pytest.raises(PairwiseDistanceError, match=r"pair \(0, 1\)"):
            pairwise_distances(g, attrs, backend="solver", handle=handle)

    def test_column_mismatch_rejected(self, triangle):
        attrs = AttributeMatrix(np.ones((2, 4)))
        with pytest.raises(ValueError, match="columns"):
            pairwise_distances(triangle, attrs)

    def test_fingerprint_mismatch_rejected(self, triangle, path3):
        attrs = AttributeMatrix(np.ones((2, 3)), graph_fingerprint=path3.fingerprint())
        with pytest.raises(ValueError, match="fingerprint"):
            pairwise_distances(triangle, attrs)


class TestMetricProperties:
    def setup_method(self):
        self.g = make_sbm(n_nodes=80, seed=12)
        self.cache = build_pinv_cache(self.g)
        self.handle = SolverHandle(self.g)
        self.rng = np.random.default_rng(13)

    def _pair(self):
        return (self.rng.normal(size=80), self.rng.normal(size=80))

    def test_symmetry_exact(self):
        for _ in range(50):
            a, b = self._pair()
            assert ge_distance_dense(self.cache, a, b) == ge_distance_dense(self.cache, b, a)
            assert ge_distance_solver(self.handle, a, b) == ge_distance_solver(self.handle, b, a)

    def test_translation_invariance(self):
        for _ in range(50):
            a, b = self._pair()
            c = self.rng.uniform(-10, 10)
            base = ge_distance_dense(self.cache, a, b)
            assert abs(ge_distance_dense(self.cache, a + c, b) - base) <= 1e-9 * (1 + base)

    def test_homogeneity(self):
        for _ in range(50):
            a, b = self._pair()
            alpha = self.rng.uniform(-5, 5)
            base = ge_distance_dense(self.cache, a, b)
            scaled = ge_distance_dense(self.cache, alpha * a, alpha * b)
            assert abs(scaled - abs(alpha) * base) <= 1e-9 * (1 + abs(alpha) * base)

    def test_weight_scaling(self):
        factor = 4.0
        scaled_g = Graph(self.g.node_ids,
                         [(self.g.node_ids[u], self.g.node_ids[v], factor * w)
                          for u, v, w in zip(self.g.edge_u, self.g.edge_v, self.g.edge_w)])
        scaled_cache = build_pinv_cache(scaled_g)
        for _ in range(50):
            a, b = self._pair()
            base = ge_distance_dense(self.cache, a, b)
            scaled = ge_distance_dense(scaled_cache, a, b)
            assert abs(scaled - base / np.sqrt(factor)) <= 1e-9 * (1 + base)

    def test_triangle_inequality(self):
        for _ in range(50):
            a, b = self._pair()
            c = self.rng.normal(size=80)
            dab = ge_distance_dense(self.cache, a, b)
            dbc = ge_distance_dense(self.cache, b, c)
            dac = ge_distance_dense(self.cache, a, c)
            assert dac <= dab + dbc + 1e-9


class TestEuclidean:
    def test_three_four_five(self):
        attrs = AttributeMatrix(np.array([[0.0, 0.0], [3.0, 4.0]]))
        dm = euclidean_distances(attrs)
        assert dm.values[0, 1] == 5.0

    def test_identical_rows(self):
        dm = euclidean_distances(AttributeMatrix(np.ones((3, 2))))
        assert np.array_equal(dm.values, np.zeros((3, 3)))

    def test_single_row(self):
        dm = euclidean_distances(AttributeMatrix(np.array([[1.0, 2.0]])))
        assert dm.values.shape == (1, 1)

    def test_symmetry_exact_and_zero_diagonal(self):
        rng = np.random.default_rng(14)
        dm = euclidean_distances(AttributeMatrix(rng.normal(size=(20, 7))))
        assert np.array_equal(dm.values, dm.values.T)
        assert np.all(np.diag(dm.values) == 0.0)


class TestSerialization:
    def test_distance_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(15)
        dm = euclidean_distances(AttributeMatrix(rng.normal(size=(6, 4))))
        path = tmp_path / "d.csv"
        save_distances(dm, path)
        loaded = load_distances(path)
        assert np.array_equal(loaded.values, dm.values)
        assert loaded.observation_ids == dm.observation_ids

    def test_attribute_csv_round_trip(self, tmp_path, triangle):
        rng = np.random.default_rng(16)
        attrs = AttributeMatrix(rng.normal(size=(5, 3)), column_ids=triangle.node_ids)
        path = tmp_path / "a.csv"
        save_attributes(attrs, path)
        loaded = load_attributes(path, graph=triangle)
        assert np.array_equal(loaded.values, attrs.values)
        assert loaded.observation_ids == attrs.observation_ids
        assert loaded.graph_fingerprint == triangle.fingerprint()

    def test_attribute_matrix_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            AttributeMatrix(np.array([[1.0, np.inf]]))

    def test_distance_matrix_rejects_asymmetry(self):
        bad = np.array([[0.0, 1.0], [2.0, 0.0]])
        with pytest.raises(ValueError, match="symmetric"):
            DistanceMatrix(bad)
