import numpy as np
import pytest

from netclust.graph import (DisconnectedGraphError, EdgeListFormatError, Graph,
                            GraphConstraintError, MultilayerGraph, build_laplacian,
                            build_supra_laplacian, incidence_factorization,
                            largest_component, load_edge_list, save_edge_list,
                            validate_graph)
from tests.conftest import make_sbm


def write(tmp_path, text, name="g.edgelist"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadEdgeList:
    def test_minimal_path_graph(self, tmp_path):
        g = load_edge_list(write(tmp_path, "a b\nb c\n"))
        assert g.node_ids == ["a", "b", "c"]
        assert g.n_edges == 2
        assert np.all(g.edge_w == 1.0)

    def test_duplicate_edges_sum_weights(self, tmp_path):
        g = load_edge_list(write(tmp_path, "a b 2\na b 3\n"))
        assert g.n_edges == 1
        assert g.edge_w[0] == 5.0

    def test_self_loop_rejected(self, tmp_path):
        with pytest.raises(EdgeListFormatError, match="self-loop"):
            load_edge_list(write(tmp_path, "a a 1\n"))

    def test_malformed_line_reports_number(self, tmp_path):
        with pytest.raises(EdgeListFormatError, match="line 3"):
            load_edge_list(write(tmp_path, "a b\nb c\na b c d e\n"))

    def test_bad_weight_reports_number(self, tmp_path):
        with pytest.raises(EdgeListFormatError, match="line 2"):
            load_edge_list(write(tmp_path, "a b 1\nb c zero\n"))

    def test_nonpositive_weight_rejected(self, tmp_path):
        with pytest.raises(EdgeListFormatError, match="positive"):
            load_edge_list(write(tmp_path, "a b -2\n"))
        with pytest.raises(EdgeListFormatError, match="positive"):
            load_edge_list(write(tmp_path, "a b 0\n"))

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        g = load_edge_list(write(tmp_path, "# header\n\na b 2\n# trailing\n"))
        assert g.n_edges == 1

    def test_missing_weight_defaults_to_one(self, tmp_path):
        g = load_edge_list(write(tmp_path, "a b\nb c 2.5\n"))
        assert g.edge_w.tolist() == [1.0, 2.5]

    def test_unweighted_mode_rejects_third_field(self, tmp_path):
        with pytest.raises(EdgeListFormatError):
            load_edge_list(write(tmp_path, "a b 2\n"), weighted=False)

    def test_layered_parsing(self, tmp_path):
        mg = load_edge_list(write(tmp_path, "a b 1 t1\na b 2 t2\nb c t2\n"), layered=True)
        assert isinstance(mg, MultilayerGraph)
        assert mg.layers == ["t1", "t2"]
        assert mg.edge_w.tolist() == [1.0, 2.0, 1.0]


class TestRoundTrip:
    def test_single_layer_round_trip(self, tmp_path):
        g1 = load_edge_list(write(tmp_path, "b a 2\na c 1.5\nc d\n"))
        out = tmp_path / "saved.edgelist"
        save_edge_list(g1, out)
        g2 = load_edge_list(out)
        assert g2.node_ids == g1.node_ids
        assert g2 == g1
        save_edge_list(g2, tmp_path / "saved2.edgelist")
        assert (tmp_path / "saved2.edgelist").read_text() == out.read_text()

    def test_round_trip_preserves_odd_node_order(self, tmp_path):
        # node order is first appearance, not sorted-edge order
        g1 = load_edge_list(write(tmp_path, "z y\nz a\ny a\n"))
        out = tmp_path / "saved.edgelist"
        save_edge_list(g1, out)
        g2 = load_edge_list(out)
        assert g2.node_ids == ["z", "y", "a"]
        assert g2 == g1

    def test_multilayer_round_trip(self, tmp_path):
        mg1 = load_edge_list(write(tmp_path, "a b 1 t1\nb c 3 t2\na c 2 t1\n"), layered=True)
        out = tmp_path / "saved.edgelist"
        save_edge_list(mg1, out)
        mg2 = load_edge_list(out, layered=True)
        assert mg2.node_ids == mg1.node_ids
        assert mg2.layers == mg1.layers

        def quads(mg):
            return {(mg.node_ids[u], mg.node_ids[v], w, mg.layers[t])
                    for u, v, w, t in zip(mg.edge_u, mg.edge_v, mg.edge_w, mg.edge_layer)}

        assert quads(mg2) == quads(mg1)


class TestGraphConstruction:
    def test_duplicate_node_ids_rejected(self):
        with pytest.raises(GraphConstraintError):
            Graph(["a", "a"], [])

    def test_whitespace_in_id_rejected(self):
        with pytest.raises(GraphConstraintError):
            Graph(["a b"], [])

    def test_unknown_endpoint_rejected(self):
        with pytest.raises(GraphConstraintError, match="not in node list"):
            Graph(["a", "b"], [("a", "c", 1.0)])

    def test_fingerprint_ignores_edge_insertion_order(self):
        g1 = Graph(["a", "b", "c"], [("a", "b", 1.0), ("b", "c", 2.0)])
        g2 = Graph(["a", "b", "c"], [("b", "c", 2.0), ("a", "b", 1.0)])
        assert g1.fingerprint() == g2.fingerprint()

    def test_fingerprint_sensitive_to_weights(self):
        g1 = Graph(["a", "b"], [("a", "b", 1.0)])
        g2 = Graph(["a", "b"], [("a", "b", 2.0)])
        assert g1.fingerprint() != g2.fingerprint()


class TestValidation:
    def test_path_graph_ok(self, path3):
        report = validate_graph(path3)
        assert report.ok and report.component_sizes == [3]

    def test_two_disjoint_edges(self):
        g = Graph(["a", "b", "c", "d"], [("a", "b", 1.0), ("c", "d", 1.0)])
        report = validate_graph(g)
        assert not report.ok
        assert report.component_sizes == [2, 2]

    def test_single_node_warns(self):
        report = validate_graph(Graph(["a"], []))
        assert report.ok
        assert any("degenerate" in w for w in report.warnings)


class TestLaplacian:
    def test_single_edge(self, single_edge):
        lap = build_laplacian(single_edge).matrix.toarray()
        assert np.array_equal(lap, [[1.0, -1.0], [-1.0, 1.0]])

    def test_unit_triangle(self, triangle):
        lap = build_laplacian(triangle).matrix.toarray()
        assert np.array_equal(lap, 3.0 * np.eye(3) - np.ones((3, 3)))

    def test_weighted_edge(self):
        g = Graph(["a", "b"], [("a", "b", 2.5)])
        lap = build_laplacian(g).matrix.toarray()
        assert np.array_equal(lap, [[2.5, -2.5], [-2.5, 2.5]])

    def test_disconnected_refused(self):
        g = Graph(["a", "b", "c", "d"], [("a", "b", 1.0), ("c", "d", 1.0)])
        with pytest.raises(DisconnectedGraphError):
            build_laplacian(g)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_row_sums_and_symmetry(self, seed):
        g = make_sbm(n_nodes=80, seed=seed)
        view = build_laplacian(g)
        assert view.row_sum_error() <= 1e-12
        dense = view.matrix.toarray()
        assert np.array_equal(dense, dense.T)


class TestSupraLaplacian:
    def test_single_layer_matches_flat_laplacian_bitwise(self):
        edges = [("a", "b", 1.25), ("b", "c", 0.5), ("a", "c", 2.0)]
        g = Graph(["a", "b", "c"], edges)
        mg = MultilayerGraph(["a", "b", "c"], ["t1"], [(u, v, w, "t1") for u, v, w in edges])
        flat = build_laplacian(g).matrix.toarray()
        supra = build_supra_laplacian(mg, coupling_weight=0.0).matrix.toarray()
        assert np.array_equal(flat, supra)

    def test_two_copies_coupled_is_single_edge(self):
        mg = MultilayerGraph(["a"], ["t1", "t2"], [],
                             members={"t1": ["a"], "t2": ["a"]})
        lap = build_supra_laplacian(mg, coupling_weight=1.0).matrix.toarray()
        assert np.array_equal(lap, [[1.0, -1.0], [-1.0, 1.0]])

    def test_incidence_construction_matches_on_random_instance(self):
        # independent construction: dense signed incidence assembled by hand
        rng = np.random.default_rng(5)
        nodes = [f"n{i}" for i in range(10)]
        edges = []
        for layer in ("t1", "t2"):
            for _ in range(18):
                i, j = rng.choice(10, size=2, replace=False)
                edges.append((nodes[i], nodes[j], float(rng.uniform(0.5, 2.0)), layer))
        mg = MultilayerGraph(nodes, ["t1", "t2"], edges)
        flat = mg.flatten(coupling_weight=0.7)
        n, m = flat.n_nodes, flat.n_edges
        b = np.zeros((n, m))
        for col, (i, j, w) in enumerate(zip(flat.edge_u, flat.edge_v, flat.edge_w)):
            b[i, col] = 1.0
            b[j, col] = -1.0
        w_diag = np.diag(flat.edge_w)
        by_hand = b @ w_diag @ b.T
        supra = build_supra_laplacian(mg, coupling_weight=0.7).matrix.toarray()
        assert np.abs(by_hand - supra).max() <= 1e-12

    def test_incidence_factorization_identity(self, triangle):
        b, w = incidence_factorization(triangle)
        lap = build_laplacian(triangle).matrix.toarray()
        assert np.abs((b @ w @ b.T).toarray() - lap).max() <= 1e-12

    def test_coupling_weight_must_be_positive_when_needed(self):
        mg = MultilayerGraph(["a"], ["t1", "t2"], [], members={"t1": ["a"], "t2": ["a"]})
        with pytest.raises(GraphConstraintError, match="coupling"):
            build_supra_laplacian(mg, coupling_weight=0.0)


def test_largest_component():
    g = Graph(["a", "b", "c", "d", "e"],
              [("a", "b", 1.0), ("b", "c", 1.0), ("d", "e", 1.0)])
    sub = largest_component(g)
    assert sub.node_ids == ["a", "b", "c"]
    assert sub.n_edges == 2
    assert validate_graph(sub).ok


def test_adjacency_is_symmetric(path3):
    adj = path3.adjacency().toarray()
    assert np.array_equal(adj, adj.T)
    assert adj[0, 1] == 1.0 and adj[0, 2] == 0.0
