"""Undirected weighted graphs, multilayer variants, and their Laplacians."""

import hashlib

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class EdgeListFormatError(ValueError):
    """Raised when an edge-list file violates the expected line format."""


class GraphConstraintError(ValueError):
    """Raised for self-loops, non-positive weights, or bad node identifiers."""


class DisconnectedGraphError(ValueError):
    """Raised when an operation requires a connected graph."""


NODES_HEADER = "# nodes:"


def _check_node_id(node_id):
    if not node_id or any(ch.isspace() for ch in node_id) or node_id.startswith("#"):
        raise GraphConstraintError(f"invalid node identifier {node_id!r}")


class Graph:
    """Immutable undirected weighted graph without self-loops.

    Node identifiers are opaque strings; their first-appearance order fixes
    the dense index used by every matrix in the package. Edge weights are
    capacities: larger weight means the endpoints are closer.
    """

    def __init__(self, node_ids, edges):
        """Build from an id list and an iterable of (u_id, v_id, weight).

        Duplicate undirected pairs sum their weights. Self-loops and
        non-positive or non-finite weights are rejected.
        """
        self.node_ids = list(node_ids)
        for node_id in self.node_ids:
            _check_node_id(node_id)
        self._index = {nid: i for i, nid in enumerate(self.node_ids)}
        if len(self._index) != len(self.node_ids):
            raise GraphConstraintError("duplicate node identifiers")
        acc = {}
        order = []
        for u_id, v_id, w in edges:
            w = float(w)
            if u_id == v_id:
                raise GraphConstraintError(
                    f"self-loop on {u_id!r}: connected components require loop-free edges")
            if not np.isfinite(w) or w <= 0.0:
                raise GraphConstraintError(f"edge ({u_id!r}, {v_id!r}) has non-positive weight {w}")
            try:
                i, j = self._index[u_id], self._index[v_id]
            except KeyError as exc:
                raise GraphConstraintError(f"edge endpoint {exc.args[0]!r} not in node list") from None
            key = (i, j) if i < j else (j, i)
            if key in acc:
                acc[key] += w
            else:
                acc[key] = w
                order.append(key)
        self.edge_u = np.array([k[0] for k in order], dtype=np.int64)
        self.edge_v = np.array([k[1] for k in order], dtype=np.int64)
        self.edge_w = np.array([acc[k] for k in order], dtype=np.float64)
        for arr in (self.edge_u, self.edge_v, self.edge_w):
            arr.setflags(write=False)
        self._adjacency = None
        self._fingerprint = None

    @classmethod
    def from_arrays(cls, node_ids, edge_u, edge_v, edge_w):
        """Fast path for generators that already hold deduplicated index arrays."""
        g = cls.__new__(cls)
        g.node_ids = list(node_ids)
        g._index = {nid: i for i, nid in enumerate(g.node_ids)}
        g.edge_u = np.ascontiguousarray(edge_u, dtype=np.int64)
        g.edge_v = np.ascontiguousarray(edge_v, dtype=np.int64)
        g.edge_w = np.ascontiguousarray(edge_w, dtype=np.float64)
        for arr in (g.edge_u, g.edge_v, g.edge_w):
            arr.setflags(write=False)
        g._adjacency = None
        g._fingerprint = None
        return g

    @property
    def n_nodes(self):
        return len(self.node_ids)

    @property
    def n_edges(self):
        return self.edge_w.size

    def index_of(self, node_id):
        return self._index[node_id]

    def adjacency(self):
        """Symmetric CSR adjacency with edge weights."""
        if self._adjacency is None:
            n = self.n_nodes
            rows = np.concatenate([self.edge_u, self.edge_v])
            cols = np.concatenate([self.edge_v, self.edge_u])
            vals = np.concatenate([self.edge_w, self.edge_w])
            self._adjacency = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        return self._adjacency

    def weighted_degrees(self):
        deg = np.zeros(self.n_nodes)
        np.add.at(deg, self.edge_u, self.edge_w)
        np.add.at(deg, self.edge_v, self.edge_w)
        return deg

    def canonical_edges(self):
        """Edges sorted by (min index, max index); the save/load order."""
        order = np.lexsort((self.edge_v, self.edge_u))
        return self.edge_u[order], self.edge_v[order], self.edge_w[order]

    def fingerprint(self):
        """Content hash over node order and the canonical edge list."""
        if self._fingerprint is None:
            h = hashlib.sha256()
            h.update("\x00".join(self.node_ids).encode())
            eu, ev, ew = self.canonical_edges()
            for i, j, w in zip(eu, ev, ew):
                h.update(f"|{i}:{j}:{w!r}".encode())
            self._fingerprint = h.hexdigest()
        return self._fingerprint

    def component_labels(self):
        n_comp, labels = connected_components(self.adjacency(), directed=False)
        return n_comp, labels

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.node_ids == other.node_ids and self.fingerprint() == other.fingerprint()

    def __repr__(self):
        return f"Graph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"


class MultilayerGraph:
    """Base nodes replicated across layers, with intra-layer edges.

    Inter-layer couplings are derived, not stored: every pair of copies of
    the same base node is coupled with a single user-chosen weight when the
    supra graph is flattened. Layer membership defaults to the layers where
    a node has at least one edge; pass ``members`` to widen it.
    """

    def __init__(self, node_ids, layers, edges, members=None):
        self.node_ids = list(node_ids)
        for node_id in self.node_ids:
            _check_node_id(node_id)
        self.layers = list(layers)
        self._index = {nid: i for i, nid in enumerate(self.node_ids)}
        self._layer_index = {layer: t for t, layer in enumerate(self.layers)}
        if len(self._layer_index) != len(self.layers):
            raise GraphConstraintError("duplicate layer names")
        acc = {}
        order = []
        for u_id, v_id, w, layer in edges:
            w = float(w)
            if u_id == v_id:
                raise GraphConstraintError(f"self-loop on {u_id!r} in layer {layer!r}")
            if not np.isfinite(w) or w <= 0.0:
                raise GraphConstraintError(f"edge ({u_id!r}, {v_id!r}) has non-positive weight {w}")
            try:
                i, j = self._index[u_id], self._index[v_id]
                t = self._layer_index[layer]
            except KeyError as exc:
                raise GraphConstraintError(f"unknown node or layer {exc.args[0]!r}") from None
            key = (t, i, j) if i < j else (t, j, i)
            if key in acc:
                acc[key] += w
            else:
                acc[key] = w
                order.append(key)
        self.edge_layer = np.array([k[0] for k in order], dtype=np.int64)
        self.edge_u = np.array([k[1] for k in order], dtype=np.int64)
        self.edge_v = np.array([k[2] for k in order], dtype=np.int64)
        self.edge_w = np.array([acc[k] for k in order], dtype=np.float64)
        n, t = len(self.node_ids), len(self.layers)
        self.membership = np.zeros((t, n), dtype=bool)
        if members is None:
            self.membership[self.edge_layer, self.edge_u] = True
            self.membership[self.edge_layer, self.edge_v] = True
        else:
            for layer, ids in members.items():
                for nid in ids:
                    self.membership[self._layer_index[layer], self._index[nid]] = True

    @property
    def n_layers(self):
        return len(self.layers)

    def flatten(self, coupling_weight=1.0):
        """Supra graph: one node per (base node, layer), plus couplings.

        Couplings join every pair of copies of the same base node. A node
        present in a single layer gets no coupling. The coupling weight must
        be positive whenever any node spans more than one layer.
        """
        supra_ids = []
        supra_index = {}
        for t, layer in enumerate(self.layers):
            for i, nid in enumerate(self.node_ids):
                if self.membership[t, i]:
                    supra_index[(t, i)] = len(supra_ids)
                    supra_ids.append(f"{nid}@{layer}")
        edges = []
        for t, i, j, w in zip(self.edge_layer, self.edge_u, self.edge_v, self.edge_w):
            edges.append((supra_ids[supra_index[(t, i)]], supra_ids[supra_index[(t, j)]], w))
        copies_per_node = self.membership.sum(axis=0)
        if np.any(copies_per_node > 1):
            if not (np.isfinite(coupling_weight) and coupling_weight > 0.0):
                raise GraphConstraintError(
                    f"coupling weight must be positive, got {coupling_weight}")
            for i in range(len(self.node_ids)):
                layers_of_i = np.flatnonzero(self.membership[:, i])
                for a in range(layers_of_i.size):
                    for b in range(a + 1, layers_of_i.size):
                        ka = supra_index[(layers_of_i[a], i)]
                        kb = supra_index[(layers_of_i[b], i)]
                        edges.append((supra_ids[ka], supra_ids[kb], coupling_weight))
        return Graph(supra_ids, edges)

    def __repr__(self):
        return (f"MultilayerGraph(n_nodes={len(self.node_ids)}, "
                f"n_layers={self.n_layers}, n_edges={self.edge_w.size})")


class ValidationReport:
    """Outcome of connectivity validation; truthy when the graph is usable."""

    def __init__(self, ok, component_sizes, warnings=()):
        self.ok = ok
        self.component_sizes = list(component_sizes)
        self.warnings = list(warnings)

    def __bool__(self):
        return self.ok

    def __repr__(self):
        status = "ok" if self.ok else "disconnected"
        return f"ValidationReport({status}, components={self.component_sizes})"


def validate_graph(g):
    """Report whether ``g`` is a single connected component.

    A single isolated node validates (trivially connected) but earns a
    warning: every resistance distance on it is zero.
    """
    if g.n_nodes == 0:
        return ValidationReport(False, [], ["graph has no nodes"])
    n_comp, labels = g.component_labels()
    sizes = sorted(np.bincount(labels).tolist(), reverse=True)
    warnings = []
    if g.n_nodes == 1:
        warnings.append("single-node graph: all resistance distances are degenerate zeros")
    return ValidationReport(n_comp == 1, sizes, warnings)


class LaplacianView:
    """Sparse symmetric PSD Laplacian of a connected graph."""

    def __init__(self, matrix, provenance, fingerprint):
        self.matrix = matrix
        self.provenance = provenance
        self.fingerprint = fingerprint

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def row_sum_error(self):
        ones = np.ones(self.dimension)
        return float(np.abs(self.matrix @ ones).max()) if self.dimension else 0.0


def build_laplacian(g):
    """Weighted-degree-minus-adjacency Laplacian; refuses disconnected graphs."""
    report = validate_graph(g)
    if not report.ok:
        raise DisconnectedGraphError(
            f"graph is not connected (component sizes {report.component_sizes})")
    n = g.n_nodes
    deg = g.weighted_degrees()
    rows = np.concatenate([g.edge_u, g.edge_v, np.arange(n, dtype=np.int64)])
    cols = np.concatenate([g.edge_v, g.edge_u, np.arange(n, dtype=np.int64)])
    vals = np.concatenate([-g.edge_w, -g.edge_w, deg])
    lap = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return LaplacianView(lap, "degree-minus-adjacency", g.fingerprint())


def build_supra_laplacian(mg, coupling_weight=1.0):
    """Laplacian of the flattened multilayer graph.

    Equals the incidence-based construction (see ``incidence_factorization``)
    up to floating-point roundoff; with a single layer it reproduces
    ``build_laplacian`` of that layer exactly.
    """
    flat = mg.flatten(coupling_weight)
    view = build_laplacian(flat)
    return LaplacianView(view.matrix, "incidence", view.fingerprint)


def incidence_factorization(g):
    """Signed incidence matrix B and edge-weight diagonal W with B W B^T = L."""
    n, m = g.n_nodes, g.n_edges
    rows = np.concatenate([g.edge_u, g.edge_v])
    cols = np.concatenate([np.arange(m, dtype=np.int64)] * 2)
    vals = np.concatenate([np.ones(m), -np.ones(m)])
    b = sp.coo_matrix((vals, (rows, cols)), shape=(n, m)).tocsr()
    w = sp.diags(g.edge_w)
    return b, w


def largest_component(g):
    """Subgraph induced by the largest connected component, original ids kept."""
    n_comp, labels = g.component_labels()
    if n_comp == 1:
        return g
    keep_label = int(np.argmax(np.bincount(labels)))
    keep = labels == keep_label
    new_index = -np.ones(g.n_nodes, dtype=np.int64)
    new_index[keep] = np.arange(int(keep.sum()))
    mask = keep[g.edge_u]
    node_ids = [nid for nid, k in zip(g.node_ids, keep) if k]
    return Graph.from_arrays(node_ids, new_index[g.edge_u[mask]],
                             new_index[g.edge_v[mask]], g.edge_w[mask])


def load_edge_list(path, weighted=True, layered=False):
    """Parse a whitespace-separated edge list.

    Lines hold ``u v`` plus an optional weight (when ``weighted``) and an
    optional trailing layer name (when ``layered``). ``#`` starts a comment;
    a leading ``# nodes: ...`` comment, as written by ``save_edge_list``,
    pins the node order so save/load round-trips exactly.
    """
    pinned_nodes = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith(NODES_HEADER) and pinned_nodes is None:
                    pinned_nodes = line[len(NODES_HEADER):].split()
                continue
            fields = line.split()
            layer = None
            if layered:
                if len(fields) == 3:
                    u, v, layer = fields
                    w = 1.0
                elif len(fields) == 4:
                    u, v, w, layer = fields
                else:
                    raise EdgeListFormatError(
                        f"line {lineno}: expected 'u v [w] layer', got {len(fields)} fields")
            else:
                if len(fields) == 2:
                    u, v = fields
                    w = 1.0
                elif len(fields) == 3 and weighted:
                    u, v, w = fields
                else:
                    expected = "u v [w]" if weighted else "u v"
                    raise EdgeListFormatError(
                        f"line {lineno}: expected {expected!r}, got {len(fields)} fields")
            try:
                w = float(w)
            except ValueError:
                raise EdgeListFormatError(f"line {lineno}: weight {w!r} is not a number") from None
            if u == v:
                raise EdgeListFormatError(
                    f"line {lineno}: self-loop on {u!r} is not allowed")
            if not np.isfinite(w) or w <= 0.0:
                raise EdgeListFormatError(f"line {lineno}: weight must be positive, got {w}")
            rows.append((lineno, u, v, w, layer))

    node_order = list(pinned_nodes) if pinned_nodes else []
    seen = set(node_order)
    layer_order = []
    layer_seen = set()
    for _, u, v, _, layer in rows:
        for nid in (u, v):
            if nid not in seen:
                seen.add(nid)
                node_order.append(nid)
        if layered and layer not in layer_seen:
            layer_seen.add(layer)
            layer_order.append(layer)
    try:
        if layered:
            return MultilayerGraph(node_order, layer_order,
                                   [(u, v, w, layer) for _, u, v, w, layer in rows])
        return Graph(node_order, [(u, v, w) for _, u, v, w, _ in rows])
    except GraphConstraintError as exc:
        raise EdgeListFormatError(str(exc)) from exc


def save_edge_list(g, path):
    """Write the canonical edge-list form: node-order header, sorted edges."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{NODES_HEADER} {' '.join(g.node_ids)}\n")
        if isinstance(g, MultilayerGraph):
            order = np.lexsort((g.edge_v, g.edge_u, g.edge_layer))
            for k in order:
                fh.write(f"{g.node_ids[g.edge_u[k]]} {g.node_ids[g.edge_v[k]]} "
                         f"{float(g.edge_w[k])!r} {g.layers[g.edge_layer[k]]}\n")
        else:
            eu, ev, ew = g.canonical_edges()
            for i, j, w in zip(eu, ev, ew):
                fh.write(f"{g.node_ids[i]} {g.node_ids[j]} {float(w)!r}\n")
