"""Undirected, unweighted graphs and their standard matrices.

Vertices are indexed from 0.  Adjacency is stored as a CSR matrix with
sorted column indices and both directions of every edge present.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import (
    DataFormatError,
    DisconnectedGraphError,
    InvalidGeneratorError,
    InvalidKError,
    InvalidSizeError,
    IsolatedVertexError,
)

log = logging.getLogger(__name__)

__all__ = [
    "Graph",
    "build_circulant",
    "build_path",
    "build_random_geometric",
    "build_knn",
    "cartesian_product",
    "adjacency",
    "degree_vector",
    "laplacian",
    "sym_normalized_laplacian",
    "geodesic_width",
    "hop_distances",
    "read_edge_list",
    "write_edge_list",
    "read_coords_csv",
    "write_coords_csv",
]


def _canonical_csr(rows, cols, n):
    """Symmetric 0/1 CSR from an (unordered) edge list, self-loops dropped."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    keep = rows != cols
    rows, cols = rows[keep], cols[keep]
    r = np.concatenate([rows, cols])
    c = np.concatenate([cols, rows])
    A = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(n, n))
    A.sum_duplicates()
    A.data[:] = 1.0
    A.sort_indices()
    return A


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected unweighted graph.

    Parameters
    ----------
    n : int
        Number of vertices.
    adj : scipy.sparse.csr_matrix
        Symmetric 0/1 adjacency, zero diagonal, sorted indices.
    coords : ndarray of shape (n, 2), optional
        Vertex coordinates for geometric graphs.
    """

    n: int
    adj: sp.csr_matrix
    coords: np.ndarray | None = None
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_edges(cls, n, edges, coords=None, name=""):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise InvalidSizeError(f"edge endpoint outside 0..{n - 1}")
        A = _canonical_csr(edges[:, 0], edges[:, 1], n)
        return cls(int(n), A, None if coords is None else np.asarray(coords, float), name)

    @property
    def n_edges(self) -> int:
        return int(self.adj.nnz // 2)

    def edges(self) -> np.ndarray:
        """Undirected edges as an (m, 2) array with ``i < j``."""
        coo = sp.triu(self.adj, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        return np.column_stack([coo.row[order], coo.col[order]]).astype(np.int64)

    def neighbors(self, i: int) -> np.ndarray:
        return self.adj.indices[self.adj.indptr[i]:self.adj.indptr[i + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.adj.indptr).astype(np.int64)

    @property
    def max_degree(self) -> int:
        return int(self.degrees().max()) if self.n else 0

    def has_edge(self, i, j) -> np.ndarray | bool:
        """Vectorized membership test for (i, j) pairs."""
        i = np.asarray(i)
        j = np.asarray(j)
        vals = np.asarray(self.adj[i.ravel(), j.ravel()]).ravel() != 0
        return vals.reshape(i.shape) if i.shape else bool(vals[0])

    @property
    def n_components(self) -> int:
        if "ncomp" not in self._cache:
            self._cache["ncomp"] = csgraph.connected_components(self.adj, directed=False)[0]
        return self._cache["ncomp"]

    @property
    def is_connected(self) -> bool:
        return self.n_components == 1

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"<Graph{tag} n={self.n} m={self.n_edges} connected={self.is_connected}>"


def build_circulant(N: int, Q) -> Graph:
    """Circulant graph C(N, Q): edges (i, i +/- q mod N) for q in Q."""
    Q = sorted(int(q) for q in Q)
    if len(set(Q)) != len(Q):
        raise InvalidGeneratorError(f"generators must be distinct, got {Q}")
    for q in Q:
        if not 1 <= q < N / 2:
            raise InvalidGeneratorError(f"generator {q} outside 1 <= q < N/2 = {N / 2}")
    i = np.arange(N)
    rows = np.concatenate([i for _ in Q]) if Q else np.empty(0, np.int64)
    cols = np.concatenate([(i + q) % N for q in Q]) if Q else np.empty(0, np.int64)
    g = Graph(N, _canonical_csr(rows, cols, N), name=f"C({N},{set(Q)})")
    log.debug("built %r", g)
    return g


def build_path(M: int) -> Graph:
    """Path (line) graph t_0 - t_1 - ... - t_{M-1}."""
    if M < 2:
        raise InvalidSizeError(f"path graph needs M >= 2, got {M}")
    i = np.arange(M - 1)
    return Graph(M, _canonical_csr(i, i + 1, M), name=f"P({M})")


def _geometric_edges(coords, radius):
    from scipy.spatial import cKDTree

    pairs = cKDTree(coords).query_pairs(radius, output_type="ndarray")
    return pairs.reshape(-1, 2)


def build_random_geometric(n: int, radius: float, seed: int = 0, *,
                           connected: bool = True, max_attempts: int = 100) -> Graph:
    """Random geometric graph on the unit square.

    Coordinates are i.i.d. uniform on [0, 1]^2 and vertices are joined when
    their Euclidean distance is at most ``radius``.  With ``connected=True``
    a disconnected draw is discarded and redrawn with ``seed + 1``, up to
    ``max_attempts`` draws.
    """
    if n < 1:
        raise InvalidSizeError("n must be >= 1")
    if radius < 0:
        raise InvalidSizeError("radius must be nonnegative")
    for attempt in range(max_attempts):
        s = seed + attempt
        coords = np.random.default_rng(s).uniform(0.0, 1.0, size=(n, 2))
        e = _geometric_edges(coords, radius)
        g = Graph(n, _canonical_csr(e[:, 0], e[:, 1], n), coords,
                  name=f"RGG(n={n},r={radius:g},seed={s})")
        if not connected or g.is_connected:
            deg = g.degrees()
            log.info("random geometric graph seed=%d mean degree %.3f connected=%s",
                     s, deg.mean() if n else 0.0, g.is_connected)
            return g
        log.info("seed %d gave a disconnected graph; retrying with seed %d", s, s + 1)
    raise DisconnectedGraphError(
        f"no connected draw in {max_attempts} attempts (n={n}, radius={radius})")


def bridge_components(G: Graph) -> Graph:
    """Join the components of a geometric graph through closest vertex pairs.

    Repeatedly links the smallest component to its nearest outside vertex
    until the graph is connected.  Connected graphs are returned unchanged.
    """
    from scipy.spatial import cKDTree
    from scipy.sparse.csgraph import connected_components

    if G.coords is None:
        raise ValueError("bridging needs vertex coordinates")
    if G.is_connected:
        return G
    X = np.asarray(G.coords)
    rows, cols = [list(a) for a in G.edges().T]
    added = 0
    while True:
        A = _canonical_csr(np.array(rows, dtype=int), np.array(cols, dtype=int), G.n)
        nc, labels = connected_components(A, directed=False)
        if nc == 1:
            break
        sizes = np.bincount(labels)
        small = np.flatnonzero(labels == np.argmin(sizes))
        rest = np.flatnonzero(labels != labels[small[0]])
        dist, idx = cKDTree(X[rest]).query(X[small])
        a = int(np.argmin(dist))
        rows.append(small[a])
        cols.append(rest[idx[a]])
        added += 1
    log.info("bridged %s with %d extra edges", G.name, added)
    return Graph(G.n, A, G.coords, name=f"{G.name}+bridged")


def build_knn(coords, k: int) -> Graph:
    """Symmetrized k-nearest-neighbour graph.

    ``i ~ j`` when either is among the other's ``k`` nearest points.  Equal
    distances are broken in favour of the smaller vertex index.
    """
    X = np.asarray(coords, dtype=float)
    n = X.shape[0]
    if not 1 <= k < n:
        raise InvalidKError(f"need 1 <= k < n, got k={k}, n={n}")
    idx = np.arange(n)
    rows, cols = [], []
    chunk = max(1, 2_000_000 // max(n, 1))
    for start in range(0, n, chunk):
        block = X[start:start + chunk]
        d2 = ((block[:, None, :] - X[None, :, :]) ** 2).sum(-1)
        for r, drow in enumerate(d2):
            i = start + r
            drow = drow.copy()
            drow[i] = np.inf
            order = np.lexsort((idx, drow))[:k]
            rows.extend([i] * k)
            cols.extend(order.tolist())
    return Graph(n, _canonical_csr(rows, cols, n), X, name=f"{k}-NN(n={n})")


def cartesian_product(G1: Graph, G2: Graph) -> Graph:
    """Cartesian product with adjacency ``A1 (x) I + I (x) A2``.

    Vertex ``(u, v)`` gets index ``u * G2.n + v``.
    """
    if G1.n < 1 or G2.n < 1:
        raise InvalidSizeError("both factors must be nonempty")
    A = sp.kron(G1.adj, sp.identity(G2.n), format="csr") + \
        sp.kron(sp.identity(G1.n), G2.adj, format="csr")
    A = A.tocsr()
    A.sort_indices()
    name = f"{G1.name or 'G1'} x {G2.name or 'G2'}"
    return Graph(G1.n * G2.n, A, name=name)


def adjacency(G: Graph) -> sp.csr_matrix:
    return G.adj.copy()


def degree_vector(G: Graph) -> np.ndarray:
    return G.degrees().astype(float)


def laplacian(G: Graph) -> sp.csr_matrix:
    """Combinatorial Laplacian ``D - A``."""
    L = (sp.diags(degree_vector(G)) - G.adj).tocsr()
    L.sort_indices()
    return L


def sym_normalized_laplacian(G: Graph) -> sp.csr_matrix:
    """``D^{-1/2} (D - A) D^{-1/2}``; requires every vertex to have an edge."""
    deg = degree_vector(G)
    if np.any(deg == 0):
        bad = np.flatnonzero(deg == 0)
        raise IsolatedVertexError(f"isolated vertices {bad[:10].tolist()} have no normalization")
    dinv = sp.diags(1.0 / np.sqrt(deg))
    L = (sp.identity(G.n) - dinv @ G.adj @ dinv).tocsr()
    L.sort_indices()
    return L


def hop_distances(G: Graph, sources=None) -> np.ndarray:
    """BFS hop distances; ``inf`` between components."""
    return csgraph.shortest_path(G.adj, directed=False, unweighted=True, indices=sources)


def geodesic_width(H, G: Graph, *, atol: float = 0.0, return_entry: bool = False):
    """Largest hop distance spanned by a nonzero entry of ``H``.

    Returns 0 for a diagonal operator and ``inf`` if some nonzero entry links
    two components.  With ``return_entry=True`` also returns the ``(i, j)``
    entry that attains the width (``None`` for an all-zero operator).
    """
    if hasattr(H, "tocsr"):
        Hc = sp.csr_matrix(H.tocsr())
    else:
        Hc = sp.csr_matrix(np.asarray(H))
    if Hc.shape != (G.n, G.n):
        raise InvalidSizeError(f"operator shape {Hc.shape} does not match graph order {G.n}")
    coo = Hc.tocoo()
    mask = np.abs(coo.data) > atol
    r, c = coo.row[mask], coo.col[mask]
    width, entry = 0, None
    if r.size == 0:
        return (0, None) if return_entry else 0
    # one-hop entries need no BFS
    off = r != c
    far = off & ~np.asarray(G.adj[r, c]).ravel().astype(bool)
    if off.any():
        width, entry = 1, (int(r[off][0]), int(c[off][0]))
    else:
        entry = (int(r[0]), int(c[0]))
    if far.any():
        rf, cf = r[far], c[far]
        srcs = np.unique(rf)
        step = max(1, 4_000_000 // max(G.n, 1))
        for s0 in range(0, srcs.size, step):
            batch = srcs[s0:s0 + step]
            D = hop_distances(G, batch)
            pos = np.searchsorted(batch, rf)
            sel = (pos < batch.size) & (batch[np.minimum(pos, batch.size - 1)] == rf)
            dists = D[pos[sel], cf[sel]]
            if dists.size:
                k = int(np.argmax(dists))
                if dists[k] > width:
                    width = dists[k]
                    entry = (int(rf[sel][k]), int(cf[sel][k]))
        if np.isfinite(width):
            width = int(width)
    return (width, entry) if return_entry else width


def read_edge_list(path) -> Graph:
    """Read the ``n m`` header plus ``m`` lines of ``i j`` (0-based)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    lines = [ln for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise DataFormatError("empty edge-list file", row=1)
    try:
        n, m = (int(t) for t in lines[0].split())
    except ValueError:
        raise DataFormatError("header must be 'n m'", row=1) from None
    if len(lines) - 1 != m:
        raise DataFormatError(f"header announces {m} edges, found {len(lines) - 1}")
    edges = np.empty((m, 2), dtype=np.int64)
    for r, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 2:
            raise DataFormatError("edge line must be 'i j'", row=r)
        try:
            edges[r - 2] = [int(parts[0]), int(parts[1])]
        except ValueError:
            raise DataFormatError("non-integer vertex id", row=r) from None
    return Graph.from_edges(n, edges, name=Path(path).stem)


def write_edge_list(G: Graph, path) -> None:
    E = G.edges()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{G.n} {len(E)}\n")
        for i, j in E:
            fh.write(f"{i} {j}\n")


def read_coords_csv(path) -> np.ndarray:
    """Read ``id,x,y`` rows (header optional) into an (n, 2) array ordered by id."""
    ids, pts = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for r, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if r == 1 and row[0].strip().lower() == "id":
                continue
            if len(row) != 3:
                raise DataFormatError("expected 'id,x,y'", row=r)
            try:
                ids.append(int(row[0]))
                pts.append((float(row[1]), float(row[2])))
            except ValueError:
                raise DataFormatError("unparseable coordinate row", row=r) from None
    order = np.argsort(ids)
    return np.asarray(pts, float)[order]


def write_coords_csv(coords, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id,x,y\n")
        for i, (x, y) in enumerate(np.asarray(coords, float)):
            fh.write(f"{i},{float(x)!r},{float(y)!r}\n")
