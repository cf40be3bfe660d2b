"""Graph data model, edge-list/label IO, SBM generation and split protocols."""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from importlib import resources
from typing import NamedTuple, TextIO

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """Malformed edge-list or label input."""


class Graph:
    """Immutable sparse weighted graph stored as sorted CSR neighbor lists.

    Undirected graphs are stored symmetrically: the edge ``(i, j)`` appears
    in the neighbor list of both endpoints but is counted once in
    ``edge_count``.
    """

    def __init__(self, n, indptr, indices, weights, directed=False, weighted=False):
        self.n = int(n)
        self.directed = bool(directed)
        self.weighted = bool(weighted)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.float64)
        for arr in (self.indptr, self.indices, self.weights):
            arr.flags.writeable = False
        nnz = len(self.indices)
        if self.directed:
            self.edge_count = nnz
        else:
            self.edge_count = nnz // 2

    @classmethod
    def from_edges(cls, n, src, dst, weights=None, directed=False, weighted=False):
        """Build a graph from parallel edge arrays.

        Duplicate pairs are merged: summed when ``weighted``, collapsed to
        weight 1 otherwise. Self-loops and negative weights are rejected.
        """
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if weights is None:
            weights = np.ones(len(src))
        weights = np.asarray(weights, dtype=np.float64).ravel()
        if not (len(src) == len(dst) == len(weights)):
            raise ValueError("src, dst and weights must have equal length")
        if len(src) and (src.min() < 0 or dst.min() < 0):
            raise ValueError("node ids must be nonnegative")
        if len(src) and max(src.max(), dst.max()) >= n:
            raise ValueError(f"node id out of range for n={n}")
        if np.any(src == dst):
            raise ValueError("self-loops are not supported")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("edge weights must be finite and nonnegative")
        if not directed:
            lo, hi = np.minimum(src, dst), np.maximum(src, dst)
            src, dst = lo, hi
        mat = sp.coo_matrix((weights, (src, dst)), shape=(n, n)).tocsr()
        mat.sum_duplicates()
        if not weighted:
            mat.data[:] = 1.0
        mat.eliminate_zeros()
        if not directed:
            mat = (mat + mat.T).tocsr()
        mat.sort_indices()
        return cls(n, mat.indptr, mat.indices, mat.data, directed, weighted)

    @classmethod
    def from_matrix(cls, mat, directed=None, weighted=True):
        mat = sp.csr_matrix(mat, dtype=np.float64)
        if directed is None:
            directed = (abs(mat - mat.T) > 0).nnz > 0
        coo = sp.triu(mat, k=1).tocoo() if not directed else mat.tocoo()
        return cls.from_edges(mat.shape[0], coo.row, coo.col, coo.data, directed, weighted)

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        return f"Graph(n={self.n}, edges={self.edge_count}, {kind}, weighted={self.weighted})"

    def neighbors(self, i):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    @property
    def adjacency(self):
        """Per-node list of ``(neighbor, weight)`` pairs, sorted by neighbor id."""
        return [
            list(zip(self.indices[a:b].tolist(), self.weights[a:b].tolist()))
            for a, b in zip(self.indptr[:-1], self.indptr[1:])
        ]

    def out_degree(self):
        return np.diff(self.indptr)

    def weighted_degree(self):
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        return np.bincount(rows, weights=self.weights, minlength=self.n)

    def adjacency_matrix(self):
        return sp.csr_matrix(
            (self.weights.copy(), self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n)
        )

    def edges(self):
        """Return ``(pairs, weights)``; unordered ``i < j`` pairs if undirected."""
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        cols = self.indices
        if self.directed:
            keep = np.ones(len(cols), dtype=bool)
        else:
            keep = rows < cols
        return np.column_stack([rows[keep], cols[keep]]), self.weights[keep]

    def edge_set(self):
        pairs, _ = self.edges()
        return set(map(tuple, pairs.tolist()))

    def has_edge(self, i, j):
        nbrs, _ = self.neighbors(i)
        k = np.searchsorted(nbrs, j)
        return bool(k < len(nbrs) and nbrs[k] == j)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and self.directed == other.directed
            and self.weighted == other.weighted
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None


@dataclass(frozen=True)
class NodeLabels:
    labels: tuple  # per-node tuple of sorted label ids
    label_count: int

    def __post_init__(self):
        for ls in self.labels:
            for lab in ls:
                if not 0 <= lab < self.label_count:
                    raise ValueError(f"label id {lab} outside [0, {self.label_count})")

    @classmethod
    def from_single(cls, y, label_count=None):
        y = np.asarray(y, dtype=np.int64)
        count = int(y.max()) + 1 if label_count is None else label_count
        return cls(tuple((int(v),) for v in y), count)

    @property
    def n(self):
        return len(self.labels)

    def indicator(self):
        """Dense ``n x label_count`` 0/1 matrix."""
        out = np.zeros((len(self.labels), self.label_count))
        for i, ls in enumerate(self.labels):
            out[i, list(ls)] = 1.0
        return out

    def subset(self, nodes):
        return NodeLabels(tuple(self.labels[i] for i in nodes), self.label_count)


@dataclass(frozen=True)
class EdgeSplit:
    train_graph: Graph
    heldout_edges: np.ndarray  # (h, 2) int array
    fraction: float
    seed: int


class TransitionMatrix(NamedTuple):
    matrix: sp.csr_matrix
    zero_degree_rows: np.ndarray


# -- IO ---------------------------------------------------------------------

_INT = re.compile(r"^\d+$")


def load_edge_list(source: TextIO | str, directed=False, weighted=False) -> Graph:
    """Parse ``src dst [weight]`` lines; '#' lines and blank lines are skipped."""
    if isinstance(source, str):
        source = io.StringIO(source)
    src, dst, wts = [], [], []
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"line {lineno}: expected 'src dst [weight]', got {line!r}")
        if len(parts) == 3 and not weighted:
            raise GraphFormatError(f"line {lineno}: weight column present but weighted=False")
        if not (_INT.match(parts[0]) and _INT.match(parts[1])):
            raise GraphFormatError(f"line {lineno}: node ids must be nonnegative integers")
        u, v = int(parts[0]), int(parts[1])
        w = 1.0
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad weight {parts[2]!r}") from None
            if not np.isfinite(w) or w < 0:
                raise GraphFormatError(f"line {lineno}: weight must be finite and nonnegative")
        if u == v:
            raise GraphFormatError(f"line {lineno}: self-loop {u}-{v} not supported")
        src.append(u)
        dst.append(v)
        wts.append(w)
    n = max(max(src, default=-1), max(dst, default=-1)) + 1
    return Graph.from_edges(n, src, dst, wts, directed=directed, weighted=weighted)


def write_edge_list(g: Graph, stream: TextIO):
    pairs, weights = g.edges()
    for (u, v), w in zip(pairs.tolist(), weights.tolist()):
        if g.weighted:
            stream.write(f"{u} {v} {w!r}\n")
        else:
            stream.write(f"{u} {v}\n")


def load_labels(source: TextIO | str, n=None, label_count=None) -> NodeLabels:
    """Parse ``node_id<TAB>label[,label...]`` lines into per-node label sets."""
    if isinstance(source, str):
        source = io.StringIO(source)
    per_node = {}
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t") if "\t" in line else line.split(None, 1)
        try:
            node = int(parts[0])
            labs = [int(x) for x in parts[1].split(",")] if len(parts) > 1 and parts[1].strip() else []
        except ValueError:
            raise GraphFormatError(f"line {lineno}: malformed label line {line!r}") from None
        if node < 0 or any(x < 0 for x in labs):
            raise GraphFormatError(f"line {lineno}: ids must be nonnegative")
        per_node.setdefault(node, set()).update(labs)
    if n is None:
        n = max(per_node, default=-1) + 1
    if label_count is None:
        label_count = max((max(s) for s in per_node.values() if s), default=-1) + 1
    labels = tuple(tuple(sorted(per_node.get(i, ()))) for i in range(n))
    return NodeLabels(labels, label_count)


def write_labels(labels: NodeLabels, stream: TextIO):
    for i, ls in enumerate(labels.labels):
        if ls:
            stream.write(f"{i}\t{','.join(map(str, ls))}\n")


def karate() -> Graph:
    """Zachary's karate club, 0-indexed (34 nodes, 78 edges)."""
    text = resources.files("graphembed").joinpath("data/karate.edges").read_text()
    return load_edge_list(text)


def karate_path():
    return resources.files("graphembed").joinpath("data/karate.edges")


# -- generators -------------------------------------------------------------


def generate_sbm(n, blocks, p_in, p_out, seed=0):
    """Stochastic block model with node ``v`` in block ``v % blocks``."""
    if not 0 <= p_out <= p_in <= 1:
        raise ValueError("need 0 <= p_out <= p_in <= 1")
    if not 1 <= blocks <= n:
        raise ValueError("need 1 <= blocks <= n")
    rng = np.random.Generator(np.random.PCG64(seed))
    block = np.arange(n) % blocks
    src, dst = [], []
    for i in range(n - 1):
        j = np.arange(i + 1, n)
        prob = np.where(block[j] == block[i], p_in, p_out)
        hit = rng.random(len(j)) < prob
        src.append(np.full(hit.sum(), i))
        dst.append(j[hit])
    src = np.concatenate(src) if src else np.empty(0, np.int64)
    dst = np.concatenate(dst) if dst else np.empty(0, np.int64)
    g = Graph.from_edges(n, src, dst)
    return g, NodeLabels.from_single(block, blocks)


# -- derived matrices ------------------------------------------------------


def laplacian(g: Graph, normalized=False):
    """``L = D - W``; normalized form ``D^-1/2 L D^-1/2`` with 0 for isolated nodes."""
    if g.directed:
        raise ValueError("laplacian requires an undirected graph")
    W = g.adjacency_matrix()
    deg = np.asarray(W.sum(axis=1)).ravel()
    L = (sp.diags(deg) - W).tocsr()
    if normalized:
        with np.errstate(divide="ignore"):
            inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
        Dm = sp.diags(inv_sqrt)
        L = (Dm @ L @ Dm).tocsr()
    L.eliminate_zeros()
    L.sort_indices()
    return L


def transition_matrix(g: Graph) -> TransitionMatrix:
    """Row-stochastic ``D^-1 W``; zero-degree rows stay zero and are reported."""
    W = g.adjacency_matrix()
    deg = np.asarray(W.sum(axis=1)).ravel()
    zero = np.flatnonzero(deg == 0)
    with np.errstate(divide="ignore"):
        inv = np.where(deg > 0, 1.0 / deg, 0.0)
    T = (sp.diags(inv) @ W).tocsr()
    T.sort_indices()
    return TransitionMatrix(T, zero)


def _round_half_up(x):
    return int(np.floor(x + 0.5))


def split_edges(g: Graph, fraction, seed=0) -> EdgeSplit:
    """Hide a uniform random ``round(fraction * |E|)`` subset of edges."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    pairs, weights = g.edges()
    m = len(pairs)
    h = _round_half_up(fraction * m)
    if h == 0 or h == m:
        raise ValueError(f"fraction {fraction} hides {h} of {m} edges")
    rng = np.random.default_rng(seed)
    held = np.zeros(m, dtype=bool)
    held[rng.choice(m, size=h, replace=False)] = True
    keep = ~held
    train = Graph.from_edges(
        g.n, pairs[keep, 0], pairs[keep, 1], weights[keep], directed=g.directed, weighted=g.weighted
    )
    return EdgeSplit(train, pairs[held], float(fraction), seed)


def induced_subgraph(g: Graph, nodes):
    nodes = np.asarray(nodes, dtype=np.int64)
    sub = g.adjacency_matrix()[nodes][:, nodes]
    coo = sub.tocoo() if g.directed else sp.triu(sub, k=1).tocoo()
    return Graph.from_edges(
        len(nodes), coo.row, coo.col, coo.data, directed=g.directed, weighted=g.weighted
    )


def sample_node_subgraph(g: Graph, k, seed=0):
    """Induced subgraph on ``k`` uniformly sampled nodes; returns ``(subgraph, mapping)``.

    ``mapping[new_id]`` is the original id; sampled ids are kept in ascending order.
    """
    if k > g.n:
        raise ValueError(f"cannot sample {k} nodes from a graph with {g.n}")
    rng = np.random.default_rng(seed)
    nodes = np.sort(rng.choice(g.n, size=k, replace=False))
    return induced_subgraph(g, nodes), nodes


def is_connected(g: Graph):
    from scipy.sparse.csgraph import connected_components

    if g.n == 0:
        return True
    ncomp, _ = connected_components(g.adjacency_matrix(), directed=g.directed, connection="weak")
    return ncomp == 1
