"""Random-walk corpora (DeepWalk / node2vec) and skip-gram negative-sampling training."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from . import _kernels as K
from .embedding import Embedding
from .graph import Graph
from .numerics import DivergenceError


@dataclass(frozen=True)
class WalkConfig:
    num_walks: int = 10
    walk_length: int = 80
    window: int = 10
    p: float = 1.0
    q: float = 1.0
    seed: int = 0
    # arc alias tables above this many entries fall back to linear-scan sampling
    table_cap: int = 10_000_000

    def __post_init__(self):
        if self.walk_length < 2:
            raise ValueError("walk_length must be >= 2")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive")
        if self.num_walks < 1:
            raise ValueError("num_walks must be >= 1")


@dataclass
class WalkCorpus:
    walks: np.ndarray  # (num_walks, walk_length) int64, padded with -1
    lengths: np.ndarray
    n: int

    def __len__(self):
        return len(self.lengths)

    def __iter__(self):
        for row, L in zip(self.walks, self.lengths):
            yield row[:L].tolist()

    @classmethod
    def from_lists(cls, walks, n):
        L = max(len(w) for w in walks)
        arr = np.full((len(walks), L), -1, dtype=np.int64)
        for i, w in enumerate(walks):
            arr[i, : len(w)] = w
        corpus = cls(arr, np.array([len(w) for w in walks], dtype=np.int64), int(n))
        if corpus.walks.max() >= n:
            raise ValueError("walk contains a node id >= n")
        return corpus

    def write(self, stream: TextIO):
        for walk in self:
            stream.write(" ".join(map(str, walk)) + "\n")

    @classmethod
    def read(cls, stream: TextIO, n=None):
        walks = [[int(x) for x in line.split()] for line in stream if line.strip()]
        if n is None:
            n = max(max(w) for w in walks) + 1
        return cls.from_lists(walks, n)


def _start_order(n, num_walks, seed):
    """Start nodes and walk indices; start-node order reshuffled on every pass."""
    starts, ids = [], []
    for rep in range(num_walks):
        rng = np.random.default_rng([seed, rep, 0x57A7])
        starts.append(rng.permutation(n))
        ids.append(np.full(n, rep))
    return np.concatenate(starts).astype(np.int64), np.concatenate(ids).astype(np.int64)


def generate_walks(g: Graph, cfg: WalkConfig) -> WalkCorpus:
    """``cfg.num_walks`` walks per node; steps weighted by ``w_vx * alpha_pq(t, x)``."""
    n = g.n
    indptr, indices, weights = g.indptr, g.indices, g.weights
    nnz = len(indices)
    node_prob = np.zeros(nnz)
    node_alias = np.zeros(nnz, dtype=np.int64)
    K.build_node_tables(indptr, weights, node_prob, node_alias)
    inv_p, inv_q = 1.0 / cfg.p, 1.0 / cfg.q
    edge_offsets = np.zeros(1, dtype=np.int64)
    edge_prob = np.zeros(1)
    edge_alias = np.zeros(1, dtype=np.int64)
    if cfg.p == 1.0 and cfg.q == 1.0:
        mode = 0
    else:
        deg = np.diff(indptr)
        sizes = deg[indices] if nnz else np.zeros(0, dtype=np.int64)
        total = int(sizes.sum())
        if total <= cfg.table_cap:
            mode = 1
            edge_offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64) if nnz else edge_offsets
            edge_prob = np.zeros(max(total, 1))
            edge_alias = np.zeros(max(total, 1), dtype=np.int64)
            K.build_edge_tables(indptr, indices, weights, inv_p, inv_q, edge_offsets, edge_prob, edge_alias)
        else:
            mode = 2
    starts, walk_ids = _start_order(n, cfg.num_walks, cfg.seed)
    out = np.full((len(starts), cfg.walk_length), -1, dtype=np.int64)
    lengths = np.zeros(len(starts), dtype=np.int64)
    K.walk_kernel(indptr, indices, weights, starts, walk_ids, cfg.walk_length, cfg.seed, inv_p, inv_q,
                  mode, node_prob, node_alias, edge_offsets, edge_prob, edge_alias, out, lengths)
    return WalkCorpus(out, lengths, n)


def _pair_count(lengths, window):
    total = 0
    for L in np.unique(lengths):
        L = int(L)
        per = sum(min(L, i + window + 1) - max(0, i - window) - 1 for i in range(L))
        total += per * int(np.sum(lengths == L))
    return total


def _noise_tables(corpus):
    counts = np.bincount(corpus.walks[corpus.walks >= 0], minlength=corpus.n).astype(np.float64)
    weights = counts ** 0.75
    if weights.sum() == 0:
        weights[:] = 1.0
    prob = np.zeros(corpus.n)
    alias = np.zeros(corpus.n, dtype=np.int64)
    K.build_alias(weights, prob, alias)
    return prob, alias, weights / weights.sum()


def _sample_pairs(corpus, window, size, rng):
    """Fixed random sample of (center, context) pairs for loss monitoring."""
    rows = rng.integers(0, len(corpus), size=size)
    L = corpus.lengths[rows]
    keep = L >= 2
    rows, L = rows[keep], L[keep]
    pos = (rng.random(len(rows)) * L).astype(np.int64)
    off = rng.integers(1, window + 1, size=len(rows)) * rng.choice([-1, 1], size=len(rows))
    ctx = np.clip(pos + off, 0, L - 1)
    ok = ctx != pos
    return corpus.walks[rows[ok], pos[ok]], corpus.walks[rows[ok], ctx[ok]]


def sgns_objective(Y, C, centers, contexts, negatives):
    """Mean negative log-likelihood of pairs with fixed negatives (rows of ``negatives``)."""
    def log_sig(x):
        return -np.logaddexp(0.0, -x)

    pos = np.einsum("ij,ij->i", Y[centers], C[contexts])
    negs = np.einsum("ij,ikj->ik", Y[centers], C[negatives])
    return float(-(log_sig(pos).sum() + log_sig(-negs).sum()) / len(centers))


def sgns_train(corpus: WalkCorpus, d=128, window=10, neg=5, lr=0.025, epochs=1, seed=0,
               keep_context=False, monitor_pairs=20000) -> Embedding:
    """Skip-gram with negative sampling over a walk corpus.

    The learning rate decays linearly from ``lr`` to ``lr / 100`` across all
    pair updates; negatives follow the corpus unigram distribution to the 3/4.
    ``loss_trace`` holds the objective on a fixed pair sample after each epoch.
    """
    if len(corpus) == 0 or corpus.lengths.max() < 2:
        raise ValueError("corpus has no (center, context) pairs")
    if neg < 1:
        raise ValueError("neg must be >= 1")
    n = corpus.n
    rng = np.random.default_rng([seed, 0x56E5])
    Y = (rng.random((n, d)) - 0.5) / d
    C = np.zeros((n, d))
    prob, alias, noise = _noise_tables(corpus)
    total = max(_pair_count(corpus.lengths, window) * epochs, 1)
    mon_rng = np.random.default_rng([seed, 0x303])
    mc, mx = _sample_pairs(corpus, window, monitor_pairs, mon_rng)
    cdf = np.cumsum(noise)
    mneg = np.searchsorted(cdf, mon_rng.random((len(mc), neg)) * cdf[-1], side="right")
    mneg = np.minimum(mneg, n - 1)
    trace = [sgns_objective(Y, C, mc, mx, mneg)]
    done = 0
    for ep in range(epochs):
        loss, count = K.sgns_epoch(corpus.walks, corpus.lengths, window, neg, Y, C, prob, alias,
                                   lr, lr / 100.0, done, total, seed, ep)
        done += count
        if not np.all(np.isfinite(Y)) or not math.isfinite(loss):
            raise DivergenceError(f"SGNS diverged at epoch {ep} with lr={lr}")
        trace.append(sgns_objective(Y, C, mc, mx, mneg))
        if trace[-1] > 1e3 * trace[0]:
            raise DivergenceError(f"SGNS loss exploded at epoch {ep}; lower lr={lr}")
    model = {"context": C} if keep_context else None
    params = {"d": d, "window": window, "neg": neg, "lr": lr, "epochs": epochs, "seed": seed}
    return Embedding(Y, "sgns", params, loss_trace=trace, model=model)


def node2vec_embed(g: Graph, d=128, cfg: WalkConfig | None = None, neg=5, lr=0.025, epochs=1,
                   method="node2vec") -> Embedding:
    cfg = cfg or WalkConfig()
    corpus = generate_walks(g, cfg)
    emb = sgns_train(corpus, d=d, window=cfg.window, neg=neg, lr=lr, epochs=epochs, seed=cfg.seed)
    emb.method = method
    emb.params = {
        "d": d, "num_walks": cfg.num_walks, "walk_length": cfg.walk_length, "window": cfg.window,
        "p": cfg.p, "q": cfg.q, "neg": neg, "lr": lr, "epochs": epochs, "seed": cfg.seed,
    }
    return emb


def deepwalk_embed(g: Graph, d=128, cfg: WalkConfig | None = None, **train) -> Embedding:
    """node2vec with ``p = q = 1``: uniform (weight-proportional) first-order walks."""
    cfg = cfg or WalkConfig()
    cfg = WalkConfig(cfg.num_walks, cfg.walk_length, cfg.window, 1.0, 1.0, cfg.seed, cfg.table_cap)
    return node2vec_embed(g, d, cfg, method="deepwalk", **train)
