"""Per-edge SGD embedders: Graph Factorization and first-order LINE."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from . import _kernels as K
from .embedding import Embedding
from .graph import Graph
from .numerics import DivergenceError


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 0.01
    epochs: int = 100
    seed: int = 0
    init_scale: float | None = None  # defaults to 0.1 / sqrt(d)
    lam: float = 0.0
    neg_samples: int = 5
    decay: bool = False  # linear decay to learning_rate / 10

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.neg_samples < 0:
            raise ValueError("neg_samples must be nonnegative")


def _init(n, d, cfg):
    scale = cfg.init_scale if cfg.init_scale is not None else 0.1 / np.sqrt(d)
    rng = np.random.default_rng([cfg.seed, 0x6F])
    return rng.uniform(-scale, scale, size=(n, d))


def _rate(cfg, epoch):
    if not cfg.decay or cfg.epochs == 1:
        return cfg.learning_rate
    return cfg.learning_rate * (1.0 - 0.9 * epoch / (cfg.epochs - 1))


# -- Graph Factorization ------------------------------------------------------


def gf_loss(Y, pairs, weights, lam):
    """``1/2 sum_E (w_ij - <Y_i, Y_j>)^2 + lam/2 sum_i |Y_i|^2``."""
    err = weights - np.einsum("ij,ij->i", Y[pairs[:, 0]], Y[pairs[:, 1]])
    return 0.5 * float(err @ err) + 0.5 * lam * float(np.sum(Y * Y))


def gf_grad(Y, pairs, weights, lam):
    i, j = pairs[:, 0], pairs[:, 1]
    err = weights - np.einsum("ij,ij->i", Y[i], Y[j])
    G = lam * Y
    np.add.at(G, i, -err[:, None] * Y[j])
    np.add.at(G, j, -err[:, None] * Y[i])
    return G


def gf_embed(g: Graph, d, cfg: SgdConfig | None = None) -> Embedding:
    cfg = cfg or SgdConfig()
    if d < 1:
        raise ValueError("d must be >= 1")
    pairs, weights = g.edges()
    pairs = np.ascontiguousarray(pairs, dtype=np.int64)
    Y = _init(g.n, d, cfg)
    trace = [gf_loss(Y, pairs, weights, cfg.lam)]
    rng = np.random.default_rng([cfg.seed, 0x6E])
    for ep in range(cfg.epochs):
        order = rng.permutation(len(pairs)).astype(np.int64)
        K.gf_epoch(pairs, weights, order, Y, _rate(cfg, ep), cfg.lam)
        loss = gf_loss(Y, pairs, weights, cfg.lam)
        trace.append(loss)
        _check_divergence(trace, ep, cfg)
    params = {"d": d, "lambda": cfg.lam, "lr": cfg.learning_rate, "epochs": cfg.epochs, "seed": cfg.seed}
    return Embedding(Y, "gf", params, loss_trace=trace)


def _check_divergence(trace, ep, cfg):
    loss = trace[-1]
    if not np.isfinite(loss) or loss > 1e3 * max(trace[0], 1e-12):
        raise DivergenceError(
            f"loss diverged at epoch {ep} ({loss:.3g}); learning_rate={cfg.learning_rate} is too large"
        )


# -- LINE (first order) ------------------------------------------------------


def _arcs(g):
    """Both orientations of every undirected edge; arcs as stored for directed graphs."""
    rows = np.repeat(np.arange(g.n), np.diff(g.indptr))
    return np.column_stack([rows, g.indices]).astype(np.int64), g.weights.copy()


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    return np.exp(_log_sigmoid(x))


def _negative_weights(g, neg):
    """Per-row weight on each non-neighbor: ``neg * outdeg(i) / |non-neighbors(i)|``."""
    n = g.n
    A = g.adjacency_matrix().toarray() > 0
    mask = ~A
    np.fill_diagonal(mask, False)
    outdeg = np.diff(g.indptr).astype(np.float64)
    nonnb = mask.sum(axis=1)
    coef = np.where(nonnb > 0, neg * outdeg / np.maximum(nonnb, 1), 0.0)
    return mask * coef[:, None] if n else mask.astype(float)


def line1_loss(Y, g: Graph, neg=0, _negw=None):
    """Expected first-order LINE objective under uniform non-neighbor negatives.

    ``-sum_arcs w_ij log s(<Y_i,Y_j>) - neg * sum_arcs E_z log s(-<Y_i,Y_z>)``.
    """
    arcs, w = _arcs(g)
    pos = np.einsum("ij,ij->i", Y[arcs[:, 0]], Y[arcs[:, 1]])
    loss = -float(w @ _log_sigmoid(pos))
    if neg:
        negw = _negative_weights(g, neg) if _negw is None else _negw
        loss -= float(np.sum(negw * _log_sigmoid(-(Y @ Y.T))))
    return loss


def line1_grad(Y, g: Graph, neg=0, _negw=None):
    arcs, w = _arcs(g)
    i, j = arcs[:, 0], arcs[:, 1]
    pos = np.einsum("ij,ij->i", Y[i], Y[j])
    coef = -w * (1.0 - _sigmoid(pos))
    G = np.zeros_like(Y)
    np.add.at(G, i, coef[:, None] * Y[j])
    np.add.at(G, j, coef[:, None] * Y[i])
    if neg:
        negw = _negative_weights(g, neg) if _negw is None else _negw
        Gs = negw * _sigmoid(Y @ Y.T)
        G += (Gs + Gs.T) @ Y
    return G


def line1_embed(g: Graph, d, cfg: SgdConfig | None = None) -> Embedding:
    """First-order LINE: per-arc SGD with uniform non-neighbor negatives."""
    cfg = cfg or SgdConfig(learning_rate=0.025, epochs=50)
    if d < 1:
        raise ValueError("d must be >= 1")
    arcs, w = _arcs(g)
    Y = _init(g.n, d, cfg)
    negw = _negative_weights(g, cfg.neg_samples) if cfg.neg_samples else None
    trace = [line1_loss(Y, g, cfg.neg_samples, negw)]
    rng = np.random.default_rng([cfg.seed, 0x11])
    for ep in range(cfg.epochs):
        order = rng.permutation(len(arcs)).astype(np.int64)
        K.line1_epoch(arcs, w, order, g.indptr, g.indices, Y, _rate(cfg, ep), cfg.neg_samples,
                      cfg.seed, ep)
        trace.append(line1_loss(Y, g, cfg.neg_samples, negw))
        _check_divergence(trace, ep, cfg)
    params = {"d": d, "lr": cfg.learning_rate, "epochs": cfg.epochs, "neg": cfg.neg_samples,
              "seed": cfg.seed}
    return Embedding(Y, "line1", params, loss_trace=trace)


def first_order_probability(yi, yj):
    return float(_sigmoid(np.dot(yi, yj)))


def write_loss_trace(trace, stream: TextIO):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["epoch", "loss"])
    for ep, loss in enumerate(trace):
        writer.writerow([ep, repr(float(loss))])
