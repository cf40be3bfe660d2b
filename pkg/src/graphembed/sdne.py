"""Structural deep network embedding: a sigmoid autoencoder over adjacency rows
with a Laplacian coupling term on the bottleneck codes."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np
import scipy.sparse as sp

from .embedding import Embedding
from .graph import Graph
from .numerics import DivergenceError

MAX_NODES = 10_000
_MAGIC = b"SDNEW"
_VERSION = 1


@dataclass(frozen=True)
class SdneConfig:
    layer_sizes: tuple = (256, 128)  # encoder widths after the input, ending in d
    alpha: float = 1e-2
    beta_penalty: float = 5.0
    nu: float = 1e-4
    lr: float = 1e-3
    momentum: float = 0.9
    epochs: int = 50
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.beta_penalty <= 1:
            raise ValueError("beta_penalty must be > 1")
        if self.alpha < 0 or self.nu < 0:
            raise ValueError("alpha and nu must be nonnegative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class SdneModel:
    """Encoder layers followed by the mirrored decoder; ``weights[l]`` is ``in x out``."""

    sizes: list  # full encoder widths, sizes[0] == n
    weights: list
    biases: list
    codes: np.ndarray | None = None
    trained: bool = False
    loss_trace: list = field(default_factory=list)

    @classmethod
    def initialize(cls, sizes, rng):
        dims = list(sizes) + list(sizes[-2::-1])
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(list(sizes), weights, biases)

    @property
    def depth(self):
        return len(self.sizes) - 1

    @property
    def dims(self):
        return list(self.sizes) + list(self.sizes[-2::-1])

    def forward(self, X):
        acts = [X]
        for W, b in zip(self.weights, self.biases):
            acts.append(_sigmoid(acts[-1] @ W + b))
        return acts

    def encode(self, X):
        H = X
        for W, b in zip(self.weights[: self.depth], self.biases[: self.depth]):
            H = _sigmoid(H @ W + b)
        return H

    def decode(self, Y):
        H = Y
        for W, b in zip(self.weights[self.depth :], self.biases[self.depth :]):
            H = _sigmoid(H @ W + b)
        return H

    # flat parameter vector helpers (used by gradient checks)
    def flat(self):
        return np.concatenate([p.ravel() for pair in zip(self.weights, self.biases) for p in pair])

    def with_flat(self, theta):
        weights, biases, pos = [], [], 0
        for W, b in zip(self.weights, self.biases):
            weights.append(theta[pos : pos + W.size].reshape(W.shape))
            pos += W.size
            biases.append(theta[pos : pos + b.size].reshape(b.shape))
            pos += b.size
        return SdneModel(self.sizes, weights, biases)

    def save(self, stream: BinaryIO):
        dims = self.dims
        stream.write(_MAGIC)
        stream.write(struct.pack("<II", _VERSION, len(dims)))
        stream.write(struct.pack(f"<{len(dims)}I", *dims))
        for W, b in zip(self.weights, self.biases):
            stream.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
            stream.write(np.ascontiguousarray(b, dtype="<f8").tobytes())

    @classmethod
    def load(cls, stream: BinaryIO):
        if stream.read(len(_MAGIC)) != _MAGIC:
            raise ValueError("not an SDNE weight file")
        version, ndims = struct.unpack("<II", stream.read(8))
        if version != _VERSION:
            raise ValueError(f"unsupported SDNE weight file version {version}")
        dims = list(struct.unpack(f"<{ndims}I", stream.read(4 * ndims)))
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            weights.append(np.frombuffer(stream.read(8 * fan_in * fan_out), "<f8").reshape(fan_in, fan_out).copy())
            biases.append(np.frombuffer(stream.read(8 * fan_out), "<f8").copy())
        sizes = dims[: (ndims + 1) // 2]
        return cls(sizes, weights, biases, trained=True)


def _penalty(X, beta_penalty):
    return np.where(X > 0, beta_penalty, 1.0)


def sdne_loss_and_grad(model: SdneModel, X, lap, alpha, beta_penalty, nu, reg_scale=1.0):
    """Loss ``sum |(Xhat - X) * B|^2 + alpha tr(Y^T L Y) + nu sum |W|^2`` and its gradients."""
    acts = model.forward(X)
    Y = acts[model.depth]
    Xhat = acts[-1]
    Bsq = _penalty(X, beta_penalty) ** 2
    diff = Xhat - X
    recon = float(np.sum(diff * diff * Bsq))
    LY = lap @ Y
    first = float(np.sum(Y * LY))
    reg = sum(float(np.sum(W * W)) for W in model.weights)
    loss = recon + alpha * first + nu * reg_scale * reg

    gW = [None] * len(model.weights)
    gb = [None] * len(model.biases)
    dH = 2.0 * diff * Bsq
    for layer in range(len(model.weights) - 1, -1, -1):
        H = acts[layer + 1]
        if layer + 1 == model.depth:
            dH = dH + 2.0 * alpha * LY
        dZ = dH * H * (1.0 - H)
        gW[layer] = acts[layer].T @ dZ + 2.0 * nu * reg_scale * model.weights[layer]
        gb[layer] = dZ.sum(axis=0)
        dH = dZ @ model.weights[layer].T
    return loss, gW, gb


def _full_laplacian(g):
    W = g.adjacency_matrix()
    deg = np.asarray(W.sum(axis=1)).ravel()
    return (sp.diags(deg) - W).tocsr()


def sdne_full_loss(model, g: Graph, cfg: SdneConfig):
    X = g.adjacency_matrix().toarray()
    return sdne_loss_and_grad(model, X, _full_laplacian(g), cfg.alpha, cfg.beta_penalty, cfg.nu)[0]


def _resolve_sizes(n, layer_sizes):
    sizes = list(layer_sizes)
    if not sizes or sizes[0] != n:
        sizes = [n] + sizes
    if len(sizes) < 2:
        raise ValueError("need at least one encoder layer")
    if any(s > n for s in sizes):
        raise ValueError(f"layer width exceeds n={n}")
    if any(a <= b for a, b in zip(sizes[:-1], sizes[1:])):
        raise ValueError(f"layer sizes must strictly decrease: {sizes}")
    return sizes


def sdne_embed(g: Graph, cfg: SdneConfig | None = None) -> Embedding:
    """Train with momentum SGD over node mini-batches.

    A batch uses its rows' reconstruction, the Laplacian of the subgraph
    induced by the batch, and weight decay scaled by ``|batch| / n``; with
    ``batch_size >= n`` each step is exact full-batch gradient descent.
    """
    cfg = cfg or SdneConfig()
    if g.directed:
        raise ValueError("SDNE requires an undirected graph")
    n = g.n
    if n > MAX_NODES:
        raise ValueError(f"SDNE is capped at {MAX_NODES} nodes (dense input rows)")
    sizes = _resolve_sizes(n, cfg.layer_sizes)
    rng = np.random.default_rng([cfg.seed, 0x5D])
    model = SdneModel.initialize(sizes, rng)
    A = g.adjacency_matrix()
    X = A.toarray()
    full_lap = _full_laplacian(g)
    velocity_W = [np.zeros_like(W) for W in model.weights]
    velocity_b = [np.zeros_like(b) for b in model.biases]
    trace = [sdne_loss_and_grad(model, X, full_lap, cfg.alpha, cfg.beta_penalty, cfg.nu)[0]]
    bs = min(cfg.batch_size, n)
    for ep in range(cfg.epochs):
        order = rng.permutation(n) if bs < n else np.arange(n)
        for start in range(0, n, bs):
            idx = np.sort(order[start : start + bs])
            sub = A[idx][:, idx]
            lap = (sp.diags(np.asarray(sub.sum(axis=1)).ravel()) - sub).tocsr()
            _, gW, gb = sdne_loss_and_grad(model, X[idx], lap, cfg.alpha, cfg.beta_penalty, cfg.nu,
                                           reg_scale=len(idx) / n)
            for l in range(len(model.weights)):
                velocity_W[l] = cfg.momentum * velocity_W[l] - cfg.lr * gW[l]
                velocity_b[l] = cfg.momentum * velocity_b[l] - cfg.lr * gb[l]
                model.weights[l] += velocity_W[l]
                model.biases[l] += velocity_b[l]
        loss = sdne_loss_and_grad(model, X, full_lap, cfg.alpha, cfg.beta_penalty, cfg.nu)[0]
        trace.append(loss)
        if not np.isfinite(loss) or loss > 1e3 * trace[0]:
            raise DivergenceError(f"SDNE diverged at epoch {ep}; lower lr={cfg.lr}")
    model.codes = model.encode(X)
    model.trained = True
    model.loss_trace = trace
    params = {
        "d": sizes[-1], "layer_sizes": sizes, "alpha": cfg.alpha, "beta_penalty": cfg.beta_penalty,
        "nu": cfg.nu, "lr": cfg.lr, "epochs": cfg.epochs, "batch_size": cfg.batch_size, "seed": cfg.seed,
    }
    return Embedding(model.codes.copy(), "sdne", params, loss_trace=trace, model=model)


def sdne_reconstruct(model: SdneModel, node, codes=None):
    """Decoder output (a reconstructed adjacency row) for ``node``'s code."""
    if codes is None:
        if not model.trained or model.codes is None:
            raise ValueError("model has not been trained")
        codes = model.codes
    return model.decode(codes[node : node + 1])[0]
