"""Name -> embedder registry giving every method the same ``(graph) -> Embedding`` shape."""

from __future__ import annotations

from functools import partial

from .graph import Graph
from .sdne import SdneConfig, sdne_embed
from .sgd import SgdConfig, gf_embed, line1_embed
from .spectral import PROXIMITIES, hope_embed, katz_matrix, le_embed, lle_embed
from .walks import WalkConfig, node2vec_embed

METHODS = ("lle", "le", "gf", "hope", "line1", "deepwalk", "node2vec", "sdne")

# per-method defaults for the knobs the CLI exposes
DEFAULTS = {
    "lle": {},
    "le": {},
    "gf": {"lambda": 1e-3, "lr": 0.01, "epochs": 100},
    "hope": {"beta": None, "proximity": "katz"},
    "line1": {"lr": 0.025, "epochs": 50, "neg": 5},
    "deepwalk": {"walk_length": 80, "num_walks": 10, "window": 10, "neg": 5, "lr": 0.025, "epochs": 1},
    "node2vec": {"p": 1.0, "q": 1.0, "walk_length": 80, "num_walks": 10, "window": 10, "neg": 5,
                 "lr": 0.025, "epochs": 1},
    "sdne": {"alpha": 1e-2, "beta_penalty": 5.0, "nu": 1e-4, "lr": 1e-3, "epochs": 50,
             "batch_size": 16, "hidden": None},
}


def resolve_params(method, params):
    if method not in DEFAULTS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    merged = dict(DEFAULTS[method])
    merged.update({k: v for k, v in params.items() if v is not None and (k in merged or k in ("dim", "seed"))})
    merged.setdefault("seed", 0)
    if "dim" not in merged:
        raise ValueError("missing embedding dimension 'dim'")
    return merged


def _sdne_layers(n, d, hidden):
    if hidden:
        return [n, *hidden, d]
    # one hidden layer between input and code by default
    mid = max(d + 1, min(256, n // 2))
    return [n, mid, d] if mid < n and mid > d else [n, d]


def embed(method, g: Graph, params):
    """Run ``method`` on ``g``; ``params`` uses the CLI's flag names."""
    p = resolve_params(method, params)
    d, seed = int(p["dim"]), int(p["seed"])
    if d >= g.n:
        raise ValueError(f"dimension {d} must be smaller than the node count {g.n}")
    if method == "lle":
        return lle_embed(g, d, seed=seed)
    if method == "le":
        return le_embed(g, d, seed=seed)
    if method == "hope":
        kind = p["proximity"]
        if kind == "katz":
            prox = katz_matrix(g, beta=p["beta"])
        else:
            prox = PROXIMITIES[kind](g)
        return hope_embed(g, d, prox, seed=seed)
    if method == "gf":
        cfg = SgdConfig(learning_rate=p["lr"], epochs=int(p["epochs"]), seed=seed, lam=p["lambda"])
        return gf_embed(g, d, cfg)
    if method == "line1":
        cfg = SgdConfig(learning_rate=p["lr"], epochs=int(p["epochs"]), seed=seed, neg_samples=int(p["neg"]))
        return line1_embed(g, d, cfg)
    if method in ("deepwalk", "node2vec"):
        pq = (1.0, 1.0) if method == "deepwalk" else (float(p["p"]), float(p["q"]))
        cfg = WalkConfig(int(p["num_walks"]), int(p["walk_length"]), int(p["window"]), pq[0], pq[1], seed)
        emb = node2vec_embed(g, d, cfg, neg=int(p["neg"]), lr=p["lr"], epochs=int(p["epochs"]))
        emb.method = method
        return emb
    if method == "sdne":
        cfg = SdneConfig(layer_sizes=tuple(_sdne_layers(g.n, d, p["hidden"])), alpha=p["alpha"],
                         beta_penalty=p["beta_penalty"], nu=p["nu"], lr=p["lr"], epochs=int(p["epochs"]),
                         batch_size=int(p["batch_size"]), seed=seed)
        return sdne_embed(g, cfg)
    raise ValueError(f"unknown method {method!r}")


def embedder(method, **params):
    """Partial application of :func:`embed` for drivers that take ``(graph) -> Embedding``."""
    resolve_params(method, params)
    return partial(embed, method, params=params)
