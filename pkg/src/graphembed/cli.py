"""``graphembed`` command line: gen, embed, eval, viz.

Every command writes its artifacts plus ``<output>.run.json``, a sidecar with
the fully resolved config and wall-clock timings. Passing that sidecar back
through ``--config`` reruns the command with identical artifacts.

Exit codes: 0 success, 2 I/O error, 3 bad config, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .embedding import read_embedding, write_embedding
from .evaluate import (
    DEFAULT_KS,
    SCORE_KINDS,
    link_predict_eval,
    node_classify_eval,
    reconstruct_eval,
    sweep,
    write_reports_csv,
    write_sweep_csv,
)
from .graph import GraphFormatError, generate_sbm, load_edge_list, load_labels, write_edge_list, write_labels
from .methods import METHODS, embed, embedder
from .numerics import ConvergenceError, DivergenceError, fix_signs

EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC = 2, 3, 4
SIDECAR_SUFFIX = ".run.json"

# method hyperparameter flags -> params key understood by methods.embed
HYPER = {
    "beta": "beta", "lambda": "lambda", "p": "p", "q": "q", "walk_length": "walk_length",
    "num_walks": "num_walks", "window": "window", "neg": "neg", "alpha": "alpha",
    "beta_penalty": "beta_penalty", "nu": "nu", "lr": "lr", "epochs": "epochs",
}
INT_HYPER = {"walk_length", "num_walks", "window", "neg", "epochs"}

DEFAULTS = {
    "command": None, "method": None, "dim": None, "input": None, "labels": None, "output": None,
    "seed": 0, "threads": 1, "directed": False, "weighted": False,
    "task": None, "ks": list(DEFAULT_KS), "sample": 1024, "trials": 5,
    "split_fractions": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9], "hide_fraction": 0.2,
    "score": "dot", "proximity": "katz",
    "n": 1024, "blocks": 3, "p_in": 0.1, "p_out": 0.01,
    **{k: None for k in HYPER},
}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: bad config: {message}\n")


def build_parser():
    parser = _Parser(prog="graphembed", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=("embed", "eval", "viz", "gen"))
    parser.add_argument("--config", help="JSON config (or a .run.json sidecar); flags override it")
    parser.add_argument("--method", choices=METHODS)
    parser.add_argument("--dim", type=int, nargs="+")
    parser.add_argument("--input")
    parser.add_argument("--labels")
    parser.add_argument("--output")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--directed", action="store_const", const=True)
    parser.add_argument("--weighted", action="store_const", const=True)
    for flag in HYPER:
        kind = int if flag in INT_HYPER else float
        parser.add_argument("--" + flag.replace("_", "-"), dest=flag, type=kind, nargs="+")
    parser.add_argument("--proximity", choices=("katz", "common_neighbors", "adamic_adar"))
    parser.add_argument("--task", choices=("reconstruct", "linkpred", "nodeclass"))
    parser.add_argument("--ks", type=int, nargs="+")
    parser.add_argument("--sample", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--split-fractions", dest="split_fractions", type=float, nargs="+")
    parser.add_argument("--hide-fraction", dest="hide_fraction", type=float)
    parser.add_argument("--score", choices=SCORE_KINDS)
    parser.add_argument("--n", type=int, help="gen: node count")
    parser.add_argument("--blocks", type=int, help="gen: block count")
    parser.add_argument("--p-in", dest="p_in", type=float)
    parser.add_argument("--p-out", dest="p_out", type=float)
    return parser


def resolve_config(args) -> dict:
    """Defaults, then the JSON file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from None
        loaded = loaded.get("config", loaded)
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    flags = {k: v for k, v in vars(args).items() if k in DEFAULTS and v is not None}
    cfg.update(flags)
    cfg["command"] = args.command
    # single values stay scalars so sidecars read naturally
    for key in ["dim", *HYPER]:
        v = cfg[key]
        if isinstance(v, list) and len(v) == 1:
            cfg[key] = v[0]
    return cfg


def _grid(cfg):
    """Hyperparameter cells: every list-valued hyperparameter (or dim) is swept."""
    keys = [k for k in ["dim", *HYPER] if isinstance(cfg[k], list)]
    return {("dim" if k == "dim" else HYPER[k]): list(cfg[k]) for k in keys}


def _method_params(cfg):
    params = {"seed": cfg["seed"], "proximity": cfg["proximity"]}
    if not isinstance(cfg["dim"], list):
        params["dim"] = cfg["dim"]
    for flag, key in HYPER.items():
        if cfg[flag] is not None and not isinstance(cfg[flag], list):
            params[key] = cfg[flag]
    return params


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise ConfigError(f"{cfg['command']} needs --{', --'.join(k.replace('_', '-') for k in missing)}")


def _load_graph(cfg):
    path = Path(cfg["input"])
    with path.open(encoding="utf-8") as fh:
        return load_edge_list(fh, directed=bool(cfg["directed"]), weighted=bool(cfg["weighted"]))


def _load_labels(cfg, n):
    with Path(cfg["labels"]).open(encoding="utf-8") as fh:
        return load_labels(fh, n=n)


def _write_text(path, writer):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        writer(fh)


def _write_sidecar(output, cfg, timings, extra=None):
    payload = {"config": cfg, "timings": timings, **(extra or {})}
    _write_text(str(output) + SIDECAR_SUFFIX,
                lambda fh: fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n"))


# -- commands ------------------------------------------------------------------


def cmd_gen(cfg):
    _require(cfg, "output")
    t0 = time.perf_counter()
    g, labels = generate_sbm(cfg["n"], cfg["blocks"], cfg["p_in"], cfg["p_out"], seed=cfg["seed"])
    out = cfg["output"]
    _write_text(out + ".edges", lambda fh: write_edge_list(g, fh))
    _write_text(out + ".labels", lambda fh: write_labels(labels, fh))
    _write_sidecar(out, cfg, {"total": time.perf_counter() - t0},
                   {"seed": cfg["seed"], "edges": g.edge_count, "nodes": g.n})
    return 0


def cmd_embed(cfg):
    _require(cfg, "method", "dim", "input", "output")
    if isinstance(cfg["dim"], list) or _grid(cfg):
        raise ConfigError("embed takes a single value per hyperparameter")
    t0 = time.perf_counter()
    g = _load_graph(cfg)
    t1 = time.perf_counter()
    emb = embed(cfg["method"], g, _method_params(cfg))
    t2 = time.perf_counter()
    out = cfg["output"]
    if emb.paired and g.directed:
        _write_text(out + ".src", lambda fh: write_embedding(emb.Y_s, fh))
        _write_text(out + ".tgt", lambda fh: write_embedding(emb.Y_t, fh))
    else:
        _write_text(out, lambda fh: write_embedding(emb.Y, fh))
    timings = {"load": t1 - t0, "embed": t2 - t1, "total": time.perf_counter() - t0}
    _write_sidecar(out, cfg, timings, {"params": emb.params, "warnings": emb.warnings})
    return 0


def cmd_eval(cfg):
    _require(cfg, "task", "method", "dim", "input", "output")
    if cfg["task"] == "nodeclass" and not cfg["labels"]:
        raise ConfigError("nodeclass needs --labels")
    t0 = time.perf_counter()
    g = _load_graph(cfg)
    labels = _load_labels(cfg, g.n) if cfg["labels"] else None
    grid = _grid(cfg)
    base = _method_params(cfg)
    ks = tuple(cfg["ks"])
    common = {"sample": cfg["sample"], "trials": cfg["trials"]}
    if grid:
        reports = sweep(cfg["task"], cfg["method"], grid, g, labels, seed=cfg["seed"], base_params=base, ks=ks,
                        ratios=tuple(cfg["split_fractions"]), fraction=cfg["hide_fraction"], **common)
    elif cfg["task"] == "reconstruct":
        emb = embed(cfg["method"], g, base)
        reports = [reconstruct_eval(g, emb, score=cfg["score"], ks=ks, seed=cfg["seed"], **common)]
    elif cfg["task"] == "linkpred":
        reports = [link_predict_eval(g, embedder(cfg["method"], **base), fraction=cfg["hide_fraction"], ks=ks,
                                     seed=cfg["seed"], score=cfg["score"], **common)]
    else:
        emb = embed(cfg["method"], g, base)
        reports = [node_classify_eval(emb, labels, ratios=tuple(cfg["split_fractions"]), trials=cfg["trials"],
                                      seed=cfg["seed"])]
    out = cfg["output"]
    doc = {"config": cfg, "reports": [r.to_dict() for r in reports]}
    _write_text(out + ".json", lambda fh: fh.write(json.dumps(doc, sort_keys=True, indent=2) + "\n"))
    _write_text(out + ".csv", lambda fh: (write_sweep_csv if grid else write_reports_csv)(reports, fh))
    timings = {"total": time.perf_counter() - t0, "reports": [r.runtime_seconds for r in reports]}
    _write_sidecar(out, cfg, timings)
    return 0


def pca_2d(Y):
    """Top-2 principal component coordinates of the centered rows of ``Y``."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[1] < 2:
        raise ConfigError("viz needs an embedding with d >= 2")
    Yc = Y - Y.mean(axis=0)
    _, _, Vt = np.linalg.svd(Yc, full_matrices=False)
    return Yc @ fix_signs(Vt[:2].T)


def cmd_viz(cfg):
    _require(cfg, "input", "output")
    t0 = time.perf_counter()
    with Path(cfg["input"]).open(encoding="utf-8") as fh:
        Y = read_embedding(fh)
    labels = _load_labels(cfg, len(Y)) if cfg["labels"] else None
    P = pca_2d(Y)

    def write(fh):
        fh.write("node,x,y,label\n")
        for i, (x, y) in enumerate(P):
            lab = ";".join(map(str, labels.labels[i])) if labels is not None else ""
            fh.write(f"{i},{x:.9g},{y:.9g},{lab}\n")

    _write_text(cfg["output"], write)
    _write_sidecar(cfg["output"], cfg, {"total": time.perf_counter() - t0})
    return 0


COMMANDS = {"gen": cmd_gen, "embed": cmd_embed, "eval": cmd_eval, "viz": cmd_viz}


def _set_threads(n):
    if n < 1:
        raise ConfigError("--threads must be >= 1")
    import warnings

    import numba

    with warnings.catch_warnings():
        # an old system TBB only disables that threading layer; not actionable here
        warnings.simplefilter("ignore", numba.NumbaWarning)
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        cfg = resolve_config(args)
        _set_threads(int(cfg["threads"]))
        return COMMANDS[cfg["command"]](cfg)
    except (FileNotFoundError, IsADirectoryError, PermissionError, GraphFormatError, OSError) as exc:
        print(f"graphembed: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConvergenceError, DivergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"graphembed: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        print(f"graphembed: bad config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
