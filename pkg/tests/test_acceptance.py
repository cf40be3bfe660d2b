import itertools
import json
import shutil
import time
from collections import Counter
from contextlib import contextmanager

import numpy as np
import pytest

from graphembed.cli import run
from graphembed.evaluate import (
    f1_scores,
    link_predict_eval,
    logreg_grad,
    logreg_loss,
    map_score,
    node_classify_eval,
    precision_at_k,
    reconstruct_eval,
)
from graphembed.graph import Graph, generate_sbm, karate, karate_path, laplacian, load_edge_list, transition_matrix
from graphembed.methods import embed, embedder
from graphembed.numerics import grad_check
from graphembed.sdne import SdneModel, _full_laplacian, sdne_loss_and_grad
from graphembed.sgd import gf_grad, gf_loss, line1_grad, line1_loss
from graphembed.spectral import hope_embed, katz_matrix, le_embed, lle_embed, lle_objective
from graphembed.walks import WalkConfig, generate_walks

TEN = "0 1 1\n0 2 2\n1 2 1\n1 3 3\n2 3 1\n3 4 1\n4 5 2\n4 6 1\n5 6 1\n6 7 1\n7 8 1\n7 9 2\n8 9 1\n2 5 1"


@contextmanager
def within(seconds):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    assert elapsed < seconds, f"took {elapsed:.1f}s, limit {seconds}s"


def random_graph(n, p, rng, weighted=False):
    iu, ju = np.triu_indices(n, 1)
    keep = (rng.random(len(iu)) < p) | (ju == iu + 1)
    w = rng.uniform(0.5, 2.0, keep.sum()) if weighted else None
    return Graph.from_edges(n, iu[keep], ju[keep], w, weighted=weighted)


@pytest.fixture(scope="module")
def sbm():
    return generate_sbm(1024, 3, 0.1, 0.01, seed=0)


def brute_ap(ranking, observed):
    hits, total = 0, 0.0
    for k, x in enumerate(ranking, start=1):
        if x in observed:
            hits += 1
            total += hits / k
    return total / hits if hits else 0.0


@pytest.mark.criterion(1, "metric oracles")
def test_metric_oracles():
    with within(1):
        rng = np.random.default_rng(1)
        universe = [(i, j) for i in range(12) for j in range(i + 1, 12)]
        for _ in range(20):
            pairs = [universe[i] for i in rng.permutation(len(universe))]
            observed = {universe[i] for i in rng.choice(len(universe), 20, replace=False)}
            for k in (1, 7, 30, len(pairs)):
                assert abs(precision_at_k(pairs, observed, k) - sum(p in observed for p in pairs[:k]) / k) <= 1e-12

            rankings = [rng.permutation(20).tolist() for _ in range(6)]
            obs = [set(rng.choice(20, rng.integers(0, 5), replace=False).tolist()) for _ in range(6)]
            obs[0].add(rankings[0][3])
            expect = np.mean([brute_ap(r, o) for r, o in zip(rankings, obs) if o])
            assert abs(map_score(rankings, obs) - expect) <= 1e-12

            L = 4
            truth = [set(rng.choice(L, rng.integers(1, 3), replace=False).tolist()) for _ in range(15)]
            pred = [set(rng.choice(L, len(t), replace=False).tolist()) for t in truth]
            tp = np.array([sum(lab in t and lab in p for t, p in zip(truth, pred)) for lab in range(L)])
            fp = np.array([sum(lab not in t and lab in p for t, p in zip(truth, pred)) for lab in range(L)])
            fn = np.array([sum(lab in t and lab not in p for t, p in zip(truth, pred)) for lab in range(L)])
            P, R = tp.sum() / (tp.sum() + fp.sum()), tp.sum() / (tp.sum() + fn.sum())
            micro = 2 * P * R / (P + R) if P + R else 0.0
            macro = np.mean([2 * a / (2 * a + b + c) for a, b, c in zip(tp, fp, fn) if a + b + c])
            mi, ma = f1_scores(truth, pred, L)
            assert abs(mi - micro) <= 1e-12 and abs(ma - macro) <= 1e-12


@pytest.mark.criterion(2, "LLE and LE match a dense eigensolver")
def test_spectral_correctness():
    with within(10):
        rng = np.random.default_rng(2)
        for trial in range(10):
            n = int(rng.integers(16, 65))
            g = random_graph(n, 0.12, rng, weighted=trial % 2 == 1)
            d = 4

            Y = lle_embed(g, d).Y
            T = transition_matrix(g).matrix.toarray()
            M = (np.eye(n) - T).T @ (np.eye(n) - T)
            oracle = n * np.linalg.eigvalsh(M)[1 : d + 1].sum()
            assert lle_objective(g, Y) == pytest.approx(oracle, abs=1e-6)
            assert np.max(np.abs(Y.T @ Y / n - np.eye(d))) <= 1e-6

            Y = le_embed(g, d).Y
            D = np.diag(g.weighted_degree())
            oracle = np.linalg.eigvalsh(laplacian(g, normalized=True).toarray())[1 : d + 1].sum()
            assert np.trace(Y.T @ laplacian(g).toarray() @ Y) == pytest.approx(oracle, abs=1e-6)
            assert np.max(np.abs(Y.T @ D @ Y - np.eye(d))) <= 1e-6


@pytest.mark.criterion(3, "truncated Katz equals the closed form")
def test_katz_equivalence():
    with within(10):
        rng = np.random.default_rng(3)
        for _ in range(20):
            g = random_graph(50, 0.1, rng)
            W = g.adjacency_matrix().toarray()
            beta = 0.5 / np.max(np.abs(np.linalg.eigvalsh(W)))
            S = katz_matrix(g, beta=beta).S
            oracle = np.linalg.solve(np.eye(50) - beta * W, beta * W)
            assert np.max(np.abs(S - oracle)) <= 1e-8


@pytest.mark.criterion(4, "HOPE residual equals the SVD tail")
def test_hope_optimality():
    with within(5):
        g = karate()
        prox = katz_matrix(g)
        sigma = np.linalg.svd(prox.S, compute_uv=False)
        for d in (2, 8, 16):
            emb = hope_embed(g, d, prox)
            resid = np.linalg.norm(prox.S - emb.Y_s @ emb.Y_t.T) ** 2
            assert resid == pytest.approx(np.sum(sigma[d:] ** 2), rel=1e-6)


@pytest.mark.criterion(5, "finite-difference gradient gates")
def test_gradient_gates():
    with within(30):
        rng = np.random.default_rng(5)
        for _ in range(3):
            g = random_graph(10, 0.3, rng, weighted=True)
            pairs, w = g.edges()
            Y = rng.standard_normal((10, 3)) * 0.5
            assert grad_check(lambda y: gf_loss(y, pairs, w, 0.3), lambda y: gf_grad(y, pairs, w, 0.3), Y) <= 1e-5
            for neg in (0, 3):
                assert grad_check(lambda y: line1_loss(y, g, neg), lambda y: line1_grad(y, g, neg), Y) <= 1e-5

            X = rng.standard_normal((12, 3))
            T = (rng.random((12, 2)) < 0.5).astype(float)
            theta = rng.standard_normal(3 * 2 + 2)
            err = grad_check(lambda t: logreg_loss(t, X, T, 0.1), lambda t: logreg_grad(t, X, T, 0.1), theta)
            assert err <= 1e-5

            model = SdneModel.initialize([10, 5, 2], rng)
            model.biases = [rng.standard_normal(b.shape) * 0.1 for b in model.biases]
            A = g.adjacency_matrix().toarray()
            lap = _full_laplacian(g)

            def f(t):
                return sdne_loss_and_grad(model.with_flat(t), A, lap, 0.5, 5.0, 1e-2)[0]

            def grad(t):
                _, gW, gb = sdne_loss_and_grad(model.with_flat(t), A, lap, 0.5, 5.0, 1e-2)
                return np.concatenate([p.ravel() for pair in zip(gW, gb) for p in pair])

            assert grad_check(f, grad, model.flat()) <= 1e-4


@pytest.mark.criterion(6, "second-order walk transition law")
@pytest.mark.parametrize("p,q", [(1, 1), (4, 0.25), (0.25, 4)])
def test_walk_bias_law(p, q):
    with within(30):
        g = load_edge_list(TEN, weighted=True)
        corpus = generate_walks(g, WalkConfig(num_walks=4000, walk_length=80, p=p, q=q, seed=6))
        counts, pair_totals = Counter(), Counter()
        for walk in corpus:
            for t, v, x in zip(walk, walk[1:], walk[2:]):
                counts[(t, v, x)] += 1
                pair_totals[(t, v)] += 1
        assert sum(pair_totals.values()) >= 10**5
        for (t, v), total in pair_totals.items():
            nbrs, w = g.neighbors(v)
            t_nbrs = set(g.neighbors(t)[0].tolist())
            alpha = np.array([1 / p if x == t else (1.0 if x in t_nbrs else 1 / q) for x in nbrs.tolist()])
            probs = w * alpha / np.sum(w * alpha)
            for x, prob in zip(nbrs.tolist(), probs):
                assert abs(counts[(t, v, x)] / total - prob) <= 0.01


@pytest.mark.criterion(7, "SBM communities from 8-d embeddings")
@pytest.mark.parametrize("method", ["le", "hope", "node2vec"])
def test_sbm_community_recovery(sbm, method):
    g, labels = sbm
    with within(300):
        rep = node_classify_eval(embed(method, g, {"dim": 8}), labels, ratios=(0.5,), trials=5)
        micro = rep.f1[0.5]["micro_mean"]
    print(f"{method}: micro-F1 {micro:.4f}")
    assert micro >= 0.90


def lift(g, dim):
    rep = link_predict_eval(g, embedder("hope", dim=dim), fraction=0.2, trials=5, seed=0)
    baseline = rep.extras["heldout_density"]
    print(f"MAP {rep.map_mean:.4f}, baseline {baseline:.5f}, lift {rep.map_mean / baseline:.2f}")
    return rep.map_mean, baseline


@pytest.mark.criterion(8, "link prediction lift on karate, HOPE d=16")
def test_linkpred_lift_karate():
    with within(300):
        map_mean, baseline = lift(karate(), 16)
    assert map_mean >= 5 * baseline


@pytest.mark.criterion(8, "link prediction lift on SBM, HOPE d=128")
def test_linkpred_lift_sbm(sbm):
    with within(300):
        map_mean, baseline = lift(sbm[0], 128)
    assert map_mean >= 5 * baseline


@pytest.mark.criterion(9, "reconstruction MAP grows with dimension")
def test_dimension_monotonicity(sbm):
    g, _ = sbm
    with within(300):
        maps = [reconstruct_eval(g, embed("hope", g, {"dim": d}), trials=5).map_mean for d in (8, 32, 128)]
    print("MAP by dim:", maps)
    assert all(b >= a * 0.99 for a, b in itertools.pairwise(maps))


def rerun_matches(tmp_path, argv, outputs):
    assert run(argv) == 0
    saved = tmp_path / "saved"
    saved.mkdir(exist_ok=True)
    before = {}
    for p in outputs:
        before[p] = p.read_bytes()
        shutil.copy(p, saved / p.name)
        p.unlink()
    out = argv[argv.index("--output") + 1]
    sidecar = out + ".run.json"
    assert json.loads(open(sidecar).read())["config"]["threads"] == 1
    assert run([argv[0], "--config", sidecar]) == 0
    return all(p.read_bytes() == before[p] for p in outputs)


@pytest.mark.criterion(10, "CLI reruns from sidecars are byte-identical")
def test_cli_reproducibility(tmp_path):
    karate_file = tmp_path / "karate.edges"
    karate_file.write_text(karate_path().read_text())
    kf = str(karate_file)
    t1 = ["--threads", "1"]

    gen = str(tmp_path / "g")
    assert rerun_matches(tmp_path, ["gen", "--n", "300", "--seed", "5", "--output", gen, *t1],
                         [tmp_path / "g.edges", tmp_path / "g.labels"])

    fast = {"gf": ["--epochs", "30"], "line1": ["--epochs", "10"], "sdne": ["--epochs", "5"],
            "deepwalk": ["--num-walks", "3", "--walk-length", "20"],
            "node2vec": ["--num-walks", "3", "--walk-length", "20", "--p", "0.5", "--q", "2"]}
    for method in ("lle", "le", "hope", "gf", "line1", "deepwalk", "node2vec", "sdne"):
        out = tmp_path / f"{method}.emb"
        argv = ["embed", "--method", method, "--dim", "4", "--input", kf, "--output", str(out), *t1,
                *fast.get(method, [])]
        assert rerun_matches(tmp_path, argv, [out]), method

    ev = str(tmp_path / "ev")
    argv = ["eval", "--task", "nodeclass", "--method", "le", "--dim", "4", "8", "--input", gen + ".edges",
            "--labels", gen + ".labels", "--split-fractions", "0.5", "--trials", "2", "--output", ev, *t1]
    assert rerun_matches(tmp_path, argv, [tmp_path / "ev.json", tmp_path / "ev.csv"])

    lp = str(tmp_path / "lp")
    argv = ["eval", "--task", "linkpred", "--method", "hope", "--dim", "4", "--input", kf, "--ks", "2", "10",
            "--trials", "2", "--output", lp, *t1]
    assert rerun_matches(tmp_path, argv, [tmp_path / "lp.json", tmp_path / "lp.csv"])

    viz = tmp_path / "v.csv"
    argv = ["viz", "--input", str(tmp_path / "le.emb"), "--output", str(viz), *t1]
    assert rerun_matches(tmp_path, argv, [viz])
