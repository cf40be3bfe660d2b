"""Eigen/SVD embedders (LLE, Laplacian Eigenmaps, HOPE) and HOPE's proximity matrices."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .embedding import Embedding
from .graph import Graph, laplacian, transition_matrix
from .numerics import power_iteration_radius, symmetric_eigs, truncated_svd

# Adamic-Adar weight for a shared neighbor of degree 1, where 1/log(1) is singular.
AA_DEGREE_ONE_WEIGHT = 10.0


class DisconnectedGraphWarning(UserWarning):
    pass


@dataclass
class ProximityMatrix:
    S: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)


def _require_undirected(g, what):
    if g.directed:
        raise ValueError(f"{what} requires an undirected graph")


def _component_count(g):
    return connected_components(g.adjacency_matrix(), directed=False)[0]


def lle_embed(g: Graph, d, tol=1e-8, max_iter=1000, seed=0):
    """Locally linear embedding with neighbor weights ``D^-1 W``.

    Takes eigenvectors 2..d+1 of ``(I - D^-1 W)^T (I - D^-1 W)`` and scales
    them so that ``Y^T Y / N = I`` and the rows sum to zero.
    """
    _require_undirected(g, "LLE")
    n = g.n
    if not 1 <= d < n - 1:
        raise ValueError(f"need 1 <= d < n - 1 (d={d}, n={n})")
    trans = transition_matrix(g)
    if len(trans.zero_degree_rows):
        raise ValueError(f"LLE needs every node to have a neighbor; node {trans.zero_degree_rows[0]} has none")
    if _component_count(g) > 1:
        raise ValueError("LLE requires a connected graph")
    R = (sp.identity(n, format="csr") - trans.matrix).tocsr()
    M = (R.T @ R).tocsr()
    M = 0.5 * (M + M.T)
    eig = symmetric_eigs(M, d + 1, which="smallest", tol=tol, max_iter=max_iter, seed=seed)
    U = eig.eigenvectors[:, 1:]
    # the discarded bottom vector is constant; remove any rounding leakage of it
    U = U - U.mean(axis=0)
    w, Q = np.linalg.eigh(U.T @ U)
    U = U @ (Q / np.sqrt(w)) @ Q.T
    Y = np.sqrt(n) * U
    return Embedding(Y, "lle", {"d": d}, model={"eigenvalues": eig.eigenvalues})


def lle_objective(g: Graph, Y):
    """``sum_i |Y_i - sum_j What_ij Y_j|^2`` with row-normalized weights."""
    T = transition_matrix(g).matrix
    diff = Y - T @ Y
    return float(np.sum(diff * diff))


def le_embed(g: Graph, d, tol=1e-8, max_iter=1000, seed=0):
    """Laplacian eigenmaps: ``Y = D^-1/2 u_k`` for eigenvectors 2..d+1 of ``L_norm``."""
    _require_undirected(g, "Laplacian eigenmaps")
    n = g.n
    if not 1 <= d < n - 1:
        raise ValueError(f"need 1 <= d < n - 1 (d={d}, n={n})")
    deg = g.weighted_degree()
    if np.any(deg <= 0):
        raise ValueError(f"node {int(np.flatnonzero(deg <= 0)[0])} has zero degree")
    notes = []
    ncomp = _component_count(g)
    if ncomp > 1:
        msg = f"graph has {ncomp} components; {ncomp - 1} extra near-zero eigenvectors kept"
        warnings.warn(msg, DisconnectedGraphWarning, stacklevel=2)
        notes.append(msg)
    Ln = laplacian(g, normalized=True)
    eig = symmetric_eigs(Ln, d + 1, which="smallest", tol=tol, max_iter=max_iter, seed=seed)
    U = eig.eigenvectors[:, 1:]
    Y = U / np.sqrt(deg)[:, None]
    return Embedding(Y, "le", {"d": d}, warnings=notes,
                     model={"eigenvalues": eig.eigenvalues[1:]})


def katz_matrix(g: Graph, beta=None, tol=1e-12, max_nodes=20000, max_terms=100000):
    """Truncated Katz series ``sum_{k>=1} beta^k W^k``.

    Terms are added until the newest one's max-abs entry drops to ``tol``.
    ``beta`` defaults to ``0.5 / rho(W)``.
    """
    n = g.n
    if n > max_nodes:
        raise ValueError(f"dense Katz matrix capped at {max_nodes} nodes (got {n})")
    W = g.adjacency_matrix()
    rho = power_iteration_radius(W)
    if beta is None:
        beta = 0.5 / rho if rho > 0 else 0.0
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    # rho is an upper bound within ~1e-10, so treat the boundary itself as divergent
    if beta * rho >= 1 - 1e-9:
        raise ValueError(f"beta={beta:g} diverges: beta * rho(W) = {beta * rho:.4g} >= 1")
    S = np.zeros((n, n))
    terms = 0
    if beta > 0 and W.nnz:
        term = beta * W.toarray()
        S += term
        terms = 1
        while np.abs(term).max() > tol:
            if terms >= max_terms:
                raise RuntimeError(f"Katz series not converged after {max_terms} terms")
            term = beta * (W @ term)
            S += term
            terms += 1
    return ProximityMatrix(S, "katz", {"beta": float(beta), "rho": rho, "terms": terms})


def common_neighbors_matrix(g: Graph):
    _require_undirected(g, "common neighbors")
    W = g.adjacency_matrix()
    S = (W @ W).toarray()
    np.fill_diagonal(S, 0.0)
    return ProximityMatrix(S, "common_neighbors")


def adamic_adar_matrix(g: Graph):
    _require_undirected(g, "Adamic-Adar")
    A = g.adjacency_matrix()
    A.data[:] = 1.0
    deg = np.asarray(A.sum(axis=1)).ravel()
    with np.errstate(divide="ignore"):
        inv_log = np.where(deg >= 2, 1.0 / np.log(np.maximum(deg, 2)), AA_DEGREE_ONE_WEIGHT)
    S = (A @ sp.diags(inv_log) @ A).toarray()
    np.fill_diagonal(S, 0.0)
    return ProximityMatrix(S, "adamic_adar")


PROXIMITIES = {
    "katz": katz_matrix,
    "common_neighbors": common_neighbors_matrix,
    "cn": common_neighbors_matrix,
    "adamic_adar": adamic_adar_matrix,
    "aa": adamic_adar_matrix,
}


def hope_embed(g: Graph, d, prox: ProximityMatrix | None = None, beta=None, tol=1e-8, seed=0):
    """Factor ``S ~ Y_s Y_t^T`` from the top-d singular triplets of ``S``."""
    if prox is None:
        prox = katz_matrix(g, beta=beta)
    S = prox.S
    if not 1 <= d <= min(S.shape):
        raise ValueError(f"need 1 <= d <= n (d={d})")
    svd = truncated_svd(S, d, tol=tol, seed=seed)
    root = np.sqrt(svd.singular_values)
    Ys, Yt = svd.U * root, svd.V * root
    params = {"d": d, "proximity": prox.kind, **prox.params}
    return Embedding(Ys.copy(), "hope", params, Y_s=Ys, Y_t=Yt,
                     model={"singular_values": svd.singular_values})
