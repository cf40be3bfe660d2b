"""Matrix kernels: sparse products, a restarted block Lanczos eigensolver,
truncated SVD through the Gram operator, and a finite-difference checker."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator


class ConvergenceError(RuntimeError):
    """Iterative solver stopped at ``max_iter``; ``result`` holds the best iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DivergenceError(RuntimeError):
    """Training loss blew up; lower the learning rate."""


@dataclass
class EigResult:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # n x k
    residuals: np.ndarray
    iterations: int = 0


@dataclass
class SvdResult:
    U: np.ndarray
    singular_values: np.ndarray  # descending
    V: np.ndarray
    residuals: np.ndarray | None = None


def spmv(A, x):
    """Sparse (or dense) matrix-vector product with a dimension check."""
    x = np.asarray(x, dtype=np.float64)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return np.asarray(A @ x)


def fix_signs(vectors):
    """Flip columns so each one's largest-magnitude entry is positive."""
    vectors = np.array(vectors, dtype=np.float64, copy=True)
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _check_symmetric(A, n, rng):
    if isinstance(A, LinearOperator):
        x, y = rng.standard_normal(n), rng.standard_normal(n)
        lhs, rhs = x @ A.matvec(y), y @ A.matvec(x)
        scale = np.linalg.norm(A.matvec(x)) * np.linalg.norm(y) + 1e-300
        if abs(lhs - rhs) > 1e-10 * scale:
            raise ValueError("operator is not symmetric")
        return
    if sp.issparse(A):
        diff = abs(A - A.T)
        bad = diff.max() if diff.nnz else 0.0
        scale = abs(A).max() if A.nnz else 0.0
    else:
        # sampled entries keep this O(n) for large dense inputs
        rows = rng.integers(0, n, size=min(n * n, 4096))
        cols = rng.integers(0, n, size=len(rows))
        bad = np.max(np.abs(A[rows, cols] - A[cols, rows]))
        scale = np.max(np.abs(A))
    if bad > 1e-12 * max(scale, 1.0):
        raise ValueError("matrix is not symmetric")


def _norm_estimate(op, rng, steps=30):
    """Power-iteration estimate of ``||A||_2`` for operators without explicit entries."""
    x = rng.standard_normal(op.shape[1])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(steps):
        y = op.matvec(x)
        est = np.linalg.norm(y)
        if est == 0.0:
            break
        x = y / est
    return float(est)


def _orth_against(Z, V, drop_tol=1e-10):
    """Orthonormalize columns of ``Z`` against ``V`` (two passes) and each other."""
    if Z.shape[1] == 0:
        return Z
    norms = np.linalg.norm(Z, axis=0)
    Z = Z / np.where(norms > 0, norms, 1.0)
    for _ in range(2):
        if V.shape[1]:
            Z = Z - V @ (V.T @ Z)
    U, s, _ = np.linalg.svd(Z, full_matrices=False)
    U = U[:, s > drop_tol]
    if V.shape[1] and U.shape[1]:
        U = U - V @ (V.T @ U)
        U, _ = np.linalg.qr(U)
    return U


def symmetric_eigs(A, k, which="smallest", tol=1e-8, max_iter=1000, seed=0, block_size=None,
                   max_basis=None, check_symmetry=True):
    """Extreme eigenpairs of a symmetric matrix or operator.

    Block Lanczos-type expansion with full reorthogonalization and thick
    restarts: each step appends the orthogonalized residual block of the
    unconverged wanted Ritz pairs, then does Rayleigh-Ritz on the whole basis.
    A pair is converged when ``||A v - lam v|| <= tol * ||A||_1``.
    """
    if which not in ("smallest", "largest"):
        raise ValueError("which must be 'smallest' or 'largest'")
    explicit = not isinstance(A, LinearOperator)
    if explicit and sp.issparse(A):
        A = sp.csr_matrix(A, dtype=np.float64)
    elif explicit:
        A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n (k={k}, n={n})")
    rng = np.random.default_rng(seed)
    if check_symmetry:
        _check_symmetric(A, n, rng)
    op = aslinearoperator(A)
    if explicit and sp.issparse(A):
        anorm = float(abs(A).sum(axis=0).max()) if A.nnz else 0.0
    elif explicit:
        anorm = float(np.abs(A).sum(axis=0).max())
    else:
        anorm = _norm_estimate(op, rng)
    threshold = tol * max(anorm, np.finfo(float).tiny)

    b = block_size or min(n, k + 2)
    m_max = max_basis or max(3 * (k + b), 40)
    m_max = min(n, max(m_max, k + 2 * b))

    V = _orth_against(rng.standard_normal((n, b)), np.empty((n, 0)))
    W = op.matmat(V)
    sign = 1.0 if which == "largest" else -1.0
    it = 0
    while True:
        it += 1
        H = V.T @ W
        H = 0.5 * (H + H.T)
        theta, S = np.linalg.eigh(H)
        order = np.argsort(-sign * theta, kind="stable")
        theta, S = theta[order], S[:, order]
        kk = min(k, len(theta))
        X = V @ S[:, :kk]
        R = W @ S[:, :kk] - X * theta[:kk]
        res = np.linalg.norm(R, axis=0)
        done = kk == k and np.all(res <= threshold)
        if done or it >= max_iter:
            vals, vecs = theta[:kk], X
            asc = np.argsort(vals, kind="stable")
            result = EigResult(vals[asc], fix_signs(vecs[:, asc]), res[asc], it)
            if done:
                return result
            raise ConvergenceError(
                f"eigensolver did not converge in {max_iter} iterations "
                f"(max residual {res.max():.3e}, threshold {threshold:.3e})",
                result,
            )
        active = np.flatnonzero(res > threshold)[:b]
        Z = R[:, active]
        if V.shape[1] + Z.shape[1] > m_max:
            keep = min(V.shape[1], max(k, m_max - b))
            V = V @ S[:, :keep]
            W = W @ S[:, :keep]
            # restore exact orthonormality after the restart
            Q, Rq = np.linalg.qr(V)
            V, W = Q, np.linalg.solve(Rq.T, W.T).T
        Z = _orth_against(Z, V)
        if Z.shape[1] < len(active):
            # Krylov space exhausted for some directions: inject fresh random ones
            extra = _orth_against(rng.standard_normal((n, len(active) - Z.shape[1])), np.hstack([V, Z]))
            Z = np.hstack([Z, extra])
        if Z.shape[1] == 0:
            continue
        V = np.hstack([V, Z])
        W = np.hstack([W, op.matmat(Z)])


def power_iteration_radius(A, tol=1e-10, max_iter=10000):
    """Upper bound on the spectral radius of a nonnegative matrix.

    Power iteration on ``A + I`` from a positive vector; the Collatz-Wielandt
    ratio ``max_i ((A + I) x)_i / x_i - 1`` bounds ``rho(A)`` from above.
    """
    op = aslinearoperator(A)
    n = A.shape[0]
    x = np.ones(n) / np.sqrt(n)
    upper = np.inf
    for _ in range(max_iter):
        y = op.matvec(x) + x
        # components that decayed to zero grow slower than the dominant one
        pos = x > 0
        ratios = y[pos] / x[pos]
        lower, upper = ratios.min() - 1.0, ratios.max() - 1.0
        if upper - lower <= tol * max(upper, 1e-300):
            break
        x = y / np.linalg.norm(y)
    return max(float(upper), 0.0)


def truncated_svd(A, d, tol=1e-8, max_iter=1000, seed=0):
    """Top-``d`` singular triplets via the Gram operator ``A^T A``.

    The converged right subspace is refined with a small dense SVD of ``A V``
    so that ``U`` and ``V`` are orthonormal to working precision.
    """
    op = aslinearoperator(A)
    rows, cols = op.shape
    if not 1 <= d <= min(rows, cols):
        raise ValueError(f"need 1 <= d <= min(shape) (d={d}, shape={op.shape})")
    if d == cols or cols <= max(2 * d + 2, 8):
        # Gram eigensolver needs k < n: small problems go through the dense route
        dense = op.matmat(np.eye(cols))
        Vr = np.eye(cols)
    else:
        gram = LinearOperator((cols, cols), matvec=lambda x: op.rmatvec(op.matvec(x)),
                              matmat=lambda X: op.rmatmat(op.matmat(X)), dtype=np.float64)
        try:
            eig = symmetric_eigs(gram, d, which="largest", tol=tol, max_iter=max_iter, seed=seed,
                                 block_size=min(cols, d + 2), check_symmetry=False)
        except ConvergenceError as exc:
            raise ConvergenceError(f"truncated_svd: {exc}", exc.result) from None
        Vr = eig.eigenvectors
        dense = op.matmat(Vr)
    Q, Rq = np.linalg.qr(dense)
    P, s, Qt = np.linalg.svd(Rq)
    U = (Q @ P)[:, :d]
    V = (Vr @ Qt.T)[:, :d]
    s = s[:d]
    # orient each triplet so V's largest-magnitude entry is positive
    flip = np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(d)])
    flip[flip == 0] = 1.0
    U, V = U * flip, V * flip
    resid = np.linalg.norm(op.matmat(V) - U * s, axis=0)
    return SvdResult(U, s, V, resid)


def grad_check(f, g, x, eps=1e-5):
    """Max over coordinates of ``|central difference - analytic| / max(1, |analytic|)``."""
    x = np.array(x, dtype=np.float64, copy=True)
    analytic = np.asarray(g(x), dtype=np.float64).ravel()
    flat = x.ravel()
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f(x)
        flat[i] = orig - eps
        fm = f(x)
        flat[i] = orig
        numeric = (fp - fm) / (2 * eps)
        err = abs(numeric - analytic[i]) / max(1.0, abs(analytic[i]))
        worst = max(worst, err)
    return worst
