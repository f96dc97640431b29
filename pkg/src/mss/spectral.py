"""Normalized spectral embedding, seeded k-means and active-set construction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import InvalidInputError
from .theory import Partition

DEGREE_FLOOR = 1e-12


@dataclass
class ActiveSet:
    """Weights of the penalized positions; the diagonal is always zero."""

    weights: np.ndarray
    kind: str = "coarse"

    def __post_init__(self):
        W = np.array(self.weights, dtype=float)
        if not np.all(np.isfinite(W)) or np.any(W < 0):
            raise InvalidInputError("active-set weights must be finite and nonnegative")
        np.fill_diagonal(W, 0.0)
        self.weights = W

    def same(self, other: "ActiveSet") -> bool:
        return np.array_equal(self.weights, other.weights)


def coarse_active_set(n: int) -> ActiveSet:
    """Every off-diagonal position penalized."""
    return ActiveSet(1.0 - np.eye(n), "coarse")


def normalized_embedding(A, K: int) -> np.ndarray:
    """Unit rows of the top-K eigenvectors of ``D^{-1/2} A D^{-1/2}``.

    Each eigenvector's sign is fixed so its largest-magnitude entry is
    positive. Degrees below 1e-12 are floored.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if K > n or K < 1:
        raise InvalidInputError("need 1 <= K <= n")
    A = (A + A.T) / 2
    deg = np.maximum(A.sum(axis=1), DEGREE_FLOOR)
    s = 1.0 / np.sqrt(deg)
    M = s[:, None] * A * s[None, :]
    w, Vec = np.linalg.eigh((M + M.T) / 2)
    Y = Vec[:, ::-1][:, :K].copy()
    idx = np.argmax(np.abs(Y), axis=0)
    Y *= np.sign(Y[idx, np.arange(K)])
    nrm = np.linalg.norm(Y, axis=1)
    nrm[nrm == 0] = 1.0
    return Y / nrm[:, None]


def _sqdist(X, C):
    d = (X * X).sum(1)[:, None] - 2 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _farthest_seeds(X, K, first):
    idx = [first]
    dmin = ((X - X[first]) ** 2).sum(1)
    for _ in range(1, K):
        j = int(np.argmax(dmin))
        idx.append(j)
        dmin = np.minimum(dmin, ((X - X[j]) ** 2).sum(1))
    return X[idx].copy()


def _lloyd(X, C, max_iter):
    labels = None
    for _ in range(max_iter):
        D = _sqdist(X, C)
        new = np.argmin(D, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for k in range(C.shape[0]):
            members = labels == k
            if members.any():
                C[k] = X[members].mean(0)
            else:
                # refill an empty cluster with the worst-fit point
                far = int(np.argmax(D[np.arange(X.shape[0]), labels]))
                C[k] = X[far]
                labels[far] = k
    D = _sqdist(X, C)
    labels = np.argmin(D, axis=1)
    wcss = float(D[np.arange(X.shape[0]), labels].sum())
    return labels, C, wcss


def kmeans(points, K: int, restarts: int = 20, seed=0, max_iter: int = 300):
    """Lloyd's algorithm, best of ``restarts`` farthest-point seedings.

    Returns
    -------
    labels : ndarray of int in ``0..K-1``
    centroids : ndarray (K, dim)
    """
    X = np.asarray(points, dtype=float)
    n = X.shape[0]
    if not 1 <= K <= n:
        raise InvalidInputError("need 1 <= K <= number of points")
    rng = np.random.default_rng(seed)
    firsts = rng.choice(n, size=min(restarts, n), replace=False)
    best = None
    for f in firsts:
        labels, C, wcss = _lloyd(X, _farthest_seeds(X, K, int(f)), max_iter)
        if best is None or wcss < best[2] - 1e-12 * max(1.0, abs(best[2])):
            best = (labels, C, wcss)
    return best[0], best[1]


def soft_memberships(Y, centroids, tau: float = 0.5) -> np.ndarray:
    """Normalized step-function memberships from rescaled centroid distances.

    ``qt_il = (dist_il - min_l dist_il) / (max_l dist_il - min_l dist_il)``,
    0 for every l when the distances are all equal; ``psi(t) = [t < tau]``.
    """
    D = np.sqrt(_sqdist(np.asarray(Y, float), np.asarray(centroids, float)))
    lo = D.min(axis=1, keepdims=True)
    span = D.max(axis=1, keepdims=True) - lo
    with np.errstate(invalid="ignore", divide="ignore"):
        qt = np.where(span > 0, (D - lo) / np.where(span > 0, span, 1.0), 0.0)
    psi = (qt < tau).astype(float)
    return psi / psi.sum(axis=1, keepdims=True)


def active_set_from_memberships(Q) -> np.ndarray:
    """``omega_ij = 1`` iff ``sum_l q_il q_jl < 1``; zero diagonal."""
    S = Q @ Q.T
    Om = (S < 1.0 - 1e-12).astype(float)
    np.fill_diagonal(Om, 0.0)
    return Om


def build_active_set(A, K: int, tau: float = 0.5, seed=0):
    """Spectral clustering of A plus the soft active set.

    Returns ``(ActiveSet, Partition)``.
    """
    if not 0 < tau < 1:
        raise InvalidInputError("tau must lie in (0, 1)")
    Y = normalized_embedding(A, K)
    labels, C = kmeans(Y, K, seed=seed)
    Q = soft_memberships(Y, C, tau)
    J = Partition.from_labels(labels + 1, K)
    return ActiveSet(active_set_from_memberships(Q), "soft"), J


def spectral_partition(A, K: int, seed=0) -> Partition:
    Y = normalized_embedding(A, K)
    labels, _ = kmeans(Y, K, seed=seed)
    return Partition.from_labels(labels + 1, K)
