"""Independent reference computations used by the tests.

These avoid the package's own code paths: exact rational elimination for
ranks, brute-force permutation search for partition errors, dense
eigensolves for Laplacian spectra, and finite differences for gradients.
"""

from fractions import Fraction
from itertools import combinations, permutations, product

import numpy as np
from scipy.sparse.csgraph import laplacian


def exact_rank(X, digits=12):
    """Rank by fraction-exact Gaussian elimination on rounded entries."""
    rows = [[Fraction(round(float(v), digits)).limit_denominator(10**digits) for v in r]
            for r in np.asarray(X)]
    m = len(rows)
    n = len(rows[0]) if m else 0
    rank, col = 0, 0
    while rank < m and col < n:
        piv = next((i for i in range(rank, m) if rows[i][col] != 0), None)
        if piv is None:
            col += 1
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for i in range(m):
            if i != rank and rows[i][col] != 0:
                f = rows[i][col] / rows[rank][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[rank])]
        rank += 1
        col += 1
    return rank


def integer_rank(M):
    """Exact rank of an integer matrix."""
    return exact_rank(np.asarray(M, dtype=float), digits=0)


def brute_err_parti(labels, truth):
    """Minimum misassignment rate over all label permutations."""
    labels, truth = np.asarray(labels), np.asarray(truth)
    ks = sorted(set(labels.tolist()) | set(truth.tolist()))
    best = len(labels)
    for perm in permutations(ks):
        mp = dict(zip(ks, perm))
        best = min(best, int(np.sum([mp[a] != b for a, b in zip(labels, truth)])))
    return best / len(labels)


def laplacian_gap(C, K):
    A = (np.abs(C) + np.abs(C).T) / 2
    deg = A.sum(1)
    L = laplacian(A, normed=True)
    L[deg == 0] = 0
    L[deg == 0, deg == 0] = 1.0
    w = np.sort(np.linalg.eigvalsh((L + L.T) / 2))
    w = np.clip(w, 0, None)
    if w[K] == 0:
        return 0.0
    return (w[K] - w[K - 1]) / w[K]


def all_subsets_full_rank(X, tol=1e-9):
    """Every subset of size min(rank, n) has full column rank (SVD per subset)."""
    X = np.asarray(X, float)
    r = np.linalg.matrix_rank(X, tol=tol * max(np.linalg.norm(X, 2), 1e-300))
    n = X.shape[1]
    for S in combinations(range(n), min(r, n)):
        Y = X[:, S]
        Y = Y / np.linalg.norm(Y, axis=0)
        s = np.linalg.svd(Y, compute_uv=False)
        if s[-1] <= 1e-8 * s[0]:
            return False
    return True


def intersection_dim(A, B, tol=1e-8):
    """dim(span A ∩ span B) from the eigenvalues of P_A P_B P_A equal to 1."""
    def proj(M):
        U, s, _ = np.linalg.svd(M, full_matrices=False)
        U = U[:, s > tol * s[0]]
        return U @ U.T
    PA, PB = proj(A), proj(B)
    w = np.linalg.eigvalsh(PA @ PB @ PA)
    return int(np.sum(w > 1 - 1e-6))


def fd_directional(f, W, D, h=1e-6):
    return (f(W + h * D) - f(W - h * D)) / (2 * h)


def best_psd_rank_d(S, d):
    """Minimizer of ||S - M||_F over PSD M with rank <= d, by checking every
    choice of d eigenpairs with clipped eigenvalues."""
    w, P = np.linalg.eigh((S + S.T) / 2)
    best, val = None, np.inf
    for idx in combinations(range(len(w)), d):
        lam = np.clip(w[list(idx)], 0, None)
        M = (P[:, idx] * lam) @ P[:, idx].T
        e = np.linalg.norm(S - M)
        if e < val - 1e-12:
            best, val = M, e
    return best


def brute_kmeans_2(points):
    """Exhaustive optimum of the 2-means within-cluster sum of squares."""
    n = len(points)
    best = np.inf
    for mask in product([0, 1], repeat=n - 1):
        lab = np.array((0,) + mask)
        if lab.min() == lab.max():
            continue
        w = sum(((points[lab == k] - points[lab == k].mean(0)) ** 2).sum() for k in (0, 1))
        best = min(best, w)
    return best
