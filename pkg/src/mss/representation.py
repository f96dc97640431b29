"""Closed-form self-expressive representations ``X = XC``.

Every representation of X has the form ``C = VV^T + V_perp H`` where
``X = U S V^T`` is the thin SVD. Symmetric ones use ``H = S V_perp^T``; the
minimum-norm one (LRR) is ``VV^T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .numerics import RANK_TOL, InvalidInputError, ThinSvd, numerical_rank, thin_svd
from .theory import Partition


@dataclass
class Representation:
    """Representation matrix with structural metadata."""

    C: np.ndarray
    symmetric: bool = False
    factor_W: np.ndarray | None = None

    def residual(self, X) -> float:
        """Relative self-expression residual ``||X - XC|| / ||X||``."""
        X = np.asarray(X, dtype=float)
        nx = np.linalg.norm(X)
        return float(np.linalg.norm(X - X @ self.C) / nx) if nx else 0.0


def representation_from_H(svd: ThinSvd, H) -> Representation:
    """``C = VV^T + V_perp H`` for an ``(n - r) x n`` matrix H."""
    H = np.asarray(H, dtype=float)
    n, r = svd.n, svd.r
    if H.shape != (n - r, n):
        raise InvalidInputError(f"H must have shape {(n - r, n)}, got {H.shape}")
    return Representation(svd.lrr() + svd.Vperp @ H)


def representation_symmetric(svd: ThinSvd, S, tol: float = 1e-10) -> Representation:
    """``C = VV^T + V_perp S V_perp^T`` for symmetric S."""
    S = np.asarray(S, dtype=float)
    k = svd.n - svd.r
    if S.shape != (k, k):
        raise InvalidInputError(f"S must have shape {(k, k)}")
    if np.linalg.norm(S - S.T) > tol * max(np.linalg.norm(S), 1.0):
        raise InvalidInputError("S is not symmetric")
    S = (S + S.T) / 2
    C = svd.lrr() + svd.Vperp @ S @ svd.Vperp.T
    return Representation((C + C.T) / 2, symmetric=True)


def representation_from_factor(svd: ThinSvd, W) -> Representation:
    """Symmetric representation with ``S = W W^T``."""
    W = np.asarray(W, dtype=float)
    B = svd.Vperp @ W
    C = svd.lrr() + B @ B.T
    return Representation((C + C.T) / 2, symmetric=True, factor_W=W)


def lrr(X, tol_rel: float = RANK_TOL) -> np.ndarray:
    """Low-rank representation solution ``VV^T``."""
    return thin_svd(X, tol_rel).lrr()


def make_unconnected_block(Xk, r_prime: int, tol_rel: float = RANK_TOL) -> Representation:
    """Block-diagonal representation of X_k with rank ``r_prime`` and a cut.

    With ``d_k = r(X_k)`` write ``r' = p d_k + t`` (``0 <= t < d_k``). The
    last ``t`` columns get an identity block; the remaining columns are split
    contiguously into ``p`` groups and each group gets its own LRR block.
    For nondegenerate X_k each group has rank ``d_k``.
    """
    Xk = np.asarray(Xk, dtype=float)
    nk = Xk.shape[1]
    dk = numerical_rank(Xk, tol_rel)
    if not dk < r_prime <= nk:
        raise InvalidInputError(f"r_prime must lie in ({dk}, {nk}]")
    p, t = divmod(r_prime, dk)
    C = np.zeros((nk, nk))
    head = nk - t
    for g in np.array_split(np.arange(head), p):
        C[np.ix_(g, g)] = lrr(Xk[:, g], tol_rel)
    tail = np.arange(head, nk)
    C[tail, tail] = 1.0
    return Representation(C, symmetric=True)


def make_unconnected_representation(X, P: Partition, d_plus: int,
                                    tol_rel: float = RANK_TOL) -> Representation:
    """Block-diagonal representation of rank ``d_plus`` with a split block.

    The excess ``d_plus - d`` is assigned to pieces in order, each piece
    taking as much as its size allows. A pure piece gets an identity block.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    ranks = [numerical_rank(X[:, p], tol_rel) for p in P.pieces]
    npure = 0 if P.pure_piece is None else P.pure_piece.size
    d = sum(ranks) + npure
    if not d < d_plus <= n:
        raise InvalidInputError(f"d_plus must lie in ({d}, {n}]")
    extra = d_plus - d
    C = np.zeros((n, n))
    for p, dk in zip(P.pieces, ranks):
        add = min(extra, p.size - dk)
        extra -= add
        blk = (make_unconnected_block(X[:, p], dk + add, tol_rel).C if add
               else lrr(X[:, p], tol_rel))
        C[np.ix_(p, p)] = blk
    if npure:
        C[P.pure_piece, P.pure_piece] = 1.0
    return Representation(C, symmetric=True)


def off_block(C, P: Partition) -> np.ndarray:
    """Copy of C with the within-piece entries zeroed."""
    C = np.asarray(C, dtype=float)
    return np.where(P.same_block(), 0.0, C)


def is_block_diagonal(C, P: Partition, tol: float = 1e-8) -> bool:
    """Off-block entries at most ``tol * max|C|``."""
    C = np.asarray(C, dtype=float)
    cmax = np.abs(C).max() if C.size else 0.0
    return bool(np.abs(off_block(C, P)).max(initial=0.0) <= tol * cmax)


def block_connectivity(C, P: Partition, cutoff: float | None = None) -> list:
    """Connectivity of each diagonal block's graph ``|C_k| + |C_k|^T > cutoff``.

    The default cutoff is ``1e-6 * max|C|``. Empty pieces report False.
    """
    C = np.asarray(C, dtype=float)
    if cutoff is None:
        cutoff = 1e-6 * (np.abs(C).max() if C.size else 0.0)
    flags = []
    for p in P.pieces:
        if p.size == 0:
            flags.append(False)
            continue
        blk = np.abs(C[np.ix_(p, p)])
        adj = (blk + blk.T) > cutoff
        ncomp, _ = connected_components(adj, directed=False)
        flags.append(ncomp == 1)
    return flags
