"""Subspace correction for the block-diagonal, rank-d (pseudo-dual) problem.

Alternates a global rank allocation over per-piece truncated SVDs with
nearest-subspace relabeling. Each round cannot increase

    sum_k ||X_{J_k} - G_k G_k^T X_{J_k}||_F^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import InvalidInputError
from .theory import Partition

TIE_TOL = 1e-24


class InvalidPriorError(ValueError):
    """Raised when the rank budget exceeds the available spectrum."""


@dataclass
class Allocation:
    dk: np.ndarray
    bases: list
    right: list
    objective: float


@dataclass
class DualResult:
    J: Partition
    C: np.ndarray
    blocks: list
    dk: np.ndarray
    objectives: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    @property
    def has_empty(self) -> bool:
        return bool(np.any(self.J.sizes() == 0))


def allocate_ranks(X, J: Partition, d: int) -> Allocation:
    """Keep the d largest singular values over all pieces.

    Ties are broken by (piece index, position within the piece spectrum).
    """
    X = np.asarray(X, dtype=float)
    m = X.shape[0]
    facs, entries = [], []
    for k, p in enumerate(J.pieces):
        if p.size == 0:
            facs.append(None)
            continue
        U, s, Vt = np.linalg.svd(X[:, p], full_matrices=False)
        facs.append((U, s, Vt))
        entries.extend((-float(v), k, i) for i, v in enumerate(s))
    avail = sum(min(p.size, m) for p in J.pieces)
    if not 0 <= d <= avail:
        raise InvalidPriorError(f"d={d} exceeds the available spectrum {avail}")
    entries.sort()
    dk = np.zeros(J.K, dtype=int)
    for _, k, _ in entries[:d]:
        dk[k] += 1
    bases, right = [], []
    obj = 0.0
    for k, f in enumerate(facs):
        if f is None:
            bases.append(np.zeros((m, 0)))
            right.append(np.zeros((0, 0)))
            continue
        U, s, Vt = f
        bases.append(U[:, : dk[k]])
        right.append(Vt[: dk[k]].T)
        obj += float(np.sum(s[dk[k]:] ** 2))
    return Allocation(dk, bases, right, obj)


def subspace_residuals(X, bases) -> np.ndarray:
    """Squared residual of every sample against every basis, shape (K, n)."""
    X = np.asarray(X, dtype=float)
    sq = (X * X).sum(0)
    R = np.empty((len(bases), X.shape[1]))
    for k, G in enumerate(bases):
        R[k] = sq if G.shape[1] == 0 else sq - ((G.T @ X) ** 2).sum(0)
    return np.maximum(R, 0.0)


def relabel_nearest(X, bases, tie_tol: float = TIE_TOL) -> Partition:
    """Assign each sample to its nearest subspace, ties to the lowest index.

    Residuals within ``tie_tol * ||x||^2`` of the minimum count as ties.
    """
    if not any(G.shape[1] for G in bases):
        raise InvalidInputError("at least one basis must be nonempty")
    X = np.asarray(X, dtype=float)
    R = subspace_residuals(X, bases)
    sq = (X * X).sum(0)
    lo = R.min(axis=0)
    within = R <= lo + tie_tol * sq
    labels = np.argmax(within, axis=0)
    return Partition.from_labels(labels + 1, len(bases))


def _assemble(J: Partition, alloc: Allocation):
    n = J.n
    C = np.zeros((n, n))
    blocks = []
    for p, Q in zip(J.pieces, alloc.right):
        if p.size == 0:
            blocks.append(np.zeros((0, 0)))
            continue
        B = Q @ Q.T
        blocks.append(B)
        C[np.ix_(p, p)] = B
    return C, blocks


def _budget(J: Partition, d: int, m: int) -> int:
    # a merged piece may hold less spectrum than d; the excess has nothing to pick
    return min(d, sum(min(p.size, m) for p in J.pieces))


def subspace_correction(X, J0: Partition, d: int, s_max: int = 50) -> DualResult:
    """Alternate rank allocation and relabeling until the partition is fixed.

    Returns a DualResult whose ``objectives`` lists the objective after each
    allocation; ``C`` holds the blocks ``Q_k Q_k^T`` placed on ``J``. When
    relabeling empties pieces so that fewer than d singular values remain,
    the budget is capped at the available count.
    """
    X = np.asarray(X, dtype=float)
    if all(p.size == 0 for p in J0.pieces):
        raise InvalidInputError("all pieces are empty")
    if J0.pure_piece is not None:
        raise InvalidInputError("subspace correction expects no pure piece")
    m = X.shape[0]
    J = J0
    objectives = []
    converged = False
    it = 0
    alloc = None
    for it in range(1, s_max + 1):
        alloc = allocate_ranks(X, J, _budget(J, d, m))
        objectives.append(alloc.objective)
        J_new = relabel_nearest(X, alloc.bases)
        if J_new == J:
            converged = True
            break
        J = J_new
    if not converged:
        alloc = allocate_ranks(X, J, _budget(J, d, m))
        objectives.append(alloc.objective)
    C, blocks = _assemble(J, alloc)
    return DualResult(J, C, blocks, alloc.dk, objectives, it, converged)
