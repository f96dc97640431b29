"""Evaluation functionals for a segmentation ``J`` and representation ``C``."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .numerics import InvalidInputError
from .theory import Partition


EIG_TOL = 1e-10


class DegenerateInputError(ValueError):
    """Raised when a metric is undefined for the given matrix."""


@dataclass
class MetricReport:
    err_parti: float
    bdiag_devi: float
    intra_b_conn: float
    kblock_diag: float

    def to_dict(self) -> dict:
        return asdict(self)


def err_parti(J: Partition, J_star: Partition) -> float:
    """Fraction of misassigned samples under the best piece matching.

    The matching is an optimal assignment on the overlap matrix; the shorter
    partition is padded with empty pieces. Pure pieces are treated as an
    extra piece on both sides.
    """
    if J.n != J_star.n:
        raise InvalidInputError("partitions cover different sample counts")
    a = list(J.pieces) + ([J.pure_piece] if J.pure_piece is not None else [])
    b = list(J_star.pieces) + ([J_star.pure_piece] if J_star.pure_piece is not None else [])
    ids_a = np.full(J.n, -1)
    ids_b = np.full(J.n, -1)
    for k, p in enumerate(a):
        ids_a[p] = k
    for k, p in enumerate(b):
        ids_b[p] = k
    K = max(len(a), len(b))
    overlap = np.zeros((K, K))
    np.add.at(overlap, (ids_a, ids_b), 1)
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    return float((J.n - overlap[rows, cols].sum()) / J.n)


def bdiag_devi(C, J_star: Partition) -> float:
    """Off-block l1 mass relative to the off-diagonal l1 mass."""
    C = np.abs(np.asarray(C, dtype=float))
    off_diag = C.sum() - np.trace(C)
    off_blk = C[~J_star.same_block()].sum()
    if off_diag <= 0:
        if off_blk == 0 and C.sum() == 0:
            return 0.0
        raise DegenerateInputError("C has no off-diagonal mass")
    return float(off_blk / off_diag)


def intra_b_conn(C, J_star: Partition) -> float:
    """One minus the Gini index of the within-block entries."""
    C = np.abs(np.asarray(C, dtype=float))
    vals = np.concatenate([C[np.ix_(p, p)].ravel() for p in J_star.pieces if p.size])
    total = vals.sum()
    if total == 0:
        raise DegenerateInputError("all diagonal blocks are zero")
    M = vals.size
    srt = np.sort(vals, kind="stable")
    ell = np.arange(1, M + 1)
    return float(np.sum(srt / total * (2 * (M - ell) + 1) / M))


def normalized_laplacian(C) -> np.ndarray:
    """``I - D^{-1/2} A D^{-1/2}`` with ``A = (|C| + |C|^T)/2``.

    Zero-degree nodes are isolated: their rows and columns equal e_i.
    """
    A = np.abs(np.asarray(C, dtype=float))
    A = (A + A.T) / 2
    deg = A.sum(axis=1)
    inv = np.zeros_like(deg)
    pos = deg > 0
    inv[pos] = 1.0 / np.sqrt(deg[pos])
    L = np.eye(A.shape[0]) - inv[:, None] * A * inv[None, :]
    return (L + L.T) / 2


def kblock_diag(C, K: int) -> float:
    """Relative gap ``(lam_{K+1} - lam_K) / lam_{K+1}`` of the normalized Laplacian.

    Eigenvalues below ``EIG_TOL`` count as zero, so K + 1 or more connected
    components give 0 and exactly K give 1.
    """
    n = np.asarray(C).shape[0]
    if not 1 <= K < n:
        raise InvalidInputError("need 1 <= K < n")
    lam = np.linalg.eigvalsh(normalized_laplacian(C))
    lam = np.where(lam < EIG_TOL, 0.0, lam)
    lk, lk1 = lam[K - 1], lam[K]
    if lk1 <= 0:
        return 0.0
    return float(min(max((lk1 - lk) / lk1, 0.0), 1.0))


def metric_report(C, J: Partition, J_star: Partition, K: int | None = None) -> MetricReport:
    K = J_star.K if K is None else K
    return MetricReport(err_parti(J, J_star), bdiag_devi(C, J_star),
                        intra_b_conn(C, J_star), kblock_diag(C, K))
