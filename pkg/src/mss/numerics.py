"""Dense linear-algebra helpers shared by the solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_TOL = 1e-8


class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's preconditions."""


class SingularManifoldError(ArithmeticError):
    """Raised when a factor matrix loses full column rank."""


@dataclass(frozen=True)
class ThinSvd:
    """Thin SVD ``X = U diag(sigma) V^T`` plus an orthonormal complement of V."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    Vperp: np.ndarray

    @property
    def r(self) -> int:
        return self.sigma.shape[0]

    @property
    def n(self) -> int:
        return self.V.shape[0]

    def lrr(self) -> np.ndarray:
        """The minimum nuclear norm representation ``V V^T``."""
        return self.V @ self.V.T


def _check_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.size == 0:
        raise InvalidInputError("expected a nonempty 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("matrix has non-finite entries")
    return X


def thin_svd(X, tol_rel: float = RANK_TOL) -> ThinSvd:
    """Thin SVD keeping singular values above ``tol_rel * sigma_max``.

    ``Vperp`` completes ``V`` to an orthogonal basis of R^n; its columns come
    from the trailing right singular vectors of the full decomposition, so the
    result is deterministic for a given input.
    """
    X = _check_matrix(X)
    if not 0 < tol_rel < 1:
        raise InvalidInputError("tol_rel must lie in (0, 1)")
    m, n = X.shape
    U_full, s, Vt = np.linalg.svd(X, full_matrices=True)
    smax = s[0] if s.size else 0.0
    r = int(np.sum(s > tol_rel * smax)) if smax > 0 else 0
    return ThinSvd(U=U_full[:, :r], sigma=s[:r].copy(), V=Vt[:r].T.copy(),
                   Vperp=Vt[r:].T.copy())


def numerical_rank(X, tol_rel: float = RANK_TOL) -> int:
    X = _check_matrix(X)
    s = np.linalg.svd(X, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol_rel * s[0]))


def rank_of_columns(X, cols, tol_rel: float = RANK_TOL) -> int:
    """Rank of a column subset; an empty subset has rank 0."""
    cols = np.asarray(cols, dtype=int)
    if cols.size == 0:
        return 0
    return numerical_rank(np.asarray(X)[:, cols], tol_rel)


def orth(X, tol_rel: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the column space (possibly with zero columns)."""
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return np.zeros((X.shape[0], 0))
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((X.shape[0], 0))
    return U[:, s > tol_rel * s[0]]


def truncated_svd(X, k: int):
    """Best rank-``k`` approximation factors ``(G, D, Q)`` with ``X ~ G D Q^T``.

    ``D`` is returned as a 1-D array of the ``k`` largest singular values.
    """
    X = _check_matrix(X)
    if not 1 <= k <= min(X.shape):
        raise InvalidInputError(f"k={k} outside [1, {min(X.shape)}]")
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    return U[:, :k], s[:k].copy(), Vt[:k].T.copy()


def top_eigs_symmetric(A, k: int):
    """The ``k`` algebraically largest eigenpairs of the symmetric part of A.

    Returns ``(P, lambdas)`` with eigenvalues in nonincreasing order.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError("expected a square matrix")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    n = A.shape[0]
    if not 0 <= k <= n:
        raise InvalidInputError(f"k={k} outside [0, {n}]")
    w, P = np.linalg.eigh((A + A.T) / 2)
    idx = np.arange(n - 1, n - 1 - k, -1)
    return P[:, idx], w[idx]


def project_out(basis: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Residual of ``x`` after orthogonal projection onto ``span(basis)``."""
    if basis.shape[1] == 0:
        return x.copy()
    return x - basis @ (basis.T @ x)
