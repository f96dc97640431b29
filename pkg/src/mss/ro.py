"""Relaxed optimization for noisy samples.

Minimizes

    F(C, Omega, G) = ||Omega ⊙ C||_1 + lam/2 ||diag C||^2 + alpha phi(X - XC)
                     + beta/2 ||C - G G^T||_F^2

by alternating an ADMM solve for C, a rank-d PSD projection for ``G G^T``
and a graph-based active-set update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .numerics import InvalidInputError, top_eigs_symmetric
from .spectral import build_active_set, coarse_active_set

PHIS = ("l1", "l21", "fro")
GRAPH_PRESETS = {"yaleb": (1.0, 0.0, 1.0), "hopkins": (0.8, 0.001, 4.0)}


class InvalidConfigError(ValueError):
    """Raised for unknown or inconsistent solver settings."""


class EmptyGraphError(ArithmeticError):
    """Raised when every singular value falls below the graph threshold."""


@dataclass
class RoParams:
    """Model weights, ADMM settings and loop caps.

    ``rho1``/``rho2`` default to ``max(lam, beta)``; ``tau_admm`` defaults to
    ``1e-4 (1 + ||X||_F)`` and ``eps_outer`` to ``1e-4 n``.
    """

    lam: float = 5.0
    alpha: float = 1.0
    beta: float = 5.0
    phi: str = "fro"
    rho1: float | None = None
    rho2: float | None = None
    tau_admm: float | None = None
    eps_outer: float | None = None
    t_max: int = 3
    ell_max: int = 10
    k_max: int = 200
    graph: tuple = GRAPH_PRESETS["hopkins"]
    tau: float = 0.5
    seed: int = 0
    normalize_columns: bool = False

    def __post_init__(self):
        if min(self.lam, self.alpha, self.beta) <= 0:
            raise InvalidConfigError("lam, alpha and beta must be positive")
        if self.phi not in PHIS:
            raise InvalidConfigError(f"phi must be one of {PHIS}")
        g, sg, s = self.graph
        if not 0 < g <= 1 or sg < 0 or s < 1:
            raise InvalidConfigError("graph needs gamma in (0,1], sigma >= 0, s >= 1")
        if min(self.t_max, self.ell_max, self.k_max) < 1:
            raise InvalidConfigError("loop caps must be positive")

    @property
    def r1(self) -> float:
        return self.rho1 if self.rho1 is not None else max(self.lam, self.beta)

    @property
    def r2(self) -> float:
        return self.rho2 if self.rho2 is not None else max(self.lam, self.beta)


def frobenius_preset(n: int, K: int, **kw) -> RoParams:
    """Weights proportional to n/K for squared-Frobenius errors."""
    s = n / K
    return RoParams(lam=10 * s, alpha=50 * s, beta=0.05 * s, phi="fro", **kw)


def l1_preset(X, **kw) -> RoParams:
    """Weights for entrywise-l1 errors."""
    X = np.asarray(X, dtype=float)
    return RoParams(lam=5.0, beta=5.0, alpha=20.0 / np.abs(X).sum(0).max(), phi="l1", **kw)


@dataclass
class AdmmState:
    C: np.ndarray
    Z: np.ndarray
    E: np.ndarray
    Y1: np.ndarray
    Y2: np.ndarray

    @classmethod
    def initial(cls, X) -> "AdmmState":
        m, n = np.shape(X)
        return cls(np.eye(n), np.eye(n), np.zeros((m, n)), np.zeros((n, n)), np.zeros((m, n)))


def shrink(B, A):
    """Entrywise ``sign(B) (|B| - A)_+``."""
    return np.sign(B) * np.maximum(np.abs(B) - A, 0.0)


def prox_C(Z, Y1, Omega, lam: float, rho1: float) -> np.ndarray:
    """Closed-form C-update: shrink ``rho1 Z - Y1`` by Omega, then rescale."""
    if rho1 <= 0:
        raise InvalidInputError("rho1 must be positive")
    C = shrink(rho1 * np.asarray(Z) - Y1, Omega) / rho1
    idx = np.diag_indices_from(C)
    C[idx] *= rho1 / (rho1 + lam)
    return C


def prox_E(XZ, Y2, X, alpha: float, rho2: float, phi: str) -> np.ndarray:
    """Closed-form E-update with ``Delta = X - XZ - Y2/rho2``."""
    if rho2 <= 0:
        raise InvalidInputError("rho2 must be positive")
    D = np.asarray(X) - XZ - Y2 / rho2
    t = alpha / rho2
    if phi == "l1":
        return shrink(D, t)
    if phi == "l21":
        nrm = np.linalg.norm(D, axis=0)
        scale = np.where(nrm > 0, np.maximum(nrm - t, 0.0) / np.where(nrm > 0, nrm, 1.0), 0.0)
        return D * scale
    if phi == "fro":
        return D / (1 + 2 * t)
    raise InvalidConfigError(f"unknown phi {phi!r}")


class ZSolver:
    """Cholesky factor of ``(beta + rho1) I + rho2 X^T X``, reused across sweeps."""

    def __init__(self, X, beta: float, rho1: float, rho2: float):
        X = np.asarray(X, dtype=float)
        self.X = X
        self.XtX = X.T @ X
        self.beta, self.rho1, self.rho2 = beta, rho1, rho2
        M = rho2 * self.XtX
        M[np.diag_indices_from(M)] += beta + rho1
        self.factor = cho_factor(M)

    def rhs(self, C, E, G_gram, Y1, Y2):
        X = self.X
        return (self.beta * G_gram + self.rho1 * C + self.rho2 * (self.XtX - X.T @ E)
                + Y1 - X.T @ Y2)

    def solve(self, C, E, G_gram, Y1, Y2):
        return cho_solve(self.factor, self.rhs(C, E, G_gram, Y1, Y2))


def solve_Z(C, E, G_gram, X, params: RoParams, Y1, Y2) -> np.ndarray:
    """Minimizer of the augmented Lagrangian in Z."""
    return ZSolver(X, params.beta, params.r1, params.r2).solve(C, E, G_gram, Y1, Y2)


def update_G(C, d: int) -> np.ndarray:
    """Nearest PSD matrix of rank <= d to the symmetric part of C."""
    C = np.asarray(C, dtype=float)
    if not 0 <= d <= C.shape[0]:
        raise InvalidInputError("need 0 <= d <= n")
    P, lam = top_eigs_symmetric(C, d)
    lam = np.maximum(lam, 0.0)
    return (P * lam) @ P.T


def phi_value(E, phi: str) -> float:
    if phi == "l1":
        return float(np.abs(E).sum())
    if phi == "l21":
        return float(np.linalg.norm(E, axis=0).sum())
    if phi == "fro":
        return float(np.sum(E * E))
    raise InvalidConfigError(f"unknown phi {phi!r}")


def objective(X, C, Omega, G_gram, params: RoParams) -> float:
    """Relaxed objective F at C (error taken as ``X - XC``)."""
    X = np.asarray(X, dtype=float)
    c = np.diag(C)
    return float(np.abs(Omega * C).sum() + 0.5 * params.lam * c @ c
                 + params.alpha * phi_value(X - X @ C, params.phi)
                 + 0.5 * params.beta * np.sum((C - G_gram) ** 2))


@dataclass
class AdmmInfo:
    sweeps: int
    converged: bool
    primal: list = field(default_factory=list)


def admm_solve(X, Omega, G_gram, params: RoParams, warm: AdmmState | None = None,
               zsolver: ZSolver | None = None, tau: float | None = None):
    """ADMM sweeps (C, E, Z, multipliers) until ``||Z - Z_old||_F < tau``.

    On exit ``C`` is set to ``Z``. Returns ``(state, AdmmInfo)``; ``primal``
    records ``(||C - Z||_F, ||XZ + E - X||_F)`` after each sweep.
    """
    X = np.asarray(X, dtype=float)
    st = warm if warm is not None else AdmmState.initial(X)
    C, Z, E, Y1, Y2 = st.C.copy(), st.Z.copy(), st.E.copy(), st.Y1.copy(), st.Y2.copy()
    r1, r2 = params.r1, params.r2
    zs = zsolver or ZSolver(X, params.beta, r1, r2)
    if tau is None:
        tau = params.tau_admm if params.tau_admm is not None else 1e-4 * (1 + np.linalg.norm(X))
    info = AdmmInfo(0, False)
    for k in range(1, params.k_max + 1):
        Z_old = Z
        C = prox_C(Z, Y1, Omega, params.lam, r1)
        E = prox_E(X @ Z, Y2, X, params.alpha, r2, params.phi)
        Z = zs.solve(C, E, G_gram, Y1, Y2)
        XZ = X @ Z
        Y1 = Y1 + r1 * (C - Z)
        Y2 = Y2 + r2 * (XZ + E - X)
        info.sweeps = k
        info.primal.append((float(np.linalg.norm(C - Z)), float(np.linalg.norm(XZ + E - X))))
        if np.linalg.norm(Z - Z_old) < tau:
            info.converged = True
            break
    return AdmmState(Z.copy(), Z, E, Y1, Y2), info


def _truncate_columns(C, gamma: float) -> np.ndarray:
    """Keep each column's largest entries until their norm first reaches gamma times the column norm."""
    if gamma >= 1:
        return C.copy()
    A = np.abs(C)
    order = np.argsort(-A, axis=0, kind="stable")
    sq = np.take_along_axis(A, order, axis=0) ** 2
    cum = np.cumsum(sq, axis=0)
    target = (gamma ** 2) * cum[-1]
    # number kept = first index where the cumulative norm reaches the target, plus one
    keep = np.argmax(cum >= target[None, :] * (1 - 1e-15), axis=0) + 1
    mask_sorted = np.arange(C.shape[0])[:, None] < keep[None, :]
    mask = np.zeros_like(mask_sorted)
    np.put_along_axis(mask, order, mask_sorted, axis=0)
    return np.where(mask, C, 0.0)


def build_graph(C, gamma: float = 1.0, sigma: float = 0.0, s: float = 1.0) -> np.ndarray:
    """Affinity from a representation by double truncation.

    Columns are truncated to a fraction ``gamma`` of their norm, left singular
    vectors with singular value at least ``sigma`` are kept, and the rows of
    ``[sqrt(sigma_i) u_i]`` are normalized. Negative inner products are set
    to 0 before raising to the power ``s``.
    """
    C = np.asarray(C, dtype=float)
    if not 0 < gamma <= 1 or sigma < 0 or s < 1:
        raise InvalidInputError("need gamma in (0,1], sigma >= 0, s >= 1")
    Cg = _truncate_columns(C, gamma)
    U, sv, _ = np.linalg.svd(Cg)
    keep = sv >= sigma
    keep &= sv > 0
    if not keep.any():
        raise EmptyGraphError("no singular value at or above sigma")
    G = U[:, keep] * np.sqrt(sv[keep])
    nrm = np.linalg.norm(G, axis=1)
    nrm[nrm == 0] = 1.0
    G = G / nrm[:, None]
    A = np.clip(G @ G.T, 0.0, None) ** s
    return (A + A.T) / 2


@dataclass
class RoTrace:
    outer: list = field(default_factory=list)


def mss_ro(X, K: int, d: int, params: RoParams | None = None):
    """Relaxed optimization with active-set updates.

    Returns
    -------
    J : Partition
    C : ndarray
    A : ndarray
        Final affinity graph.
    trace : RoTrace
        Per outer step: list of ``(ell, sweeps, ||C - C_old||_F, F)``.
    """
    params = params or RoParams()
    X = np.asarray(X, dtype=float)
    if params.normalize_columns:
        nrm = np.linalg.norm(X, axis=0)
        X = X / np.where(nrm > 0, nrm, 1.0)
    m, n = X.shape
    if K < 2 or not 1 <= d <= n:
        raise InvalidInputError("need K >= 2 and 1 <= d <= n")
    eps = params.eps_outer if params.eps_outer is not None else 1e-4 * n
    tau = params.tau_admm if params.tau_admm is not None else 1e-4 * (1 + np.linalg.norm(X))
    omega = coarse_active_set(n)
    state = AdmmState.initial(X)
    G_gram = np.zeros((n, n))
    zs = ZSolver(X, params.beta, params.r1, params.r2)
    trace = RoTrace()
    J = A = None
    for t in range(1, params.t_max + 1):
        rows = []
        for ell in range(1, params.ell_max + 1):
            C_old = state.C
            state, info = admm_solve(X, omega.weights, G_gram, params, state, zs, tau)
            change = float(np.linalg.norm(state.C - C_old))
            rows.append((ell, info.sweeps, change,
                         objective(X, state.C, omega.weights, G_gram, params)))
            if change < eps:
                break
            G_gram = update_G(state.C, d)
        trace.outer.append(rows)
        A = build_graph(state.C, *params.graph)
        new_omega, J = build_active_set(A, K, params.tau, params.seed)
        if new_omega.same(omega):
            break
        omega = new_omega
    return J, state.C, A, trace
