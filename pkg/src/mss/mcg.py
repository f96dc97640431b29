"""Manifold conjugate gradient for the smoothed sparse representation problem.

Minimizes

    f_delta(W) = sum_ij q_delta(omega_ij c_ij) + lambda/2 ||diag(C)||^2,
    C = V V^T + (V_perp W)(V_perp W)^T,

over full-column-rank W of shape ``(n - r, d - r)``. Search directions live in
the horizontal space ``{H : W^T H = H^T W}`` of the quotient by orthogonal
rotations ``W -> WQ``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import InvalidInputError, SingularManifoldError, ThinSvd

TRACE_COLUMNS = ("ell", "k", "f_delta", "alpha", "delta", "grad_norm")


@dataclass
class McgParams:
    """Algorithm parameters.

    ``delta0=None`` means ``0.1 * max|c_ij(W0)|``. ``k_max`` caps the line
    search probes; ``inner_max`` caps CG iterations per smoothing level.
    """

    delta0: float | None = None
    gamma: float = 0.5
    rho: float = 0.5
    tau_armijo: float = 0.01
    eps_alpha: float = 1e-4
    eps_C: float = 1e-4
    eps_delta: float = 1e-4
    ell_max: int = 20
    k_max: int = 10
    inner_max: int = 200
    lam: float = 0.0
    alpha_init: float = 1.0

    def __post_init__(self):
        if not (0 < self.gamma < 1 and 0 < self.rho < 1 and 0 < self.tau_armijo < 1):
            raise InvalidInputError("gamma, rho and tau_armijo must lie in (0, 1)")
        if min(self.eps_alpha, self.eps_C, self.eps_delta) <= 0:
            raise InvalidInputError("tolerances must be positive")
        if self.ell_max < 1 or self.k_max < 1 or self.inner_max < 1:
            raise InvalidInputError("iteration caps must be positive")
        if self.lam < 0:
            raise InvalidInputError("lambda must be nonnegative")


@dataclass
class McgTrace:
    rows: list = field(default_factory=list)
    fallbacks: int = 0

    def add(self, ell, k, f, alpha, delta, gnorm):
        self.rows.append((int(ell), int(k), float(f), float(alpha), float(delta), float(gnorm)))

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(-1, len(TRACE_COLUMNS))

    def levels(self):
        """Rows grouped by smoothing level."""
        arr = self.as_array()
        return [arr[arr[:, 0] == l] for l in np.unique(arr[:, 0])]


def q_delta(t, delta: float):
    """Huber-type smoothing of ``|t|`` inside ``[-delta, delta]``."""
    a = np.abs(t)
    return np.where(a > delta, a, (a * a + delta * delta) / (2 * delta))


class SmoothedObjective:
    """``f_delta`` and its gradient for fixed ``(V, V_perp, Omega, lambda)``."""

    def __init__(self, V, Vperp, Omega, lam: float, delta: float):
        if delta <= 0:
            raise InvalidInputError("delta must be positive")
        self.V = np.asarray(V, dtype=float)
        self.Vperp = np.asarray(Vperp, dtype=float)
        self.Omega = np.asarray(Omega, dtype=float)
        self.lam = float(lam)
        self.delta = float(delta)
        self.L = self.V @ self.V.T
        self.active = self.Omega != 0
        self.sym = np.array_equal(self.Omega, self.Omega.T)

    def C(self, W) -> np.ndarray:
        B = self.Vperp @ W
        return self.L + B @ B.T

    def value_C(self, C) -> float:
        om = self.Omega[self.active] * C[self.active]
        val = q_delta(om, self.delta).sum()
        if self.lam:
            val += 0.5 * self.lam * np.sum(np.diag(C) ** 2)
        return float(val)

    def value(self, W) -> float:
        return self.value_C(self.C(W))

    def grad_C(self, C) -> np.ndarray:
        """Derivative with respect to C (entrywise)."""
        T = self.Omega * C
        G = self.Omega * np.clip(T / self.delta, -1.0, 1.0)
        if self.lam:
            G[np.diag_indices_from(G)] += self.lam * np.diag(C)
        return G

    def grad(self, W, C=None) -> np.ndarray:
        if C is None:
            C = self.C(W)
        G = self.grad_C(C)
        Gs = 2 * G if self.sym else G + G.T
        return self.Vperp.T @ (Gs @ (self.Vperp @ W))


def f_delta(W, V, Vperp, Omega, lam: float, delta: float) -> float:
    """Smoothed objective value at W.

    The smoothed l1 term runs over the penalized positions (``omega_ij > 0``)
    only, so ``Omega = 0`` and ``lam = 0`` give 0.
    """
    return SmoothedObjective(V, Vperp, Omega, lam, delta).value(W)


def grad_f_delta(W, V, Vperp, Omega, lam: float, delta: float) -> np.ndarray:
    """Gradient ``2 V_perp^T (Omega ⊙ sign(C) ⊙ min(|Omega ⊙ C|/delta, 1) + lam diag(c)) V_perp W``.

    For a nonsymmetric Omega the symmetric part of the inner matrix is used.
    """
    return SmoothedObjective(V, Vperp, Omega, lam, delta).grad(W)


def horizontal_project(W, Delta, rcond: float = 1e-12) -> np.ndarray:
    """Project Delta onto the horizontal space at W.

    Solves ``W^T W N + N W^T W = W^T Delta - Delta^T W`` for skew N through
    the eigendecomposition of ``W^T W`` and returns ``Delta - W N``.
    """
    W = np.asarray(W, dtype=float)
    Delta = np.asarray(Delta, dtype=float)
    sig, Q = np.linalg.eigh(W.T @ W)
    if sig[0] <= rcond * max(sig[-1], np.finfo(float).tiny):
        raise SingularManifoldError("W is not of full column rank")
    E = W.T @ Delta
    E = E - E.T
    Nt = (Q.T @ E @ Q) / (sig[:, None] + sig[None, :])
    N = Q @ Nt @ Q.T
    return Delta - W @ N


def hz_beta(P, Y, Z) -> float:
    """Hager-Zhang type coefficient; 0 when ``<Y, Z> = 0``."""
    yz = float(np.vdot(Y, Z))
    if yz == 0.0 or not np.isfinite(yz):
        return 0.0
    return float(np.vdot(P, Y) / yz - 2 * np.vdot(P, Z) * np.vdot(Y, Y) / yz ** 2)


def cg_direction(P, P_prev_proj=None, H_prev_proj=None, normalize: bool = True):
    """Conjugate direction ``-P + beta Z`` with ``Y = P - P_prev``, ``Z = H_prev``.

    Without history the steepest descent direction is used. Returns
    ``(H, beta)``; H has unit Frobenius norm when ``normalize``.
    """
    if P_prev_proj is None or H_prev_proj is None:
        beta = 0.0
        H = -P
    else:
        Y = P - P_prev_proj
        beta = hz_beta(P, Y, H_prev_proj)
        H = -P + beta * H_prev_proj
    if normalize:
        nh = np.linalg.norm(H)
        if nh > 0:
            H = H / nh
    return H, beta


@dataclass
class LineSearchResult:
    alpha: float
    W: np.ndarray
    f: float
    C: np.ndarray | None
    fallback_used: bool
    probes: int
    H: np.ndarray


def _armijo_search(obj, W, H, f_curr, slope, alpha0, rho, tau, k_max):
    """Return (alpha, W, f, C, probes); alpha is None if no pass in k_max probes."""
    def trial(a):
        Wn = W + a * H
        Cn = obj.C(Wn)
        fn = obj.value_C(Cn)
        return fn <= f_curr + tau * a * slope, Wn, fn, Cn

    a = alpha0
    ok, Wn, fn, Cn = trial(a)
    probes = 1
    if ok:
        # grow while the larger step still passes
        while probes < k_max:
            ok2, W2, f2, C2 = trial(a / rho)
            probes += 1
            if not ok2:
                break
            a, Wn, fn, Cn = a / rho, W2, f2, C2
        return a, Wn, fn, Cn, probes
    while probes < k_max:
        a *= rho
        ok, Wn, fn, Cn = trial(a)
        probes += 1
        if ok:
            return a, Wn, fn, Cn, probes
    return None, W, f_curr, None, probes


def line_search(obj: SmoothedObjective, W, H, f_curr: float, slope: float,
                params: McgParams, alpha_init: float, P=None) -> LineSearchResult:
    """Armijo search by multiplying or dividing by ``rho`` from ``alpha_init``.

    The accepted step passes the Armijo test while ``alpha / rho`` does not
    (unless the probe cap stops the growth). When no step passes within
    ``k_max`` probes and ``P`` is given, the search restarts once along the
    normalized steepest descent direction.
    """
    if not slope < 0:
        raise InvalidInputError("line search needs a descent direction")
    a, Wn, fn, Cn, pr = _armijo_search(obj, W, H, f_curr, slope, alpha_init,
                                       params.rho, params.tau_armijo, params.k_max)
    if a is not None:
        return LineSearchResult(a, Wn, fn, Cn, False, pr, H)
    if P is None:
        return LineSearchResult(0.0, W, f_curr, None, True, pr, H)
    nP = np.linalg.norm(P)
    Hs = -P / nP
    a, Wn, fn, Cn, pr2 = _armijo_search(obj, W, Hs, f_curr, -nP, alpha_init,
                                        params.rho, params.tau_armijo, params.k_max)
    return LineSearchResult(0.0 if a is None else a, Wn, fn, Cn, True, pr + pr2, Hs)


def default_W0(n_minus_r: int, d_minus_r: int) -> np.ndarray:
    """Identity stacked over zeros."""
    if not 0 < d_minus_r <= n_minus_r:
        raise InvalidInputError("need 0 < d - r <= n - r")
    W0 = np.zeros((n_minus_r, d_minus_r))
    W0[np.arange(d_minus_r), np.arange(d_minus_r)] = 1.0
    return W0


def _guard_rank(W, floor: float = 1e-5):
    """Lift singular values of W below ``floor * s_max`` up to that level.

    horizontal_project needs ``s_min^2 > 1e-12 s_max^2``; the floor keeps a
    margin above it. Returns ``(W, changed)``.
    """
    U, s, Vt = np.linalg.svd(W, full_matrices=False)
    low = s < floor * s[0]
    if not low.any():
        return W, False
    s = np.where(low, floor * s[0], s)
    return (U * s) @ Vt, True


def mss_mcg(svd: ThinSvd, Omega, W0=None, params: McgParams | None = None,
            d: int | None = None):
    """Minimize the smoothed objective over decreasing smoothing levels.

    Parameters
    ----------
    svd : ThinSvd
        Factors of the sample matrix.
    Omega : ndarray (n, n)
        Nonnegative weights of the penalized positions.
    W0 : ndarray, optional
        Initial factor; defaults to identity over zeros of width ``d - r``.
    params : McgParams
    d : int, optional
        Target rank, needed only when ``W0`` is omitted.

    Returns
    -------
    W : ndarray
    C : ndarray
    trace : McgTrace
        One row per accepted step, plus the starting value of every level.
    """
    params = params or McgParams()
    Omega = np.asarray(Omega, dtype=float)
    if np.any(Omega < 0) or not np.all(np.isfinite(Omega)):
        raise InvalidInputError("Omega must be finite and nonnegative")
    if W0 is None:
        if d is None:
            raise InvalidInputError("either W0 or d is required")
        W0 = default_W0(svd.n - svd.r, d - svd.r)
    W, _ = _guard_rank(np.array(W0, dtype=float))
    probe = SmoothedObjective(svd.V, svd.Vperp, Omega, params.lam, 1.0)
    C = probe.C(W)
    delta = params.delta0
    if delta is None:
        delta = 0.1 * float(np.abs(C).max())
    trace = McgTrace()
    alpha = params.alpha_init
    for ell in range(1, params.ell_max + 1):
        obj = SmoothedObjective(svd.V, svd.Vperp, Omega, params.lam, delta)
        C_old = C
        f = obj.value_C(C)
        P_prev = H_prev = None
        G = obj.grad(W, C)
        trace.add(ell, 0, f, 0.0, delta, np.linalg.norm(G))
        for k in range(1, params.inner_max + 1):
            P = horizontal_project(W, G)
            nP = np.linalg.norm(P)
            if nP == 0:
                break
            if P_prev is not None:
                H, _ = cg_direction(P, horizontal_project(W, P_prev),
                                    horizontal_project(W, H_prev))
            else:
                H, _ = cg_direction(P)
            slope = float(np.vdot(P, H))
            if slope >= 0:
                H, slope = -P / nP, -nP
            res = line_search(obj, W, H, f, slope, params, alpha, P)
            if res.fallback_used:
                trace.fallbacks += 1
            if res.alpha == 0.0:
                break
            W, f, C = res.W, res.f, res.C
            alpha = res.alpha
            W, perturbed = _guard_rank(W)
            if perturbed:
                C = obj.C(W)
                f = obj.value_C(C)
            G = obj.grad(W, C)
            trace.add(ell, k, f, alpha, delta, np.linalg.norm(G))
            if perturbed or res.fallback_used:
                P_prev = H_prev = None
            else:
                P_prev, H_prev = P, res.H
            if alpha < params.eps_alpha:
                break
        change = float(np.abs(Omega * (C - C_old)).max()) if Omega.size else 0.0
        if change < params.eps_C and delta < params.eps_delta:
            break
        delta *= params.gamma
    return W, C, trace


def with_params(params: McgParams, **kw) -> McgParams:
    return replace(params, **kw)
