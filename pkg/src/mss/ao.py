"""Alternating optimization of the representation and the active set."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .mcg import McgParams, default_W0, mss_mcg
from .numerics import InvalidInputError, ThinSvd, thin_svd
from .spectral import ActiveSet, build_active_set, coarse_active_set, spectral_partition


class DegeneratePriorError(ValueError):
    """Raised when the rank prior leaves no room for the factor W."""


@dataclass
class AoParams:
    lambda0: float = 10.0
    t_max: int = 10
    mcg: McgParams = field(default_factory=McgParams)
    tau: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.lambda0 <= 0 or self.t_max < 1:
            raise InvalidInputError("need lambda0 > 0 and t_max >= 1")


@dataclass
class AoStep:
    t: int
    lam: float
    mcg_trace: object
    omega_changed: bool


def lambda_update(Omega, C_hat, lambda0: float) -> float:
    """``min(lambda0, 2 ||Omega ⊙ C||_1 / ||diag C||^2)``; lambda0 if the diagonal is 0."""
    c = np.diag(np.asarray(C_hat, dtype=float))
    den = float(c @ c)
    if den == 0:
        return float(lambda0)
    num = 2.0 * float(np.abs(np.asarray(Omega) * C_hat).sum())
    return float(min(lambda0, num / den))


def _as_svd(X_or_svd) -> ThinSvd:
    return X_or_svd if isinstance(X_or_svd, ThinSvd) else thin_svd(X_or_svd)


def affinity(C) -> np.ndarray:
    A = np.abs(np.asarray(C, dtype=float))
    return (A + A.T) / 2


def mss_ao(X_or_svd, K: int, d: int, params: AoParams | None = None,
           omega: ActiveSet | None = None, W0=None, lrr_shortcut: bool = True):
    """Alternate MCG solves with spectral active-set updates.

    Parameters
    ----------
    X_or_svd : ndarray or ThinSvd
    K, d : int
        Number of segments and rank sum.
    params : AoParams
    omega : ActiveSet, optional
        Initial active set; coarse by default.
    W0 : ndarray, optional
        Initial factor; identity over zeros by default.
    lrr_shortcut : bool
        When ``d <= r(X)`` return the closed-form ``VV^T`` instead of raising.

    Returns
    -------
    J : Partition
    C : ndarray
    info : dict
        ``steps`` (list of AoStep), final ``W``, ``omega`` and ``lam``.
    """
    params = params or AoParams()
    if K < 2:
        raise InvalidInputError("need K >= 2")
    svd = _as_svd(X_or_svd)
    n = svd.n
    if d <= svd.r:
        if not lrr_shortcut:
            raise DegeneratePriorError(f"d={d} must exceed r(X)={svd.r}")
        C = svd.lrr()
        J = spectral_partition(affinity(C), K, params.seed)
        return J, C, {"steps": [], "W": None, "omega": omega, "lam": None, "shortcut": True}
    if d > n:
        raise InvalidInputError("d cannot exceed n")
    omega = omega or coarse_active_set(n)
    W = default_W0(n - svd.r, d - svd.r) if W0 is None else np.array(W0, dtype=float)
    lam = params.lambda0
    C = None
    J = None
    steps = []
    for t in range(1, params.t_max + 1):
        if t > 1:
            lam = lambda_update(omega.weights, C, params.lambda0)
        mp = replace(params.mcg, lam=lam)
        W, C, trace = mss_mcg(svd, omega.weights, W, mp)
        new_omega, J = build_active_set(affinity(C), K, params.tau, params.seed)
        changed = not new_omega.same(omega)
        steps.append(AoStep(t, lam, trace, changed))
        omega = new_omega
        if not changed:
            break
    return J, C, {"steps": steps, "W": W, "omega": omega, "lam": lam, "shortcut": False}
