"""Hybrid optimization: primal alternating solves seeded by subspace correction."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .ao import AoParams, mss_ao
from .dual import subspace_correction
from .numerics import InvalidInputError, ThinSvd, thin_svd
from .spectral import ActiveSet, coarse_active_set
from .theory import Partition


@dataclass
class HoParams:
    ao: AoParams = field(default_factory=AoParams)
    beta: float = 1.25
    h_max: int = 10
    s_max: int = 50

    def __post_init__(self):
        if self.beta <= 0 or self.h_max < 1 or self.s_max < 1:
            raise InvalidInputError("need beta > 0, h_max >= 1 and s_max >= 1")


@dataclass
class HoStep:
    h: int
    J_prim: Partition
    J_dual: Partition
    omega_kind: str
    ao_steps: int
    dual_iterations: int
    metrics: dict | None = None


def omega_from_partition(J: Partition, beta: float = 1.25) -> ActiveSet:
    """Hard cross-block set if every piece is nonempty, else the beta-weighted set.

    Hard: 1 across pieces, 0 within. Beta-weighted: beta across pieces, 1
    within a piece off the diagonal, 0 on the diagonal.
    """
    same = J.same_block()
    if np.all(J.sizes() > 0):
        return ActiveSet(np.where(same, 0.0, 1.0), "hard")
    W = np.where(same, 1.0, beta)
    return ActiveSet(W, "beta")


def mss_ho(X_or_svd, K: int, d: int, params: HoParams | None = None,
           X=None, labels=None):
    """Hybrid optimization.

    Parameters
    ----------
    X_or_svd : ndarray or ThinSvd
        Samples, or their factors (then pass the samples in ``X`` too).
    K, d : int
    params : HoParams
    labels : array_like, optional
        Ground-truth 1-based labels; when given, each step records metrics.

    Returns
    -------
    J : Partition
        Partition from the last subspace correction.
    C : ndarray
        Representation from the last primal pass.
    info : dict
        ``steps`` (list of HoStep) and the final ``omega``.
    """
    params = params or HoParams()
    if isinstance(X_or_svd, ThinSvd):
        if X is None:
            raise InvalidInputError("pass the samples X along with their factors")
        svd = X_or_svd
    else:
        X = np.asarray(X_or_svd, dtype=float)
        svd = thin_svd(X)
    truth = Partition.from_labels(labels, K) if labels is not None else None
    omega = coarse_active_set(svd.n)
    W = None
    steps = []
    J = C = None
    for h in range(1, params.h_max + 1):
        ao_p = params.ao if h == 1 else replace(params.ao, t_max=1)
        J_prim, C, ainfo = mss_ao(svd, K, d, ao_p, omega=omega, W0=W)
        W = ainfo["W"]
        dual = subspace_correction(X, J_prim, d, params.s_max)
        J = dual.J
        new_omega = omega_from_partition(J, params.beta)
        met = None
        if truth is not None:
            from .metrics import metric_report
            met = metric_report(C, J, truth, K).to_dict()
        steps.append(HoStep(h, J_prim, J, new_omega.kind, len(ainfo["steps"]),
                            dual.iterations, met))
        if new_omega.same(omega):
            break
        omega = new_omega
    return J, C, {"steps": steps, "omega": omega}
