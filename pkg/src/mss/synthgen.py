"""Synthetic unions of intersecting subspaces and their diagnostics."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .numerics import InvalidInputError, orth

PAPER_BINS = (0.0, 0.05, 0.1, 0.3, 0.5, 1.0)


@dataclass
class SyntheticSpec:
    """Parameters of a synthetic union of subspaces.

    All subspaces live inside a random r-dimensional subspace of R^m, so
    they intersect once their dimensions add up past r.
    """

    r: int
    dims: list
    counts: list
    m: int | None = None
    seed: int = 0
    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if self.m is None:
            self.m = 3 * self.r
        self.dims = [int(v) for v in self.dims]
        self.counts = [int(v) for v in self.counts]
        if len(self.dims) != len(self.counts) or not self.dims:
            raise InvalidInputError("dims and counts must be nonempty and equal length")
        if not self.r <= self.m:
            raise InvalidInputError("need r <= m")
        if any(not 0 < d < self.r for d in self.dims):
            raise InvalidInputError("need 0 < d_k < r")
        if any(c <= d for c, d in zip(self.counts, self.dims)):
            raise InvalidInputError("need n_k > d_k")

    @classmethod
    def equal(cls, K: int, r: int, d_c: int, n_k: int, m: int | None = None, seed: int = 0):
        return cls(r=r, dims=[d_c] * K, counts=[n_k] * K, m=m, seed=seed)

    @property
    def K(self) -> int:
        return len(self.dims)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SyntheticData:
    X: np.ndarray
    labels: np.ndarray
    bases: list
    U: np.ndarray
    spec: SyntheticSpec
    info: dict = field(default_factory=dict)


def _rng_pair(seed):
    ss = np.random.SeedSequence(seed)
    a, b = ss.spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


def _random_orthonormal(rng, rows: int, cols: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((rows, cols)))
    # sign fix makes Q Haar distributed and deterministic
    return Q * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))


def gen_subspaces(spec: SyntheticSpec, rng=None):
    """Draw ``U`` (m x r) and ``U_k = U P_k``.

    ``spec`` only needs ``m``, ``r``, ``dims`` and ``seed``, so dimensions
    outside the SyntheticSpec invariants (``d_k = r``) can be drawn too.

    Returns
    -------
    bases : list of ndarray
    U : ndarray
    """
    if rng is None:
        rng = _rng_pair(spec.seed)[0]
    U = _random_orthonormal(rng, spec.m, spec.r)
    bases = [U @ _random_orthonormal(rng, spec.r, d) for d in spec.dims]
    return bases, U


def gen_samples(bases, counts, seed=0, low: float = -1.0, high: float = 1.0):
    """Samples ``x = U_k y`` with i.i.d. uniform coefficients, shuffled.

    Returns ``(X, labels)`` with 1-based labels.
    """
    if len(bases) != len(counts):
        raise InvalidInputError("one count per basis required")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cols, labels = [], []
    for k, (B, c) in enumerate(zip(bases, counts)):
        cols.append(B @ rng.uniform(low, high, size=(B.shape[1], c)))
        labels.append(np.full(c, k + 1))
    X = np.hstack(cols)
    labels = np.concatenate(labels)
    perm = rng.permutation(X.shape[1])
    return X[:, perm], labels[perm]


def generate(spec: SyntheticSpec) -> SyntheticData:
    """Bases and samples fully determined by ``spec.seed``."""
    r1, r2 = _rng_pair(spec.seed)
    bases, U = gen_subspaces(spec, r1)
    X, labels = gen_samples(bases, spec.counts, r2, spec.low, spec.high)
    d0 = estimate_d0(bases)
    ok = all(n > d + (spec.K - 1) * d0 for n, d in zip(spec.counts, spec.dims))
    return SyntheticData(X, labels, bases, U, spec,
                         {"d0": d0, "singleness_inequality": bool(ok)})


def pairwise_intersection_dims(bases, tau_sigma: float = 0.999):
    """Count singular values of ``U_s^T U_t`` at or above ``tau_sigma``.

    Returns the K x K count matrix and the mean over off-diagonal pairs.
    """
    if not 0 < tau_sigma <= 1:
        raise InvalidInputError("tau_sigma must lie in (0, 1]")
    K = len(bases)
    M = np.zeros((K, K), dtype=int)
    for s in range(K):
        for t in range(K):
            sv = np.linalg.svd(bases[s].T @ bases[t], compute_uv=False)
            M[s, t] = int(np.sum(sv >= tau_sigma))
    off = ~np.eye(K, dtype=bool)
    mean = float(M[off].mean()) if K > 1 else 0.0
    return M, mean


def estimate_d0(bases, tau_sigma: float = 0.999) -> int:
    """``max_k dim(S_k ∩ sum_{j != k} S_j)`` by singular-value counting."""
    K = len(bases)
    best = 0
    for k in range(K):
        if K == 1:
            break
        rest = orth(np.hstack([bases[j] for j in range(K) if j != k]))
        sv = np.linalg.svd(bases[k].T @ rest, compute_uv=False)
        best = max(best, int(np.sum(sv >= tau_sigma)))
    return best


def min_distances(X, labels, bases) -> np.ndarray:
    """Relative distance of each sample to the nearest other subspace.

    With a single subspace the distance is 1 by convention.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=int)
    nrm = np.linalg.norm(X, axis=0)
    if np.any(nrm == 0):
        raise InvalidInputError("zero-norm sample")
    dist = np.ones(X.shape[1])
    for l, B in enumerate(bases):
        res = np.linalg.norm(X - B @ (B.T @ X), axis=0) / nrm
        other = labels != l + 1
        dist[other] = np.minimum(dist[other], res[other])
    return dist


def distance_profile(X, labels, bases, bin_edges=PAPER_BINS) -> np.ndarray:
    """Percentage of samples per distance bin; the last bin is closed at 1."""
    edges = np.asarray(bin_edges, dtype=float)
    if edges[0] > 0 or edges[-1] < 1:
        raise InvalidInputError("bins must cover [0, 1]")
    d = np.clip(min_distances(X, labels, bases), edges[0], edges[-1])
    counts, _ = np.histogram(d, bins=edges)
    return 100.0 * counts / d.size


def intersection_dim_bound(U1, U2, tol: float = 1e-8) -> float:
    """Upper bound ``||U1^T U2||_F^2`` on ``dim(span U1 ∩ span U2)``."""
    U1, U2 = np.asarray(U1, float), np.asarray(U2, float)
    for U in (U1, U2):
        if np.linalg.norm(U.T @ U - np.eye(U.shape[1])) > tol:
            raise InvalidInputError("bases must be orthonormal")
    return float(np.linalg.norm(U1.T @ U2) ** 2)


def add_noise(X, sigma_rel: float, seed=0) -> np.ndarray:
    """Gaussian noise with per-entry scale ``sigma_rel * ||X||_F / sqrt(mn)``."""
    if sigma_rel < 0:
        raise InvalidInputError("sigma_rel must be nonnegative")
    X = np.asarray(X, dtype=float)
    if sigma_rel == 0:
        return X.copy()
    rng = np.random.default_rng(seed)
    scale = sigma_rel * np.linalg.norm(X) / np.sqrt(X.size)
    return X + scale * rng.standard_normal(X.shape)


# -- bundles -----------------------------------------------------------------

def fmt17(v: float) -> str:
    return format(float(v), ".17g")


def write_matrix_csv(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="\n") as fh:
        for row in M:
            fh.write(",".join(fmt17(v) for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    M = np.loadtxt(path, delimiter=",", ndmin=2)
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{path}: non-finite entries")
    return M


def write_labels_csv(path, labels) -> None:
    with open(path, "w", newline="\n") as fh:
        for v in np.asarray(labels, dtype=int):
            fh.write(f"{int(v)}\n")


def read_labels_csv(path) -> np.ndarray:
    return np.loadtxt(path, dtype=int, ndmin=1)


def write_bundle(data: SyntheticData, outdir) -> Path:
    """Write ``X.csv``, ``labels.csv``, ``bases/U_k.csv`` and ``spec.json``."""
    out = Path(outdir)
    (out / "bases").mkdir(parents=True, exist_ok=True)
    write_matrix_csv(out / "X.csv", data.X)
    write_labels_csv(out / "labels.csv", data.labels)
    for k, B in enumerate(data.bases):
        write_matrix_csv(out / "bases" / f"U_{k + 1}.csv", B)
    meta = {"spec": data.spec.to_dict(), **data.info}
    (out / "spec.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out


def read_bundle(path):
    """Load ``(X, labels or None, bases)`` from a bundle directory."""
    p = Path(path)
    X = read_matrix_csv(p / "X.csv")
    labels = read_labels_csv(p / "labels.csv") if (p / "labels.csv").exists() else None
    bases = []
    bdir = p / "bases"
    if bdir.is_dir():
        k = 1
        while (bdir / f"U_{k}.csv").exists():
            bases.append(read_matrix_csv(bdir / f"U_{k}.csv"))
            k += 1
    return X, labels, bases
