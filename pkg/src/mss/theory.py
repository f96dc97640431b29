"""Structural oracles for minimal subspace segmentation.

Checks for minimality, nondegeneracy, nondegenerate intersection and
candidate-set membership, plus the reduction and extension procedures used
to refine a non-minimal segmentation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Sequence

import numpy as np

from .numerics import RANK_TOL, InvalidInputError, numerical_rank, orth

EXACT_MAX_N = 20
EXACT_MAX_N_INTERSECTION = 15
ENUM_MAX_N = 12
ENUM_MAX_K = 4
DEFAULT_BUDGET = 10_000
SPAN_TOL = 1e-8


class CapacityError(RuntimeError):
    """Raised when an exact enumeration would exceed its size cap."""


@dataclass(frozen=True)
class Partition:
    """Index partition of ``n`` sample columns.

    Indices are 0-based. Empty pieces are allowed so that procedures which
    empty a piece can keep it as a marker; use :meth:`compact` to drop them.
    ``universe`` restricts the covered index set to a subset of ``0..n-1``
    (used for the remainder left after recovering segments).
    """

    pieces: tuple
    n: int
    pure_piece: np.ndarray | None = None
    universe: np.ndarray | None = None

    def __init__(self, pieces: Iterable[Sequence[int]], n: int, pure_piece=None,
                 universe=None):
        ps = tuple(np.sort(np.asarray(p, dtype=int).ravel()) for p in pieces)
        pure = None
        if pure_piece is not None and len(pure_piece) > 0:
            pure = np.sort(np.asarray(pure_piece, dtype=int).ravel())
        if universe is not None:
            universe = np.sort(np.asarray(universe, dtype=int).ravel())
        object.__setattr__(self, "pieces", ps)
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "pure_piece", pure)
        object.__setattr__(self, "universe", universe)
        self._validate()

    def _validate(self):
        allidx = list(self.pieces)
        if self.pure_piece is not None:
            allidx.append(self.pure_piece)
        cat = np.concatenate(allidx) if allidx else np.zeros(0, int)
        target = np.arange(self.n) if self.universe is None else self.universe
        if cat.size != target.size or not np.array_equal(np.sort(cat), target):
            raise InvalidInputError("pieces must be disjoint and cover the index set")

    @property
    def K(self) -> int:
        return len(self.pieces)

    @classmethod
    def from_labels(cls, labels, K: int | None = None) -> "Partition":
        """Build from 1-based labels; label 0 marks the pure piece."""
        labels = np.asarray(labels, dtype=int).ravel()
        if labels.size and labels.min() < 0:
            raise InvalidInputError("labels must be nonnegative")
        K = int(labels.max()) if K is None else int(K)
        if labels.size and labels.max() > K:
            raise InvalidInputError("label exceeds K")
        pieces = [np.flatnonzero(labels == k) for k in range(1, K + 1)]
        return cls(pieces, labels.size, np.flatnonzero(labels == 0))

    def labels(self) -> np.ndarray:
        """1-based label vector, 0 for the pure piece."""
        out = np.zeros(self.n, dtype=int)
        for k, p in enumerate(self.pieces):
            out[p] = k + 1
        return out

    def sizes(self) -> np.ndarray:
        return np.array([p.size for p in self.pieces], dtype=int)

    def compact(self) -> "Partition":
        return Partition([p for p in self.pieces if p.size], self.n, self.pure_piece,
                         self.universe)

    def block_ids(self) -> np.ndarray:
        """Block id per sample; the pure piece is its own block (id K)."""
        ids = np.full(self.n, self.K, dtype=int)
        for k, p in enumerate(self.pieces):
            ids[p] = k
        return ids

    def same_block(self) -> np.ndarray:
        """Boolean n-by-n mask of pairs lying in the same piece."""
        ids = self.block_ids()
        return ids[:, None] == ids[None, :]

    def as_sets(self) -> list:
        return [frozenset(p.tolist()) for p in self.pieces]

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        pure_a = set() if self.pure_piece is None else set(self.pure_piece.tolist())
        pure_b = set() if other.pure_piece is None else set(other.pure_piece.tolist())
        return (self.n == other.n and pure_a == pure_b
                and self.as_sets() == other.as_sets())

    def same_pieces(self, other: "Partition") -> bool:
        """Equality up to piece order, ignoring empty pieces."""
        a = {s for s in self.as_sets() if s}
        b = {s for s in other.as_sets() if s}
        return self.n == other.n and a == b

    __hash__ = None


@dataclass(frozen=True)
class MssPriors:
    K: int
    d: int
    d_min: int = 1

    def __post_init__(self):
        if self.K < 1 or self.d_min < 1 or self.d < self.K * self.d_min:
            raise InvalidInputError("priors need K >= 1, d_min >= 1, d >= K*d_min")


@dataclass
class OracleResult:
    """Verdict with an optional witness that can be re-checked exactly."""

    verdict: bool
    witness: dict | None = None
    checked: int = 0
    notes: list = field(default_factory=list)

    def __bool__(self):
        return self.verdict


# -- nondegeneracy -----------------------------------------------------------

def _batch_deficient(X: np.ndarray, subsets: np.ndarray, tol_rel: float) -> np.ndarray:
    """Flag subsets (rows of column indices) whose columns are rank deficient."""
    if subsets.shape[1] == 0:
        return np.zeros(subsets.shape[0], dtype=bool)
    mats = X[:, subsets].transpose(1, 0, 2)
    s = np.linalg.svd(mats, compute_uv=False)
    smax = s[:, 0]
    return ~(s[:, -1] > tol_rel * smax) | (smax == 0)


def _colnorm_scale(X: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(X, axis=0)
    nrm[nrm == 0] = 1.0
    return X / nrm


def nondegeneracy_witness(X, mode: str = "auto", budget: int = DEFAULT_BUDGET,
                          seed=0, tol_rel: float = RANK_TOL) -> OracleResult:
    """Search for a rank-deficient subset of size at most ``r(X)``.

    Every subset of a full-rank subset is full rank, so only subsets of size
    ``min(r, n)`` need to be tested. Columns are scaled to unit norm first so
    the rank test is insensitive to sample magnitudes.

    Parameters
    ----------
    X : ndarray of shape (m, n)
    mode : {"exact", "sampled", "auto"}
        "auto" enumerates when ``n <= 20`` and the subset count fits the
        budget, otherwise samples.
    budget : int
        Number of random subsets drawn in sampled mode.

    Returns
    -------
    OracleResult
        ``verdict`` is True when no deficient subset was found; otherwise the
        witness holds the failing column indices (lexicographically smallest
        in exact mode).
    """
    X = np.asarray(X, dtype=float)
    m, n = X.shape
    if n == 0:
        return OracleResult(True)
    zero = np.flatnonzero(np.linalg.norm(X, axis=0) == 0)
    r = numerical_rank(X, tol_rel) if np.any(X) else 0
    if r == 0:
        return OracleResult(True)
    if zero.size:
        return OracleResult(False, {"subset": [int(zero[0])]}, 1)
    Xs = _colnorm_scale(X)
    size = min(r, n)
    total = comb(n, size)
    if mode == "auto":
        mode = "exact" if (n <= EXACT_MAX_N and total <= max(budget, 200_000)) else "sampled"
    if mode == "exact":
        if n > EXACT_MAX_N:
            raise CapacityError(f"exact nondegeneracy check limited to n <= {EXACT_MAX_N}")
        it = itertools.combinations(range(n), size)
        checked = 0
        while True:
            chunk = list(itertools.islice(it, 4096))
            if not chunk:
                break
            arr = np.array(chunk, dtype=int)
            bad = _batch_deficient(Xs, arr, tol_rel)
            checked += len(chunk)
            if bad.any():
                w = arr[np.argmax(bad)]
                return OracleResult(False, {"subset": w.tolist()}, checked)
        return OracleResult(True, None, checked)
    if mode != "sampled":
        raise InvalidInputError(f"unknown mode {mode!r}")
    checked = 0
    # exact scan for parallel pairs is cheap and catches the common failure
    if size >= 2:
        G = np.abs(Xs.T @ Xs)
        np.fill_diagonal(G, 0)
        hits = np.argwhere(G >= 1 - 1e-12)
        checked += n * (n - 1) // 2
        if hits.size:
            i, j = sorted(hits[0].tolist())
            pair = np.array([[i, j]])
            if _batch_deficient(Xs, pair, tol_rel)[0]:
                return OracleResult(False, {"subset": [i, j]}, checked)
    rng = np.random.default_rng(seed)
    done = 0
    while done < budget:
        b = min(2048, budget - done)
        arr = np.sort(np.argsort(rng.random((b, n)), axis=1)[:, :size], axis=1)
        bad = _batch_deficient(Xs, arr, tol_rel)
        done += b
        if bad.any():
            return OracleResult(False, {"subset": arr[np.argmax(bad)].tolist()},
                                checked + done)
    return OracleResult(True, None, checked + done)


def is_nondegenerate(X, mode: str = "exact", budget: int = DEFAULT_BUDGET,
                     seed=0, tol_rel: float = RANK_TOL) -> bool:
    """True iff every subset with at most ``r(X)`` columns has full column rank.

    Sampled mode gives a one-sided answer: False is certain.
    """
    return nondegeneracy_witness(X, mode, budget, seed, tol_rel).verdict


def is_minimal_segment(X, mode: str = "auto", budget: int = DEFAULT_BUDGET,
                       seed=0, tol_rel: float = RANK_TOL) -> bool:
    """Rank-deficient and nondegenerate."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] == 0:
        raise InvalidInputError("segment must have at least one column")
    if np.any(np.linalg.norm(X, axis=0) == 0):
        raise InvalidInputError("zero column in segment")
    if X.shape[1] <= numerical_rank(X, tol_rel):
        return False
    return is_nondegenerate(X, mode, budget, seed, tol_rel)


def in_span(basis: np.ndarray, X: np.ndarray, tol: float = SPAN_TOL) -> np.ndarray:
    """Per column: relative residual after projection onto span(basis) <= tol."""
    X = np.asarray(X, dtype=float)
    nrm = np.linalg.norm(X, axis=0)
    if basis.shape[1] == 0:
        return nrm == 0
    res = np.linalg.norm(X - basis @ (basis.T @ X), axis=0)
    return res <= tol * np.maximum(nrm, np.finfo(float).tiny)


def same_span(A, B, tol_rel: float = RANK_TOL) -> bool:
    ra, rb = numerical_rank(A, tol_rel), numerical_rank(B, tol_rel)
    return ra == rb == numerical_rank(np.hstack([A, B]), tol_rel)


def is_mss(X, P: Partition, mode: str = "auto", budget: int = DEFAULT_BUDGET,
           seed=0, tol_rel: float = RANK_TOL) -> bool:
    """Check the three defining conditions of a minimal subspace segmentation."""
    return mss_report(X, P, mode, budget, seed, tol_rel).verdict


def mss_report(X, P: Partition, mode="auto", budget=DEFAULT_BUDGET, seed=0,
               tol_rel=RANK_TOL) -> OracleResult:
    X = np.asarray(X, dtype=float)
    if P.n != X.shape[1]:
        raise InvalidInputError("partition size does not match X")
    if any(p.size == 0 for p in P.pieces) or P.K == 0:
        raise InvalidInputError("MSS pieces must be nonempty")
    if P.pure_piece is not None:
        Xp = X[:, P.pure_piece]
        if numerical_rank(Xp, tol_rel) < Xp.shape[1]:
            return OracleResult(False, {"condition": 1, "piece": "pure"})
    for k, p in enumerate(P.pieces):
        if not is_minimal_segment(X[:, p], mode, budget, seed, tol_rel):
            return OracleResult(False, {"condition": 1, "piece": k})
    for a, b in itertools.combinations(range(P.K), 2):
        if same_span(X[:, P.pieces[a]], X[:, P.pieces[b]], tol_rel):
            return OracleResult(False, {"condition": 2, "pieces": [a, b]})
    if P.pure_piece is not None:
        for k, p in enumerate(P.pieces):
            inside = in_span(orth(X[:, p], tol_rel), X[:, P.pure_piece])
            if inside.any():
                j = int(P.pure_piece[np.argmax(inside)])
                return OracleResult(False, {"condition": 3, "piece": k, "sample": j})
    return OracleResult(True)


# -- nondegenerate intersection ---------------------------------------------

def subspace_intersection(A: np.ndarray, B: np.ndarray, tol: float = SPAN_TOL) -> np.ndarray:
    """Orthonormal basis of span(A) ∩ span(B) for orthonormal A, B."""
    if A.shape[1] == 0 or B.shape[1] == 0:
        return np.zeros((A.shape[0], 0))
    M = np.hstack([A, -B])
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    s_full = np.zeros(M.shape[1])
    s_full[: s.size] = s
    null = Vt[s_full <= tol].T
    if null.shape[1] == 0:
        return np.zeros((A.shape[0], 0))
    return orth(A @ null[: A.shape[1]])


def _residual_component(Xk: np.ndarray, Sk: np.ndarray) -> np.ndarray:
    """Component of X_k orthogonal to S_k' (stays inside span(X_k))."""
    if Sk.shape[1] == 0:
        return Xk
    return Xk - Sk @ (Sk.T @ Xk)


def intersection_witness(X, P: Partition, mode: str = "auto",
                         budget: int = DEFAULT_BUDGET, seed=0,
                         tol_rel: float = RANK_TOL) -> OracleResult:
    """Search for (k, X_k') whose residual component Z_k is degenerate.

    Exact mode enumerates every nonempty subset of the samples outside X_k
    (``n <= 15``). Sampled mode first tries every union of whole outside
    pieces, then ``budget`` random subsets built from random unions of
    pieces with random column selections.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    if P.n != n:
        raise InvalidInputError("partition size does not match X")
    pieces = [p for p in P.pieces if p.size]
    if mode == "auto":
        mode = "exact" if n <= EXACT_MAX_N_INTERSECTION else "sampled"
    if mode == "exact" and n > EXACT_MAX_N_INTERSECTION:
        raise CapacityError(
            f"exact intersection check limited to n <= {EXACT_MAX_N_INTERSECTION}")
    if mode not in ("exact", "sampled"):
        raise InvalidInputError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    checked = 0
    for k, pk in enumerate(pieces):
        Xk = X[:, pk]
        Ak = orth(Xk, tol_rel)
        others = np.setdiff1d(np.arange(n), pk)
        if others.size == 0:
            continue
        seen = set()

        def test(cols):
            B = orth(X[:, cols], tol_rel)
            S = subspace_intersection(Ak, B)
            key = np.round(S @ S.T, 6).tobytes() if S.shape[1] else b""
            if key in seen:
                return None
            seen.add(key)
            Z = _residual_component(Xk, S)
            if np.linalg.norm(Z) <= SPAN_TOL * max(np.linalg.norm(Xk), 1e-300):
                return None
            w = nondegeneracy_witness(Z, "auto", budget, seed, tol_rel)
            if not w.verdict:
                return {"piece": k, "outside": [int(c) for c in cols],
                        "subset": [int(pk[i]) for i in w.witness["subset"]]}
            return None

        if mode == "exact":
            for size in range(1, others.size + 1):
                for cols in itertools.combinations(others.tolist(), size):
                    checked += 1
                    w = test(np.array(cols))
                    if w:
                        return OracleResult(False, w, checked)
            continue
        rest = [p for j, p in enumerate(pieces) if j != k]
        for size in range(1, len(rest) + 1):
            for combo in itertools.combinations(range(len(rest)), size):
                cols = np.concatenate([rest[j] for j in combo])
                checked += 1
                w = test(cols)
                if w:
                    return OracleResult(False, w, checked)
        per_piece = max(1, budget // max(len(pieces), 1))
        for _ in range(per_piece):
            chosen = [p for p in rest if rng.random() < 0.5] or [rest[rng.integers(len(rest))]]
            cols = np.concatenate([p[rng.random(p.size) < rng.random()] for p in chosen])
            if cols.size == 0:
                continue
            checked += 1
            w = test(np.unique(cols))
            if w:
                return OracleResult(False, w, checked)
    return OracleResult(True, None, checked)


def is_intersected_nondegenerately(X, P: Partition, mode: str = "auto",
                                   budget: int = DEFAULT_BUDGET, seed=0,
                                   tol_rel: float = RANK_TOL) -> bool:
    return intersection_witness(X, P, mode, budget, seed, tol_rel).verdict


# -- candidate set -----------------------------------------------------------

def piece_ranks(X, P: Partition, tol_rel: float = RANK_TOL) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.array([numerical_rank(X[:, p], tol_rel) if p.size else 0
                     for p in P.pieces], dtype=int)


def in_candidate_set(X, P: Partition, priors: MssPriors,
                     tol_rel: float = RANK_TOL) -> bool:
    """Membership in the candidate set: ``min |J_k| > d_min`` and rank sum <= d."""
    if P.K != priors.K:
        raise InvalidInputError("partition must have exactly K pieces")
    if P.sizes().min() <= priors.d_min:
        return False
    return int(piece_ranks(X, P, tol_rel).sum()) <= priors.d


def enumerate_partitions(X, priors: MssPriors, tol_rel: float = RANK_TOL) -> list:
    """All K-partitions of the columns of X in the candidate set.

    Exhaustive over set partitions (restricted growth strings) with pruning
    on piece sizes; limited to ``n <= 12`` and ``K <= 4``.
    """
    X = np.asarray(X, dtype=float)
    n, K = X.shape[1], priors.K
    if n > ENUM_MAX_N or K > ENUM_MAX_K:
        raise CapacityError(f"enumeration limited to n <= {ENUM_MAX_N}, K <= {ENUM_MAX_K}")
    need = priors.d_min + 1
    if K * need > n:
        return []
    rank_cache: dict = {}

    def rank(cols):
        key = tuple(cols)
        if key not in rank_cache:
            rank_cache[key] = numerical_rank(X[:, list(cols)], tol_rel)
        return rank_cache[key]

    found = []
    labels = [0] * n
    sizes = [0] * K

    def rec(i, used):
        # remaining samples must be able to fill every block to ``need``
        deficit = sum(max(0, need - sizes[b]) for b in range(used)) + (K - used) * need
        if deficit > n - i:
            return
        if i == n:
            if used != K:
                return
            blocks = [[j for j in range(n) if labels[j] == b] for b in range(K)]
            if sum(rank(b) for b in blocks) <= priors.d:
                found.append(Partition(blocks, n))
            return
        for b in range(min(used + 1, K)):
            labels[i] = b
            sizes[b] += 1
            rec(i + 1, max(used, b + 1))
            sizes[b] -= 1

    rec(0, 0)
    return found


# -- refinement --------------------------------------------------------------

def span_closure(X, cols, candidates, tol: float = SPAN_TOL,
                 tol_rel: float = RANK_TOL) -> np.ndarray:
    """Candidates lying in span(X[:, cols]) within relative residual ``tol``."""
    X = np.asarray(X, dtype=float)
    candidates = np.asarray(candidates, dtype=int)
    B = orth(X[:, cols], tol_rel)
    return candidates[in_span(B, X[:, candidates], tol)]


def extend_segment(X, P: Partition, i: int, tol: float = SPAN_TOL,
                   tol_rel: float = RANK_TOL) -> Partition:
    """Move every sample lying in span(X_{J_i}) into J_i.

    Samples are taken from the other regular pieces; the pure piece is left
    alone. Pieces emptied by the move stay as empty markers.
    """
    if not 0 <= i < P.K:
        raise InvalidInputError("piece index out of range")
    pi = P.pieces[i]
    if pi.size == 0:
        return P
    pool = np.concatenate(P.pieces)
    grab = span_closure(X, pi, pool, tol, tol_rel)
    grab = np.setdiff1d(grab, pi)
    if grab.size == 0:
        return P
    new = [np.setdiff1d(p, grab) if k != i else np.union1d(p, grab)
           for k, p in enumerate(P.pieces)]
    return Partition(new, P.n, P.pure_piece)


def extend_all(X, P: Partition, tol: float = SPAN_TOL,
               tol_rel: float = RANK_TOL) -> Partition:
    """Extend pieces in ascending order of their initial ranks (stable)."""
    ranks = piece_ranks(X, P, tol_rel)
    order = np.argsort(ranks, kind="stable")
    for i in order:
        P = extend_segment(X, P, int(i), tol, tol_rel)
    return P


def reduce_segments(X, P: Partition, tol: float = SPAN_TOL,
                    tol_rel: float = RANK_TOL):
    """Recover minimal segments from the lowest-rank pieces.

    Repeatedly takes the first piece whose rank equals the current minimum
    rank and is smaller than its size, emits the span closure of that piece
    over all remaining samples, and removes those samples.

    Returns
    -------
    recovered : list of ndarray
        Index sets in the order they were certified.
    remainder : Partition
        Remaining nonempty pieces, in original indices; its ``universe`` is
        the set of samples not recovered.
    """
    X = np.asarray(X, dtype=float)
    pieces = [p.copy() for p in P.pieces if p.size]
    recovered = []
    while pieces:
        ranks = [numerical_rank(X[:, p], tol_rel) for p in pieces]
        rho = min(ranks)
        cand = [k for k, p in enumerate(pieces) if ranks[k] == rho and p.size > rho]
        if not cand:
            break
        k = cand[0]
        pool = np.concatenate(pieces)
        seg = span_closure(X, pieces[k], pool, tol, tol_rel)
        recovered.append(seg)
        pieces = [q for q in (np.setdiff1d(p, seg) for p in pieces) if q.size]
    taken = np.concatenate(recovered) if recovered else np.zeros(0, int)
    universe = np.setdiff1d(np.arange(P.n), taken)
    pure = None
    if P.pure_piece is not None:
        pure = np.setdiff1d(P.pure_piece, taken)
    return recovered, Partition(pieces, P.n, pure, universe)
