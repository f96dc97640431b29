"""Small hand-built instances with known segmentation behavior.

Each fixture ships as ``data/<name>.csv`` (samples as columns) plus
``data/<name>.json`` holding named partitions, priors and the index sets
used by the checks. ``build_fixture`` regenerates them from fixed seeds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .numerics import InvalidInputError
from .synthgen import read_matrix_csv, write_matrix_csv
from .theory import (MssPriors, Partition, enumerate_partitions, extend_segment,
                     in_candidate_set, intersection_witness, is_mss, piece_ranks,
                     reduce_segments)

NAMES = ("example1-T2", "ndint", "ndint-small", "nd0", "ndg-int")


@dataclass
class Fixture:
    name: str
    X: np.ndarray
    partitions: dict
    priors: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def partition(self, key: str) -> Partition:
        return Partition(self.partitions[key], self.X.shape[1])

    def to_json(self) -> dict:
        return {"name": self.name, "n": int(self.X.shape[1]),
                "partitions": self.partitions, "priors": self.priors, "meta": self.meta}


def _eye(m, idx):
    """Columns e_i (1-based) of the identity of order m."""
    return np.eye(m)[:, [i - 1 for i in idx]]


def _nondegenerate(rows, cols, rng):
    return rng.uniform(-1.0, 1.0, size=(rows, cols))


def _blocks(sizes):
    out, s = [], 0
    for n in sizes:
        out.append(list(range(s, s + n)))
        s += n
    return out


def _example1(T=2, seed=1):
    # pieces [a_j1 a_j2; b_j b_j; 0 0] and [a_j1 a_j2; 0 0; b_j b_j] in R^5
    rng = np.random.default_rng(seed)
    a = rng.integers(-5, 6, size=(T, 2)).astype(float)
    while np.any(a[:, 0] == a[:, 1]):
        a = rng.integers(-5, 6, size=(T, 2)).astype(float)
    b = rng.integers(-5, 6, size=(T, 2)).astype(float)
    cols, first, second = [], [], []
    for j in range(T):
        for s in range(2):
            first.append(len(cols))
            cols.append(np.r_[a[j, s], b[j], 0, 0])
        for s in range(2):
            second.append(len(cols))
            cols.append(np.r_[a[j, s], 0, 0, b[j]])
    X = np.array(cols).T
    by_type = [first, second]
    by_index = [[4 * j, 4 * j + 1, 4 * j + 2, 4 * j + 3] for j in range(T)]
    return Fixture("example1-T2", X, {"by_type": by_type, "by_index": by_index},
                   meta={"T": T})


def _ndint(sizes=(5, 5, 5), seed=2, name="ndint"):
    # U_1 = [e1, e2], U_2 = [e2, e3], U_3 = e4 in R^4
    rng = np.random.default_rng(seed)
    U = [_eye(4, [1, 2]), _eye(4, [2, 3]), _eye(4, [4])]
    X = np.hstack([Uk @ _nondegenerate(Uk.shape[1], n, rng) for Uk, n in zip(U, sizes)])
    truth = _blocks(sizes)
    half = sizes[2] // 2
    merged = [truth[0] + truth[1], truth[2][:half], truth[2][half:]]
    return Fixture(name, X, {"truth": truth, "merged": merged},
                   priors={"K": 3, "d": 5, "d_min": 1},
                   meta={"rest_priors": {"K": 2, "d": 4, "d_min": 2}})


def _nd0(n_k=16, seed=3):
    rng = np.random.default_rng(seed)
    U = [_eye(8, [1, 2, 3]), _eye(8, [3, 4, 5]), _eye(8, [1, 4, 6]),
         _eye(8, [2, 5, 6]), _eye(8, [7, 8])]
    X = np.hstack([Uk @ _nondegenerate(Uk.shape[1], n_k, rng) for Uk in U])
    truth = _blocks([n_k] * 5)
    last = truth[4]
    q = len(last) // 4
    merged = [sum(truth[:4], [])] + [last[i * q:(i + 1) * q] if i < 3 else last[3 * q:]
                                     for i in range(4)]
    return Fixture("nd0", X, {"truth": truth, "merged": merged},
                   priors={"K": 5, "d": 15, "d_min": 2})


def _ndg_int(n_k=31, seed=4):
    rng = np.random.default_rng(seed)
    e = np.ones(5)
    H = _nondegenerate(5, n_k, rng)
    H[:, 0] = e
    H[:, 1] = e - np.eye(5)[0]
    H[:, 2] = e - np.eye(5)[0] - np.eye(5)[1]
    U = [_eye(8, [1, 2, 3, 4, 5]), _eye(8, [1, 2, 6, 7, 8]), _eye(8, [3, 4, 1, 2, 6]),
         _eye(8, [3, 4, 5, 7, 8]), _eye(8, [5, 6, 1, 2, 4]), _eye(8, [5, 6, 4, 7, 8])]
    X = np.hstack([Uk @ H for Uk in U])
    truth = _blocks([n_k] * 6)
    head = [t[:3] for t in truth]
    tail = [t[3:] for t in truth]
    alt = [head[0] + head[1], head[2] + head[3], head[4] + head[5],
           tail[0], tail[1], tail[2] + tail[3] + tail[4] + tail[5]]
    return Fixture("ndg-int", X, {"truth": truth, "alt": alt},
                   priors={"K": 6, "d": 30, "d_min": 5})


_BUILDERS = {
    "example1-T2": _example1,
    "ndint": _ndint,
    "ndint-small": lambda: _ndint((3, 3, 4), seed=5, name="ndint-small"),
    "nd0": _nd0,
    "ndg-int": _ndg_int,
}


def build_fixture(name: str) -> Fixture:
    if name not in _BUILDERS:
        raise InvalidInputError(f"unknown fixture {name!r}; choose from {NAMES}")
    return _BUILDERS[name]()


def write_fixtures(outdir) -> list:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in NAMES:
        fx = build_fixture(name)
        write_matrix_csv(outdir / f"{name}.csv", fx.X)
        (outdir / f"{name}.json").write_text(json.dumps(fx.to_json(), indent=1) + "\n")
        paths.append(outdir / f"{name}.csv")
    return paths


def load_fixture(name: str) -> Fixture:
    """Read a shipped fixture from the package data."""
    if name not in NAMES:
        raise InvalidInputError(f"unknown fixture {name!r}; choose from {NAMES}")
    base = resources.files("mss") / "data"
    X = read_matrix_csv(base / f"{name}.csv")
    meta = json.loads((base / f"{name}.json").read_text())
    return Fixture(name, X, meta["partitions"], meta.get("priors", {}), meta.get("meta", {}))


# -- checks ------------------------------------------------------------------

def _priors(d):
    return MssPriors(d["K"], d["d"], d["d_min"])


def _check_example1(fx):
    X = fx.X
    out = []
    for key in ("by_type", "by_index"):
        P = fx.partition(key)
        out.append((f"{key} is an MSS", is_mss(X, P, mode="exact"),
                    f"ranks {piece_ranks(X, P).tolist()}"))
    a, b = fx.partition("by_type"), fx.partition("by_index")
    same = (a.K == b.K and sorted(piece_ranks(X, a)) == sorted(piece_ranks(X, b)))
    out.append(("equal piece counts and ranks (T = 2)", same,
                f"{a.K} pieces each"))
    out.append(("the two segmentations differ", not a.same_pieces(b), ""))
    return out


def _check_ndint(fx):
    X = fx.X
    pr = _priors(fx.priors)
    truth, merged = fx.partition("truth"), fx.partition("merged")
    out = [("truth is an MSS", is_mss(X, truth, mode="exact"), ""),
           ("truth in candidate set", in_candidate_set(X, truth, pr),
            f"ranks {piece_ranks(X, truth).tolist()}"),
           ("merged in candidate set", in_candidate_set(X, merged, pr),
            f"ranks {piece_ranks(X, merged).tolist()}")]
    if X.shape[1] <= 12:
        found = enumerate_partitions(X, pr)
        out.append(("enumeration finds at least two partitions", len(found) >= 2,
                    f"{len(found)} found"))
    # extend the smallest-rank piece of the merged partition
    ranks = piece_ranks(X, merged)
    i = int(np.argmin(ranks))
    ext = extend_segment(X, merged, i)
    want = set(fx.partitions["truth"][2])
    out.append(("smallest-rank extension recovers the third segment",
                set(ext.pieces[i].tolist()) == want, f"piece {i}"))
    rest = sorted(set(range(X.shape[1])) - want)
    if len(rest) <= 12:
        Xr = X[:, rest]
        found = enumerate_partitions(Xr, _priors(fx.meta["rest_priors"]))
        got = [sorted(tuple(rest[j] for j in p) for p in P.pieces) for P in found]
        ok = got == [sorted(tuple(t) for t in fx.partitions["truth"][:2])]
        out.append(("remaining samples have a single candidate partition", ok,
                    f"{len(found)} found"))
    return out


def _check_nd0(fx):
    X = fx.X
    pr = _priors(fx.priors)
    truth, merged = fx.partition("truth"), fx.partition("merged")
    out = [("truth is an MSS", is_mss(X, truth), ""),
           ("truth in candidate set", in_candidate_set(X, truth, pr),
            f"rank sum {int(piece_ranks(X, truth).sum())}"),
           ("merged in candidate set", in_candidate_set(X, merged, pr),
            f"rank sum {int(piece_ranks(X, merged).sum())}"),
           ("candidate set is not a singleton", not truth.same_pieces(merged), "")]
    rec, _ = reduce_segments(X, merged)
    want = tuple(fx.partitions["truth"][4])
    ok = len(rec) >= 1 and tuple(rec[0].tolist()) == want
    out.append(("reduction recovers the rank-2 segment", ok,
                f"{len(rec)} recovered"))
    return out


def _check_ndg_int(fx):
    X = fx.X
    pr = _priors(fx.priors)
    truth, alt = fx.partition("truth"), fx.partition("alt")
    w = intersection_witness(X, truth, mode="sampled", budget=200)
    out = [("truth is an MSS", is_mss(X, truth), ""),
           ("truth is not intersected nondegenerately", not w.verdict,
            f"witness piece {w.witness['piece'] if w.witness else None}"),
           ("truth in candidate set", in_candidate_set(X, truth, pr), ""),
           ("alternative in candidate set", in_candidate_set(X, alt, pr),
            f"ranks {piece_ranks(X, alt).tolist()}")]
    ranks = piece_ranks(X, alt)
    low = [i for i in range(alt.K) if ranks[i] == ranks.min()]
    # the head columns are fixed, so a few of them fall in other pieces' spans
    truths = [set(t) for t in fx.partitions["truth"]]
    grabbed, recovers = {}, False
    for i in low:
        got = set(extend_segment(X, alt, i).pieces[i].tolist())
        grabbed[i] = sorted(got - set(alt.pieces[i].tolist()))
        recovers |= any(t <= got for t in truths)
    out.append(("smallest-rank extensions recover no segment", not recovers,
                f"samples moved {grabbed}"))
    for i, k in ((3, 0), (4, 1)):
        got = set(extend_segment(X, alt, i).pieces[i].tolist())
        want = set(fx.partitions["truth"][k])
        extra = sorted(got - want)
        out.append((f"extending piece {i} recovers segment {k}", want <= got,
                    f"extra samples {extra}"))
    return out


_CHECKS = {
    "example1-T2": _check_example1,
    "ndint": _check_ndint,
    "ndint-small": _check_ndint,
    "nd0": _check_nd0,
    "ndg-int": _check_ndg_int,
}


def verify_fixture(name: str, fx: Fixture | None = None) -> list:
    """Run the stated checks; returns ``(check, passed, detail)`` triples."""
    fx = fx or load_fixture(name)
    return [(c, bool(p), d) for c, p, d in _CHECKS[name](fx)]


if __name__ == "__main__":
    import sys
    write_fixtures(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "data")
