import numpy as np
import pytest

from mss.numerics import InvalidInputError, numerical_rank, thin_svd
from mss.representation import (block_connectivity, is_block_diagonal, lrr,
                                make_unconnected_block, make_unconnected_representation,
                                representation_from_H, representation_from_factor,
                                representation_symmetric)
from mss.theory import Partition


def union(dims, counts, m, seed, r=None):
    """Samples from random subspaces, optionally inside a common r-dim space."""
    rng = np.random.default_rng(seed)
    U = np.linalg.qr(rng.standard_normal((m, r or m)))[0]
    cols, labels = [], []
    for k, (d, c) in enumerate(zip(dims, counts)):
        B = U @ np.linalg.qr(rng.standard_normal((U.shape[1], d)))[0]
        cols.append(B @ rng.uniform(-1, 1, (d, c)))
        labels += [k + 1] * c
    return np.hstack(cols), np.array(labels)


@pytest.fixture
def inst():
    X, lab = union([2, 2], [5, 6], 6, 0, r=3)
    return X, thin_svd(X), Partition.from_labels(lab)


def test_H_zero_gives_lrr(inst):
    X, svd, _ = inst
    rep = representation_from_H(svd, np.zeros((svd.n - svd.r, svd.n)))
    np.testing.assert_allclose(rep.C, svd.V @ svd.V.T)
    np.testing.assert_allclose(rep.C, lrr(X))


def test_H_block_sets_rank(inst):
    X, svd, _ = inst
    n, r = svd.n, svd.r
    for rp in range(r, n + 1):
        Hs = np.zeros((n - r, n - r))
        Hs[: rp - r, : rp - r] = np.diag(np.arange(1, rp - r + 1))
        C = representation_from_H(svd, Hs @ svd.Vperp.T).C
        assert numerical_rank(C) == rp


def test_random_H_is_valid(inst):
    X, svd, _ = inst
    H = np.random.default_rng(1).standard_normal((svd.n - svd.r, svd.n))
    rep = representation_from_H(svd, H)
    assert rep.residual(X) < 1e-10
    assert numerical_rank(rep.C) >= svd.r


def test_H_shape_checked(inst):
    _, svd, _ = inst
    with pytest.raises(InvalidInputError):
        representation_from_H(svd, np.zeros((2, 2)))


def test_symmetric_extremes(inst):
    X, svd, _ = inst
    k = svd.n - svd.r
    np.testing.assert_allclose(representation_symmetric(svd, np.zeros((k, k))).C, svd.lrr())
    np.testing.assert_allclose(representation_symmetric(svd, np.eye(k)).C, np.eye(svd.n),
                               atol=1e-12)


def test_symmetric_factor_rank(inst):
    X, svd, _ = inst
    W = np.random.default_rng(2).standard_normal((svd.n - svd.r, 2))
    rep = representation_symmetric(svd, W @ W.T)
    assert numerical_rank(rep.C) == svd.r + 2
    assert rep.residual(X) < 1e-10
    np.testing.assert_allclose(representation_from_factor(svd, W).C, rep.C, atol=1e-12)


def test_symmetric_rejects_asymmetric(inst):
    _, svd, _ = inst
    k = svd.n - svd.r
    with pytest.raises(InvalidInputError):
        representation_symmetric(svd, np.triu(np.ones((k, k))))


def test_lemma_bounds_and_trace_rule(inst):
    X, svd, _ = inst
    rng = np.random.default_rng(3)
    for _ in range(5):
        H = rng.standard_normal((svd.n - svd.r, svd.n))
        C = representation_from_H(svd, H).C
        assert numerical_rank(C) >= svd.r
        assert np.linalg.svd(C, compute_uv=False).sum() >= svd.r - 1e-9
    # a zero-diagonal representation needs rank at least r + 1
    n = svd.n
    C = np.zeros((n, n))
    for j in range(n):
        others = [i for i in range(n) if i != j]
        C[others, j] = np.linalg.lstsq(X[:, others], X[:, j], rcond=None)[0]
    assert np.linalg.norm(X - X @ C) < 1e-10 * np.linalg.norm(X)
    assert np.all(np.diag(C) == 0)
    assert numerical_rank(C) >= svd.r + 1


def test_unconnected_block_identity_tail():
    Xk, _ = union([2], [5], 4, 4)
    rep = make_unconnected_block(Xk, 5)
    assert rep.residual(Xk) < 1e-10
    assert numerical_rank(rep.C) == 5
    assert rep.C[4, 4] == 1.0 and np.all(rep.C[4, :4] == 0)


def test_unconnected_block_two_groups():
    Xk, _ = union([2], [6], 4, 5)
    rep = make_unconnected_block(Xk, 4)
    C = rep.C
    assert numerical_rank(C) == 4
    assert rep.residual(Xk) < 1e-10
    assert np.all(C[:3, 3:] == 0) and np.all(C[3:, :3] == 0)
    assert numerical_rank(C[:3, :3]) == 2 and numerical_rank(C[3:, 3:]) == 2
    assert block_connectivity(C, Partition([range(6)], 6)) == [False]


def test_unconnected_block_boundary():
    Xk, _ = union([2], [6], 4, 6)
    with pytest.raises(InvalidInputError):
        make_unconnected_block(Xk, 2)
    with pytest.raises(InvalidInputError):
        make_unconnected_block(Xk, 7)


def test_unconnected_representation():
    X, lab = union([2, 2, 3], [6, 6, 8], 12, 7)
    P = Partition.from_labels(lab)
    d = 7
    rep = make_unconnected_representation(X, P, d + 1)
    assert numerical_rank(rep.C) == d + 1 and is_block_diagonal(rep.C, P)
    assert block_connectivity(rep.C, P) == [False, True, True]
    rep = make_unconnected_representation(X, P, d + 3)
    assert numerical_rank(rep.C) == d + 3
    assert rep.residual(X) < 1e-10
    assert not all(block_connectivity(rep.C, P))
    rep = make_unconnected_representation(X, P, X.shape[1])
    assert numerical_rank(rep.C) == X.shape[1]
    with pytest.raises(InvalidInputError):
        make_unconnected_representation(X, P, d)


def test_block_diagonal_examples():
    X, lab = union([2, 3], [5, 6], 9, 8)
    P = Partition.from_labels(lab)
    assert is_block_diagonal(lrr(X), P)
    X2, lab2 = union([2, 2], [5, 5], 6, 9, r=3)
    assert not is_block_diagonal(lrr(X2), Partition.from_labels(lab2))
    assert is_block_diagonal(np.eye(7), Partition([[0, 3], [1, 2, 4, 5, 6]], 7))


def test_connectivity_examples():
    P = Partition([range(4), range(4, 7)], 7)
    C = np.zeros((7, 7))
    C[:4, :4] = 0.25
    C[4:, 4:] = 1 / 3
    assert block_connectivity(C, P) == [True, True]
    X, lab = union([2, 3], [6, 7], 10, 10)
    P = Partition.from_labels(lab)
    Ck = lrr(X)
    assert block_connectivity(Ck, P) == [True, True]


def test_msdr_uniqueness():
    X, lab = union([2, 3], [7, 8], 10, 11)
    P = Partition.from_labels(lab)
    C = lrr(X)
    want = np.zeros_like(C)
    for p in P.pieces:
        want[np.ix_(p, p)] = lrr(X[:, p])
    assert np.linalg.norm(C - want) < 1e-8
