import numpy as np
import pytest
from scipy.linalg import block_diag

from mss.numerics import InvalidInputError
from mss.spectral import (ActiveSet, active_set_from_memberships, build_active_set,
                          coarse_active_set, kmeans, normalized_embedding,
                          soft_memberships, spectral_partition)
from mss.theory import Partition
from oracles import brute_kmeans_2


def blocks(sizes, seed=0, eps=0.0):
    rng = np.random.default_rng(seed)
    A = block_diag(*[rng.uniform(0.5, 1.0, (s, s)) for s in sizes])
    A = A + eps * rng.uniform(0, 1, A.shape) * (A == 0)
    return (A + A.T) / 2


def test_active_set_zero_diagonal_and_validation():
    S = ActiveSet(np.ones((3, 3)))
    assert not np.diag(S.weights).any()
    with pytest.raises(InvalidInputError):
        ActiveSet(-np.ones((2, 2)))
    assert coarse_active_set(3).same(ActiveSet(1 - np.eye(3)))


def test_embedding_block_diagonal_rows():
    Y = normalized_embedding(blocks([4, 3, 5]), 3)
    np.testing.assert_allclose(np.linalg.norm(Y, axis=1), 1.0)
    groups = [range(0, 4), range(4, 7), range(7, 12)]
    for g in groups:
        for i in g:
            np.testing.assert_allclose(Y[i], Y[g[0]], atol=1e-10)
    G = np.array([Y[g[0]] for g in groups])
    np.testing.assert_allclose(G @ G.T, np.eye(3), atol=1e-10)


def test_embedding_identity():
    Y = normalized_embedding(np.eye(5), 5)
    np.testing.assert_allclose(np.abs(Y) @ np.abs(Y).T, np.eye(5), atol=1e-12)


def test_embedding_k_too_large():
    with pytest.raises(InvalidInputError):
        normalized_embedding(np.eye(3), 4)


def test_embedding_zero_row_is_floored():
    A = blocks([3, 3])
    A[0] = A[:, 0] = 0
    assert np.all(np.isfinite(normalized_embedding(A, 2)))


def test_perturbed_two_blocks_recovered():
    A = blocks([9, 11], seed=1, eps=1e-3)
    J = spectral_partition(A, 2)
    assert J.same_pieces(Partition([range(9), range(9, 20)], 20))


def test_kmeans_separated_clusters():
    rng = np.random.default_rng(2)
    P = np.r_[rng.normal(0, 0.1, (10, 2)), rng.normal(5, 0.1, (7, 2))]
    labels, C = kmeans(P, 2)
    assert len(set(labels[:10])) == 1 and len(set(labels[10:])) == 1
    assert labels[0] != labels[10]


def test_kmeans_single_cluster_is_mean():
    P = np.random.default_rng(3).standard_normal((6, 3))
    labels, C = kmeans(P, 1)
    np.testing.assert_allclose(C[0], P.mean(0))
    assert not labels.any()


@pytest.mark.parametrize("seed", range(5))
def test_kmeans_matches_exhaustive_optimum(seed):
    P = np.random.default_rng(seed).standard_normal((8, 2))
    labels, C = kmeans(P, 2)
    wcss = sum(((P[labels == k] - C[k]) ** 2).sum() for k in range(2))
    assert wcss == pytest.approx(brute_kmeans_2(P))


def test_kmeans_deterministic_and_validation():
    P = np.random.default_rng(4).standard_normal((15, 3))
    a, b = kmeans(P, 3, seed=7), kmeans(P, 3, seed=7)
    np.testing.assert_array_equal(a[0], b[0])
    with pytest.raises(InvalidInputError):
        kmeans(P, 16)


def test_exact_blocks_give_hard_active_set():
    A = blocks([4, 5, 3])
    S, J = build_active_set(A, 3)
    np.testing.assert_array_equal(S.weights, 1.0 - J.same_block())
    assert J.same_pieces(Partition([range(4), range(4, 9), range(9, 12)], 12))


def test_soft_memberships_equidistant_point():
    Y = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
    C = np.array([[1.0, 0.0], [-1.0, 0.0]])
    Q = soft_memberships(Y, C, 0.5)
    np.testing.assert_allclose(Q[0], [0.5, 0.5])
    np.testing.assert_allclose(Q[1], [1.0, 0.0])
    Om = active_set_from_memberships(Q)
    assert Om[0, 1] == 1.0 and Om[0, 2] == 1.0 and Om[0, 0] == 0.0


def test_soft_set_covers_hard_set():
    A = blocks([10, 10, 10], seed=5, eps=0.2)
    S, J = build_active_set(A, 3)
    off = 1.0 - J.same_block()
    assert np.all(S.weights[off > 0] == 1.0)


def test_build_active_set_deterministic():
    A = blocks([6, 6], seed=6, eps=0.3)
    (S1, J1), (S2, J2) = build_active_set(A, 2, seed=3), build_active_set(A, 2, seed=3)
    assert S1.same(S2) and J1 == J2
    with pytest.raises(InvalidInputError):
        build_active_set(A, 2, tau=1.0)
