import numpy as np
import pytest
from scipy.linalg import block_diag

from mss.mcg import (McgParams, SmoothedObjective, cg_direction, default_W0, f_delta,
                     grad_f_delta, horizontal_project, hz_beta, line_search, mss_mcg,
                     q_delta)
from mss.numerics import InvalidInputError, SingularManifoldError, thin_svd
from mss.representation import off_block
from mss.spectral import spectral_partition
from mss.theory import Partition
from oracles import fd_directional


def random_state(seed, n=9, r=3, d=6, density=0.6):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((5, r)) @ rng.standard_normal((r, n))
    svd = thin_svd(X)
    W = rng.standard_normal((n - r, d - r))
    Omega = (rng.random((n, n)) < density) * rng.choice([1.0, 1.25], (n, n))
    np.fill_diagonal(Omega, 0)
    return svd, W, Omega, rng


def three_lines(seed):
    rng = np.random.default_rng(seed)
    dirs = np.array([[1, 0], [0, 1], [1, 1]], float).T
    A = [rng.uniform(0.5, 2, 4) * rng.choice([-1, 1], 4) for _ in range(3)]
    X = np.hstack([np.outer(dirs[:, k], A[k]) for k in range(3)])
    return X, block_diag(*[np.outer(a, a) / (a @ a) for a in A])


# -- smoothing and objective ---------------------------------------------------

def test_q_delta_values():
    assert q_delta(0.0, 0.2) == pytest.approx(0.1)
    np.testing.assert_allclose(q_delta(np.array([-3.0, 0.5]), 0.2), [3.0, 0.5])
    assert q_delta(0.2, 0.2) == pytest.approx(0.2)


def test_f_delta_zero_weights():
    svd, W, Omega, _ = random_state(0)
    assert f_delta(W, svd.V, svd.Vperp, 0 * Omega, 0.0, 0.1) == 0.0
    assert not grad_f_delta(W, svd.V, svd.Vperp, 0 * Omega, 0.0, 0.1).any()


def test_f_delta_equals_l1_when_smoother_inactive():
    svd, W, Omega, _ = random_state(1)
    obj = SmoothedObjective(svd.V, svd.Vperp, Omega, 0.0, 1.0)
    C = obj.C(W)
    delta = 0.5 * np.abs(Omega * C)[Omega > 0].min()
    assert f_delta(W, svd.V, svd.Vperp, Omega, 0.0, delta) == pytest.approx(np.abs(Omega * C).sum())


def test_delta_must_be_positive():
    svd, W, Omega, _ = random_state(2)
    with pytest.raises(InvalidInputError):
        f_delta(W, svd.V, svd.Vperp, Omega, 0.0, 0.0)


@pytest.mark.parametrize("seed", range(50))
def test_gradient_matches_central_differences(seed):
    svd, W, Omega, rng = random_state(seed)
    lam, delta = rng.choice([0.0, 0.7]), rng.uniform(0.05, 0.5)
    D = rng.standard_normal(W.shape)
    f = lambda Z: f_delta(Z, svd.V, svd.Vperp, Omega, lam, delta)
    G = grad_f_delta(W, svd.V, svd.Vperp, Omega, lam, delta)
    fd = fd_directional(f, W, D)
    assert abs(np.vdot(G, D) - fd) <= 1e-5 * max(abs(fd), 1.0)


def test_gradient_nonsymmetric_omega():
    svd, W, Omega, rng = random_state(3)
    Omega = np.triu(Omega)
    D = rng.standard_normal(W.shape)
    f = lambda Z: f_delta(Z, svd.V, svd.Vperp, Omega, 0.3, 0.2)
    G = grad_f_delta(W, svd.V, svd.Vperp, Omega, 0.3, 0.2)
    assert np.vdot(G, D) == pytest.approx(fd_directional(f, W, D), rel=1e-5)


def test_gradient_small_delta_is_subgradient():
    svd, W, Omega, _ = random_state(4)
    obj = SmoothedObjective(svd.V, svd.Vperp, Omega, 0.0, 1.0)
    C = obj.C(W)
    delta = 0.5 * np.abs(Omega * C)[Omega > 0].min()
    S = Omega * np.sign(C)
    want = 2 * svd.Vperp.T @ ((S + S.T) / 2) @ svd.Vperp @ W
    np.testing.assert_allclose(grad_f_delta(W, svd.V, svd.Vperp, Omega, 0.0, delta), want,
                               atol=1e-12)


# -- horizontal projection -----------------------------------------------------

def test_projection_of_vertical_direction_is_zero():
    rng = np.random.default_rng(5)
    W = rng.standard_normal((7, 3))
    N0 = rng.standard_normal((3, 3))
    N0 -= N0.T
    assert np.linalg.norm(horizontal_project(W, W @ N0)) < 1e-12


def test_projection_keeps_horizontal_direction():
    rng = np.random.default_rng(6)
    W = rng.standard_normal((7, 3))
    S = rng.standard_normal((3, 3))
    D = W @ np.linalg.solve(W.T @ W, S + S.T) + (np.eye(7) - W @ np.linalg.pinv(W)) @ rng.standard_normal((7, 3))
    np.testing.assert_allclose(horizontal_project(W, D), D, atol=1e-10)


def test_projection_properties():
    rng = np.random.default_rng(7)
    for _ in range(20):
        W = rng.standard_normal((8, 4))
        D = rng.standard_normal((8, 4))
        H = horizontal_project(W, D)
        assert np.linalg.norm(W.T @ H - H.T @ W) < 1e-10
        N = np.linalg.lstsq(W, D - H, rcond=None)[0]
        np.testing.assert_allclose(W @ N, D - H, atol=1e-10)
        np.testing.assert_allclose(N, -N.T, atol=1e-10)
        np.testing.assert_allclose(horizontal_project(W, H), H, atol=1e-12)
        np.testing.assert_allclose(W @ D.T + D @ W.T, W @ H.T + H @ W.T, atol=1e-10)


def test_projection_rank_deficient():
    W = np.ones((5, 2))
    with pytest.raises(SingularManifoldError):
        horizontal_project(W, W)


# -- conjugate direction -------------------------------------------------------

def test_cg_first_direction_is_normalized_steepest_descent():
    P = np.arange(6.0).reshape(3, 2)
    H, beta = cg_direction(P)
    assert beta == 0.0
    np.testing.assert_allclose(H, -P / np.linalg.norm(P))


def test_hz_beta_restart_on_orthogonal_pair():
    Y = np.array([[1.0, 0.0]])
    Z = np.array([[0.0, 1.0]])
    assert hz_beta(np.ones((1, 2)), Y, Z) == 0.0


def test_descent_bound_on_random_states():
    rng = np.random.default_rng(8)
    for _ in range(200):
        P, Pp, Hp = rng.standard_normal((3, 6, 2))
        H, _ = cg_direction(P, Pp, Hp, normalize=False)
        assert np.vdot(P, H) <= -7 / 8 * np.vdot(P, P) + 1e-12


# -- line search ---------------------------------------------------------------

class Quadratic:
    """f(W) = a/2 ||W||^2 with the solver's objective interface."""

    def __init__(self, a):
        self.a = a

    def C(self, W):
        return W

    def value_C(self, C):
        return 0.5 * self.a * float(np.sum(C * C))


def test_line_search_quadratic():
    p = McgParams()
    obj = Quadratic(3.0)
    W = np.array([[2.0, -1.0]])
    P = obj.a * W
    H = -P / np.linalg.norm(P)
    f0, slope = obj.value_C(W), float(np.vdot(P, H))
    res = line_search(obj, W, H, f0, slope, p, 1.0)
    # largest Armijo step along H has a closed form for the quadratic
    a_max = 2 * (1 - p.tau_armijo) * (-slope) / obj.a
    assert a_max * p.rho < res.alpha <= a_max
    assert not res.fallback_used


def test_line_search_maximal_start_no_extra_probes():
    p = McgParams()
    obj = Quadratic(3.0)
    W = np.array([[2.0, -1.0]])
    P = obj.a * W
    H = -P / np.linalg.norm(P)
    f0, slope = obj.value_C(W), float(np.vdot(P, H))
    a_max = 2 * (1 - p.tau_armijo) * (-slope) / obj.a
    res = line_search(obj, W, H, f0, slope, p, a_max * 0.99)
    assert res.probes == 2 and res.alpha == pytest.approx(a_max * 0.99)


def test_line_search_flat_direction_falls_back():
    class Flat(Quadratic):
        # numerically flat: every probe lands a rounding error above f(W)
        def value_C(self, C):
            return 1.0 + 1e-15

    res = line_search(Flat(1.0), np.ones((1, 2)), np.array([[1.0, 0.0]]), 1.0, -1e-16,
                      McgParams(), 1.0)
    assert res.fallback_used and res.alpha == 0.0 and res.probes == 10


def test_line_search_rejects_ascent():
    with pytest.raises(InvalidInputError):
        line_search(Quadratic(1.0), np.ones((1, 2)), np.ones((1, 2)), 1.0, 0.5, McgParams(), 1.0)


# -- solver --------------------------------------------------------------------

def test_default_w0():
    W0 = default_W0(5, 2)
    np.testing.assert_array_equal(W0, np.r_[np.eye(2), np.zeros((3, 2))])
    with pytest.raises(InvalidInputError):
        default_W0(2, 3)


def test_params_validation():
    with pytest.raises(InvalidInputError):
        McgParams(gamma=1.0)
    with pytest.raises(InvalidInputError):
        McgParams(k_max=0)


def test_zero_weights_stop_at_start():
    svd, _, Omega, _ = random_state(9)
    W0 = default_W0(svd.n - svd.r, 3)
    W, C, tr = mss_mcg(svd, 0 * Omega, W0)
    np.testing.assert_array_equal(W, W0)
    arr = tr.as_array()
    assert np.all(arr[:, 1] == 0) and np.all(arr[:, 2] == 0)


def test_three_lines_recovers_block_diagonal():
    X, Cs = three_lines(2)
    Om = 1 - np.eye(12)
    W, C, tr = mss_mcg(thin_svd(X), Om, d=3)
    truth = Partition.from_labels(np.repeat([1, 2, 3], 4))
    assert np.abs(Om * C).sum() == pytest.approx(np.abs(Om * Cs).sum(), abs=1e-2)
    assert np.abs(off_block(C, truth)).max() < 1e-2
    assert spectral_partition(np.abs(C) + np.abs(C.T), 3).same_pieces(truth)


def test_trace_monotone_per_level_and_across_levels():
    X, _ = three_lines(3)
    W, C, tr = mss_mcg(thin_svd(X), 1 - np.eye(12), d=3)
    levels = tr.levels()
    for L in levels:
        assert np.all(np.diff(L[:, 2]) <= 1e-12)
    ends = [L[-1, 2] for L in levels]
    assert np.all(np.diff(ends) <= 1e-12)


def test_nonnegative_weights_required():
    svd, W, Omega, _ = random_state(10)
    with pytest.raises(InvalidInputError):
        mss_mcg(svd, -Omega, W)
