import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iwaflat import group, height as ht, linalg
from iwaflat.errors import InputError, NotFoundError

H_SL2 = np.array([1.0, -1.0])
S_STAR = 0.27465307216702745   # log(3) / 4
H_STAR = 0.14384103622589045   # -log(sqrt(3) / 2)


def _sl2_problem(theta):
    return ht.HeightProblem(H_SL2, ht.rotation2(theta))


def test_frozen_constants():
    assert S_STAR == pytest.approx(np.log(3) / 4, abs=1e-16)
    assert H_STAR == pytest.approx(-np.log(np.sqrt(3) / 2), abs=1e-16)


@pytest.mark.parametrize("theta", [0.3, np.pi / 6, 1.2])
def test_sl2_height_closed_form(theta):
    p = _sl2_problem(theta)
    for s in (-4.0, -0.5, 0.0, 0.7, 12.0):
        assert ht.height(p, np.array([s, -s])) == pytest.approx(ht.sl2_height_closed_form(theta, s), rel=1e-13, abs=1e-13)


@pytest.mark.parametrize("theta", [0.3, np.pi / 6, 1.2])
def test_sl2_hessian_closed_form(theta):
    # h''(s) = -16 u v / (u + v)^2 with u = sin^2 e^{2s}, v = cos^2 e^{-2s}; s = tau / sqrt 2
    p = _sl2_problem(theta)
    for s in (-1.0, 0.0, 0.4, 3.0):
        u, v = np.sin(theta) ** 2 * np.exp(2 * s), np.cos(theta) ** 2 * np.exp(-2 * s)
        expect = -16 * u * v / (u + v) ** 2 / 2
        assert ht.hess_height(p, np.array([s, -s]))[0, 0] == pytest.approx(expect, rel=1e-12)


def test_sl2_critical_point(quiet):
    r = ht.find_critical(_sl2_problem(np.pi / 6))
    assert r.status == "found"
    assert r.a_star[0] == pytest.approx(S_STAR, abs=1e-10)
    assert r.a_star[1] == pytest.approx(-S_STAR, abs=1e-10)
    assert r.h_star == pytest.approx(H_STAR, abs=1e-12)
    assert r.agreement and r.probes_ok
    assert max(r.hessian_eigenvalues) < 0
    js = r.to_json()
    assert js["status"] == "found" and len(js["a_star"]) == 2


@pytest.mark.parametrize("n", [2, 3, 4])
def test_identity_has_no_critical_point(n, quiet):
    r = ht.find_critical(ht.HeightProblem(group.dominant_default(n), np.eye(n)))
    assert r.status == "not_found"
    assert r.a_star is None and r.exit_direction is not None


def test_far_critical_point_needs_larger_radius(quiet):
    # s* = log(cot^2 theta) / 4 is about 34.5, beyond the default escape radius
    p = _sl2_problem(1e-30)
    assert ht.find_critical(p).status != "found"
    r = ht.find_critical(p, ht.CriticalOptions(r_escape=120.0, max_radius=20.0, probe_radius=1.0))
    assert r.status == "found"
    assert r.a_star[0] == pytest.approx(np.log(1 / np.tan(1e-30) ** 2) / 4, rel=1e-9)


def test_non_generic_H0_warns():
    with pytest.warns(UserWarning):
        ht.find_critical(ht.HeightProblem(np.array([1.0, 0.0, -1.0]), np.eye(3)), ht.CriticalOptions(starts=1))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**31 - 1))
def test_hessian_polarization_equals_root_sum(n, seed):
    r = np.random.default_rng(seed)
    H0 = group.random_cartan(n, r)
    k = linalg.haar_orthogonal(n, r)
    H = group.random_cartan(n, r)
    q = ht.hessian_form(H0, k, H)
    assert q == pytest.approx(ht.root_sum_form(H0, k, H), rel=1e-10, abs=1e-13)
    B = linalg.orthonormal_traceless_basis(n)
    M = ht.hessian_from_k(H0, k, B)
    c = B.T @ H
    assert c @ M @ c == pytest.approx(q, rel=1e-10, abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**31 - 1))
def test_gradient_is_diagonal_of_conjugate(n, seed):
    r = np.random.default_rng(seed)
    p = ht.HeightProblem(group.random_cartan(n, r), group.random_sl(n, r))
    t = p.to_t(r.standard_normal(n - 1))
    k = group.flat_iwasawa(p.g, t).k_part
    np.testing.assert_allclose(ht.grad_height(p, t), np.diag(k.T @ np.diag(p.H0) @ k), atol=1e-14)
    assert abs(ht.grad_height(p, t).sum()) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**31 - 1))
def test_f_jacobian_matches_finite_differences(n, seed):
    from scipy.linalg import expm

    r = np.random.default_rng(seed)
    H0 = group.random_cartan(n, r)
    k = linalg.haar_orthogonal(n, r)
    J = ht.f_jacobian(k, H0)
    x = r.standard_normal(n * (n - 1) // 2)
    X = ht.so_from_coords(x, n)
    h = 1e-6
    fd = (ht.f_map(k @ expm(h * X), H0) - ht.f_map(k @ expm(-h * X), H0)) / (2 * h)
    np.testing.assert_allclose(J @ x, fd, atol=1e-8)
    G = ht.riemannian_grad_g(k, H0)
    fdg = (ht.g_map(k @ expm(h * X), H0) - ht.g_map(k @ expm(-h * X), H0)) / (2 * h)
    assert np.sum(G * X) == pytest.approx(fdg, abs=1e-8)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_c_point(n, rng):
    H0 = group.random_cartan(n, rng)
    c = ht.find_C_point(H0, rng)
    np.testing.assert_allclose(ht.f_map(c.k, H0), 0.0, atol=1e-12)
    assert c.residual <= 1e-12 * H0 @ H0
    assert c.jacobian_rank == ht.C_tangent_rank(c.k, H0) == n - 1
    np.testing.assert_allclose(c.k @ c.k.T, np.eye(n), atol=1e-12)
    assert ht.m_bi_invariance_residual(c, H0, rng) <= 1e-12 * H0 @ H0
    assert set(c.to_json()) == {"k", "residual", "jacobian_rank", "restarts_used"}


def test_sl2_c_points_are_eighth_turns():
    c = ht.find_C_point(H_SL2, seed=1)
    np.testing.assert_allclose(np.abs(c.k), np.full((2, 2), 2 ** -0.5), atol=1e-7)


def test_c_point_not_found():
    with pytest.raises(NotFoundError) as info:
        ht.find_C_point(H_SL2, seed=0, restarts=1, max_iter=0)
    assert info.value.best is not None


def test_level_set_sample():
    H0 = group.dominant_default(3)
    a = np.array([0.4, -0.1, -0.3])
    for k in ht.level_set_sample(H0, a, 3, seed=2):
        assert np.linalg.norm(ht.grad_height(ht.HeightProblem(H0, k), a)) <= 1e-8 * np.linalg.norm(H0)


@pytest.mark.parametrize("abc, equal", [
    ((1, 1, -2), True), ((-2, 1, 1), True), ((-1, -1, 2), True),
    ((3, -1, -2), False), ((1, 0, -1), False),
])
def test_am_gm(abc, equal):
    ok, slack = ht.am_gm_check(*abc)
    assert ok and slack >= -1e-12
    assert ht.am_gm_equality(*abc) is equal
    with pytest.raises(InputError):
        ht.am_gm_check(1, 1, 1)


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_sl3_zero_diagonal_isospectral(a, b):
    H0 = np.array([a, b, -a - b])
    X = ht.sl3_zero_diagonal(H0)
    np.testing.assert_array_equal(np.diag(X), 0.0)
    np.testing.assert_allclose(X, X.T)
    np.testing.assert_allclose(np.linalg.eigvalsh(X), np.sort(H0), atol=1e-9 * (1 + np.abs(H0).max()))


def test_sl3_zero_diagonal_frozen():
    # H0 = (1, 0, -1): abc = 0 so r = S/2 = 1/2 and z = 0
    X = ht.sl3_zero_diagonal(np.array([1.0, 0.0, -1.0]))
    np.testing.assert_allclose(X, [[0, 0.5 ** 0.5, 0.5 ** 0.5], [0.5 ** 0.5, 0, 0], [0.5 ** 0.5, 0, 0]], atol=1e-12)
    with pytest.raises(InputError):
        ht.sl3_zero_diagonal(np.array([1.0, -1.0]))


@pytest.mark.parametrize("n", range(2, 9))
def test_dim_identity(n):
    d = ht.dim_identity_check(n)
    assert d["consistent"] and d["sum_multiplicities"] == n * (n - 1) // 2
    assert d["equals_dim_A"] is (n == 2)


def test_common_critical_experiment():
    prop = ht.common_critical_experiment([1.0, 0.0, -1.0], [2.0, 0.0, -2.0], seed=0, restarts=4)
    assert prop["relative_floor"] <= 1e-20
    other = ht.common_critical_experiment([1.0, 0.0, -1.0], [1.0, 1.0, -2.0], seed=0, restarts=4)
    assert other["relative_floor"] > 1e-3


def test_height_problem_validation():
    with pytest.raises(InputError):
        ht.HeightProblem(np.array([1.0, 1.0]), np.eye(2))
    with pytest.raises(InputError):
        ht.HeightProblem(np.array([1.0, 0.0, -1.0]), np.eye(2))
    with pytest.raises(InputError):
        ht.HeightProblem(np.array([1.0, -1.0]), 2 * np.eye(2))


def test_random_found_problem(quiet):
    rng = np.random.default_rng(4)
    p, r = ht.random_found_problem(group.dominant_default(3), rng)
    assert r.status == "found"
    assert np.linalg.norm(ht.grad_height(p, r.a_star)) <= 1e-9


def test_trivial_values(rng):
    H0 = group.dominant_default(4)
    np.testing.assert_allclose(ht.grad_height(ht.HeightProblem(H0, np.eye(4)), np.zeros(4)), H0, atol=1e-15)
    np.testing.assert_allclose(ht.f_map(np.eye(4), H0), H0)
    assert ht.g_map(np.eye(4), H0) == pytest.approx(H0 @ H0)
    w = group.permutation_matrix((2, 0, 3, 1))
    B = linalg.orthonormal_traceless_basis(4)
    np.testing.assert_allclose(ht.hessian_from_k(H0, w, B), 0.0, atol=1e-15)
    # f is equivariant under M': f(k w) is a permutation of f(k)
    k = linalg.haar_orthogonal(4, rng)
    np.testing.assert_allclose(np.sort(ht.f_map(k @ w, H0)), np.sort(ht.f_map(k, H0)), atol=1e-14)


def test_am_gm_frozen_slacks():
    assert ht.am_gm_check(1, 1, -2)[1] == pytest.approx(0.0, abs=1e-12)  # 8 - 8
    assert ht.am_gm_check(1, 0, -1)[1] == pytest.approx((2 / 3) ** 3)


def test_sl2_c_point_rank_one():
    c = ht.find_C_point(H_SL2, seed=0)
    assert c.jacobian_rank == 1


def test_level_set_sl2_closed_form():
    # k = kappa(c exp(-a)) has its critical point at a; for a = s diag(1, -1) the
    # rotation angle theta satisfies e^{4s} = cot^2 theta
    s = 0.35
    a = np.array([s, -s])
    for k in ht.level_set_sample(H_SL2, a, 4, seed=7):
        theta = np.arctan2(k[1, 0], k[0, 0])
        assert np.exp(4 * s) == pytest.approx(1 / np.tan(theta) ** 2, rel=1e-9)
    ks = ht.level_set_sample(H_SL2, np.zeros(2), 2, seed=7)
    for k in ks:
        np.testing.assert_allclose(ht.f_map(k, H_SL2), 0.0, atol=1e-12)
