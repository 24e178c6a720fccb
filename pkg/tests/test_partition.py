import csv

import numpy as np
import pytest

from iwaflat import group, linalg, partition
from iwaflat.errors import InputError
from iwaflat.representation import adjoint_rep, std_rep

E1, E2 = (1, 0), (0, 1)


def _rot(n, i, j, theta):
    r = np.eye(n)
    c, s = np.cos(theta), np.sin(theta)
    r[i, i] = r[j, j] = c
    r[i, j], r[j, i] = -s, s
    return r


def test_sl2_signatures():
    r = std_rep(2)
    ident = partition.classify(np.eye(2), r)
    rot = partition.classify(group.permutation_matrix((1, 0)), r)
    gen = partition.classify(group.random_sl(2, np.random.default_rng(3)), r)
    assert ident.support(E1) == (E2,)
    assert rot.support(E1) == (E1,)
    assert gen.support(E1) == (E1, E2)
    assert ident.support(E2) == ()
    assert gen == partition.generic_signature(r)
    assert ident.union(rot) == gen


def test_signature_json():
    sig = partition.classify(np.eye(2), std_rep(2))
    js = sig.to_json()
    assert js["rep"] == "std" and js["n"] == 2


def test_sl3_structured_families_by_dimension():
    rng = np.random.default_rng(5)
    r = std_rep(3)
    perms = [group.permutation_matrix(p) for p in [(0, 1, 2), (1, 0, 2), (0, 2, 1), (1, 2, 0), (2, 0, 1), (2, 1, 0)]]
    fam = {0: [], 1: [], 2: [], 3: []}
    for w in perms:
        fam[0].append(w)
        for _ in range(3):
            a, b = _rot(3, 0, 1, rng.uniform(0.2, 1.3)), _rot(3, 1, 2, rng.uniform(0.2, 1.3))
            fam[1] += [a @ w, b @ w]
            fam[2] += [a @ b @ w, b @ a @ w]
    fam[3] = [linalg.haar_orthogonal(3, rng) for _ in range(20)]
    counts = {d: len({partition.classify(k, r) for k in ks}) for d, ks in fam.items()}
    assert counts == {0: 6, 1: 6, 2: 6, 3: 1}
    assert len({partition.classify(k, r) for ks in fam.values() for k in ks}) == 19


@pytest.mark.parametrize("n", [2, 3])
def test_representation_independence(n):
    res = partition.rep_independence_experiment(n, 16, seed=n)
    assert res["disagreements"] == []
    assert res["std_classes"] == res["adjoint_classes"] > 1


def test_rep_independence_rejects_large_n():
    with pytest.raises(InputError):
        partition.rep_independence_experiment(4)


@pytest.mark.parametrize("rep", [std_rep(3), adjoint_rep(2), adjoint_rep(3)])
def test_left_invariance(rep, rng):
    for g in partition.structured_samples(rep.n, 10, seed=rng.integers(2**31)):
        assert partition.left_invariance_check(g, rep, seed=rng.integers(2**31))
        assert partition.left_invariance_check(g, rep, seed=rng.integers(2**31), a_scale=3.0)


def test_extreme_diagonal_keeps_class(rng):
    r = std_rep(3)
    for g in partition.structured_samples(3, 10, seed=1):
        a = partition.extreme_diagonal(3, rng)
        assert np.prod(np.diag(a)) == pytest.approx(1.0)
        assert partition.classify(a @ g, r) == partition.classify(g, r)


def test_density_small_sample():
    assert partition.density_estimate(adjoint_rep(2), 200, seed=0) == 1.0
    with pytest.raises(InputError):
        partition.density_estimate(std_rep(2), 0)


def test_default_rays():
    R = partition.default_rays(3, 6, seed=0)
    assert R.shape == (6, 3)
    np.testing.assert_allclose(np.linalg.norm(R, axis=1), 1.0)
    np.testing.assert_allclose(R.sum(axis=1), 0.0, atol=1e-15)
    assert len({tuple(np.round(r, 12)) for r in R}) == 6
    assert partition.default_rays(2, 6, seed=1).shape == (6, 2)
    assert partition.default_rays(4, 6, seed=1).shape == (6, 4)


def test_sl2_bound_matrix_is_analytic(rng):
    for _ in range(20):
        g = group.random_sl(2, rng)
        B = partition.n_bound_matrix(g, std_rep(2))
        assert B[0, 1] == pytest.approx(partition.sl2_analytic_bound(g), rel=1e-12)
    with pytest.raises(InputError):
        partition.sl2_analytic_bound(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_n_bound_on_nongeneric_element():
    # the N-part of u exp(t) is u itself for unipotent upper triangular u
    u = np.array([[1.0, 2.0, -1.0], [0.0, 1.0, 0.5], [0.0, 0.0, 1.0]])
    rep = partition.n_bound_experiment(u, std_rep(3), seed=0)
    np.testing.assert_allclose(rep.observed, np.linalg.norm(u - np.eye(3)), rtol=1e-12)
    assert rep.bounded


@pytest.mark.parametrize("rep", [std_rep(3), adjoint_rep(2)])
def test_n_bound_report(rep, tmp_path, rng):
    g = group.random_sl(rep.n, rng)
    r = partition.n_bound_experiment(g, rep, g_id="x", seed=2, grid=11)
    assert r.bounded and r.entrywise_ok
    js = r.to_json()
    assert js["grid_points"] == 11 and js["g_id"] == "x" and js["rep"] == rep.name
    path = tmp_path / "nb.csv"
    r.write_csv(path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["ray", "t", "n_minus_I_fro"]
    assert len(rows) == 1 + 6 * 11


def test_classify_singular_raises():
    from iwaflat.errors import ConsistencyError

    with pytest.raises(ConsistencyError):
        partition.classify(np.array([[1.0, 0.0], [0.0, 0.0]]), std_rep(2))
