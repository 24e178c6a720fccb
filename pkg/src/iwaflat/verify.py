"""Invariant suites over all modules, used by ``iwaflat verify``.

Each suite returns a list of :class:`Check` records.  All randomness flows
from one seed, so a run is reproducible bit for bit.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import flow, group, height, linalg, partition, representation
from .errors import NotFoundError


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    metrics: dict

    def to_json(self) -> dict:
        return {"suite": self.suite, "name": self.name, "passed": bool(self.passed), "metrics": self.metrics}


DEFAULT_SIZES = {
    "linalg": 100,
    "iwasawa": 200,
    "rep": 20,
    "partition": 50,
    "density": 500,
    "nbound": 5,
    "fd": 20,
    "negdef": 50,
    "critical": 5,
    "cpoint": 3,
    "amgm": 10000,
    "flow": 5,
}


def _f(x) -> float:
    return float(x)


def linalg_suite(n, rng, sizes, tol):
    worst_gram = worst_norm = worst_coeff = 0.0
    for _ in range(sizes["linalg"]):
        k = int(rng.integers(1, n))
        W = rng.standard_normal((k, n))
        v = rng.standard_normal(n)
        w = linalg.wedge(W)
        worst_gram = max(worst_gram, abs(w.norm() ** 2 - linalg.gram_det(W)) / linalg.gram_det(W))
        coef, *_ = np.linalg.lstsq(W.T, v, rcond=None)
        resid = np.linalg.norm(v - W.T @ coef)
        worst_norm = max(worst_norm, abs(linalg.proj_norm_via_wedge(v, W) - resid) / max(resid, 1e-300))
        for i in range(k):
            c = linalg.proj_coeff_via_wedge(v, W, i)
            worst_coeff = max(worst_coeff, abs(c - coef[i]) / max(np.linalg.norm(coef), 1e-300))
    t = tol.get("wedge", 1e-10)
    return [
        Check("linalg", "wedge_norm_equals_gram_det", worst_gram <= t, {"max_rel_err": _f(worst_gram)}),
        Check("linalg", "proj_norm_matches_normal_equations", worst_norm <= t, {"max_rel_err": _f(worst_norm)}),
        Check("linalg", "proj_coeff_matches_normal_equations", worst_coeff <= t, {"max_rel_err": _f(worst_coeff)}),
    ]


def group_suite(n, rng, sizes, tol):
    rec = orth = tri = 0.0
    equiv = 0.0
    for _ in range(sizes["iwasawa"]):
        g = group.random_sl(n, rng)
        f = group.iwasawa(g)
        rec = max(rec, np.linalg.norm(f.product() - g) / np.linalg.norm(g))
        orth = max(orth, np.linalg.norm(f.k_part @ f.k_part.T - np.eye(n)))
        tri = max(tri, np.abs(np.tril(f.n_part, -1)).max(), np.abs(np.diag(f.n_part) - 1).max())
        t = group.random_cartan(n, rng, normalize=False)
        equiv = max(equiv, np.abs(group.height_H(group.exp_diag(t) @ g) - t - f.H).max())
    checks = [
        Check("group", "iwasawa_reconstruction", rec <= tol.get("reconstruction", 1e-10), {"max_rel_err": _f(rec)}),
        Check("group", "k_part_orthogonal", orth <= tol.get("orthogonality", 1e-12) * n, {"max_err": _f(orth)}),
        Check("group", "n_part_unipotent", tri == 0.0 or tri <= 1e-15, {"max_err": _f(tri)}),
        Check("group", "height_left_A_equivariant", equiv <= 1e-10, {"max_err": _f(equiv)}),
    ]
    if n >= 4:
        blk = 0.0
        for _ in range(20):
            g = np.zeros((n, n))
            g[:2, :2] = group.random_sl(2, rng)
            g[2:, 2:] = group.random_sl(n - 2, rng)
            k = group.kappa(g)
            blk = max(blk, np.abs(k[:2, 2:]).max(), np.abs(k[2:, :2]).max())
        checks.append(Check("group", "kappa_preserves_block_diagonal", blk <= 1e-12, {"max_offblock": _f(blk)}))
    flat = 0.0
    for _ in range(20):
        g = group.random_sl(n, rng)
        t = group.random_cartan(n, rng)
        a = group.flat_iwasawa(g, t)
        b = group.iwasawa(g @ group.exp_diag(t))
        flat = max(flat, np.abs(a.k_part - b.k_part).max(), np.abs(a.n_part - b.n_part).max(), np.abs(a.H - b.H).max())
    checks.append(Check("group", "flat_route_matches_gram_schmidt", flat <= 1e-10, {"max_err": _f(flat)}))
    return checks


def representation_suite(n, rng, sizes, tol):
    checks = []
    for rep in (representation.std_rep(n), representation.adjoint_rep(n)):
        shape = hom = 0.0
        for _ in range(sizes["rep"]):
            g, h = group.random_sl(n, rng), group.random_sl(n, rng)
            f = group.iwasawa(g)
            N, A, K = rep(f.n_part), rep(f.a_part), rep(f.k_part)
            shape = max(shape, np.abs(np.tril(N, -1)).max(), np.abs(np.diag(N) - 1).max(),
                        np.abs(A - np.diag(np.diag(A))).max(), np.abs(K @ K.T - np.eye(rep.dim)).max())
            hom = max(hom, np.abs(rep(g) @ rep(h) - rep(g @ h)).max() / (np.abs(rep(g)).max() * np.abs(rep(h)).max()))
        checks.append(Check("representation", f"{rep.name}_iwasawa_compatible", shape <= 1e-10, {"max_err": _f(shape)}))
        checks.append(Check("representation", f"{rep.name}_homomorphism", hom <= 1e-10, {"max_rel_err": _f(hom)}))
    return checks


def partition_suite(n, rng, sizes, tol, rep_name="std"):
    rep = representation.get_rep(rep_name, n)
    eps = tol.get("support", partition.SUPPORT_RTOL)
    inv = all(partition.left_invariance_check(group.random_sl(n, rng), rep, rng, eps_rel=eps)
              for _ in range(sizes["partition"]))
    generic = partition.generic_signature(rep, 8, rng)
    dens = partition.density_estimate(rep, sizes["density"], rng, generic)
    det = all(partition.classify(g, rep, eps) == partition.classify(g, rep, eps)
              for g in [group.random_sl(n, rng) for _ in range(5)])
    ok_bound = True
    worst_ratio = 0.0
    sl2 = 0.0
    for i in range(sizes["nbound"]):
        g = group.random_sl(n, rng)
        r = partition.n_bound_experiment(g, rep, g_id=f"g{i}", seed=rng)
        ok_bound &= r.bounded
        worst_ratio = max(worst_ratio, r.observed_sup / r.theoretical_bound)
        if n == 2 and rep_name == "std":
            sl2 = max(sl2, abs(r.bound_matrix[0, 1] - partition.sl2_analytic_bound(g)) / partition.sl2_analytic_bound(g))
    checks = [
        Check("partition", "nam_left_invariance", inv, {"samples": sizes["partition"]}),
        Check("partition", "classification_deterministic", det, {}),
        Check("partition", "generic_density", dens == 1.0, {"density": _f(dens), "samples": sizes["density"]}),
        Check("partition", "n_bound_holds", ok_bound, {"max_observed_over_bound": _f(worst_ratio)}),
    ]
    if n == 2 and rep_name == "std":
        checks.append(Check("partition", "sl2_analytic_bound", sl2 <= 1e-8, {"max_rel_err": _f(sl2)}))
        sigs = {partition.classify(g, rep) for g in _sl2_structured(rng)}
        checks.append(Check("partition", "sl2_three_classes", len(sigs) == 3, {"classes": len(sigs)}))
    return checks


def _sl2_structured(rng):
    w = np.array([[0.0, 1.0], [-1.0, 0.0]])
    out = []
    for _ in range(10):
        p = group.random_unipotent(2, rng) @ group.random_positive_diagonal(2, rng) @ group.random_M(2, rng)
        out += [p, p @ w, group.random_sl(2, rng)]
    return out


def height_suite(n, rng, sizes, tol):
    checks = []
    gerr = herr = 0.0
    h = 1e-5
    for _ in range(sizes["fd"]):
        H0 = group.random_cartan(n, rng)
        p = height.HeightProblem(H0, group.random_sl(n, rng))
        tau = rng.standard_normal(n - 1)
        E = np.eye(n - 1)
        gr = p.basis.T @ height.grad_height(p, p.to_t(tau))
        fd = np.array([(height.height(p, p.to_t(tau + h * e)) - height.height(p, p.to_t(tau - h * e))) / (2 * h) for e in E])
        gerr = max(gerr, np.linalg.norm(gr - fd) / max(np.linalg.norm(gr), 1e-300))
        Hs = height.hess_height(p, p.to_t(tau))
        fdh = np.array([(p.basis.T @ (height.grad_height(p, p.to_t(tau + h * e)) - height.grad_height(p, p.to_t(tau - h * e)))) / (2 * h) for e in E])
        herr = max(herr, np.linalg.norm(Hs - fdh) / max(np.linalg.norm(Hs), 1e-300))
    checks.append(Check("height", "gradient_matches_finite_differences", gerr <= tol.get("grad", 1e-6), {"max_rel_err": _f(gerr)}))
    checks.append(Check("height", "hessian_matches_finite_differences", herr <= tol.get("hess", 1e-5), {"max_rel_err": _f(herr)}))

    H0 = np.sort(group.random_cartan(n, rng))[::-1]
    worst = -np.inf
    for _ in range(sizes["negdef"]):
        p = height.HeightProblem(H0, group.random_sl(n, rng))
        ev = np.linalg.eigvalsh(height.hess_height(p, p.to_t(rng.standard_normal(n - 1))))
        worst = max(worst, ev.max() / np.linalg.norm(H0))
    checks.append(Check("height", "hessian_negative_definite", worst < -1e-10, {"max_scaled_eigenvalue": _f(worst)}))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if n == 2:
            r = height.find_critical(height.HeightProblem(np.array([1.0, -1.0]), height.rotation2(np.pi / 6)))
            s = r.a_star[0] if r.status == "found" else np.nan
            ok = abs(s - np.log(3) / 4) <= 1e-8 and abs(r.h_star - (-np.log(np.sqrt(3) / 2))) <= 1e-8
            checks.append(Check("height", "sl2_closed_form_critical_point", bool(ok), {"s_star": _f(s), "h_star": _f(r.h_star if r.h_star is not None else np.nan)}))
        agree = probes = negative = True
        found = 0
        for _ in range(sizes["critical"]):
            try:
                p, r = height.random_found_problem(H0, rng, max_tries=20, options=height.CriticalOptions(seed=int(rng.integers(2**31))))
            except NotFoundError:
                continue
            found += 1
            agree &= r.agreement
            probes &= bool(r.probes_ok)
            negative &= max(r.hessian_eigenvalues) < 0
        checks.append(Check("height", "critical_point_unique_and_maximal", found > 0 and agree and probes and negative,
                            {"found": found, "agreement": bool(agree), "probes": bool(probes), "negative_definite": bool(negative)}))
        r = height.find_critical(height.HeightProblem(H0, np.eye(n)))
        checks.append(Check("height", "identity_has_no_critical_point", r.status == "not_found", {"status": r.status}))

        res = 0.0
        rank_ok = True
        for _ in range(sizes["cpoint"]):
            Hc = group.random_cartan(n, rng)
            c = height.find_C_point(Hc, rng)
            res = max(res, c.residual / float(Hc @ Hc))
            rank_ok &= c.jacobian_rank == n - 1
        checks.append(Check("height", "c_points_exist_with_full_rank", res <= tol.get("cpoint", 1e-12) and rank_ok,
                            {"max_rel_residual": _f(res), "rank_ok": bool(rank_ok)}))

    worst_slack = np.inf
    for _ in range(sizes["amgm"]):
        x = rng.standard_normal(3)
        x -= x.mean()
        worst_slack = min(worst_slack, height.am_gm_check(*x)[1] / (x @ x / 3) ** 3)
    eq = all(height.am_gm_equality(*v) for v in [(1, 1, -2), (1, -2, 1), (-2, 1, 1), (-1, -1, 2)])
    checks.append(Check("height", "am_gm", worst_slack >= -1e-12 and eq, {"min_scaled_slack": _f(worst_slack), "equality_detected": bool(eq)}))
    if n == 3:
        iso = 0.0
        for _ in range(20):
            Hc = group.random_cartan(3, rng)
            X = height.sl3_zero_diagonal(Hc)
            iso = max(iso, np.abs(np.linalg.eigvalsh(X) - np.sort(Hc)).max())
        checks.append(Check("height", "sl3_zero_diagonal_isospectral", iso <= 1e-8, {"max_err": _f(iso)}))
    dim = all(height.dim_identity_check(m)["consistent"] for m in range(2, 9))
    checks.append(Check("height", "dimension_identity", dim, {}))
    return checks


def flow_suite(n, rng, sizes, tol):
    drift = incr = orbit = cross = 0.0
    limits_ok = audit_ok = True
    for _ in range(sizes["flow"]):
        H = flow.random_regular_H(n, rng)
        k = linalg.haar_orthogonal(n, rng)
        tr = flow.flow_from(k, H, max(50.0, flow.default_t_end(H)))
        rep = flow.limit_analysis(tr, H)
        au = flow.monotonicity_audit(tr)
        drift = max(drift, tr.spectrum_drift())
        incr = max(incr, au["max_increase"])
        audit_ok &= au["passed"]
        limits_ok &= rep.permutation is not None
        if rep.orbit_distance is not None:
            orbit = max(orbit, rep.orbit_distance)
        cross = max(cross, max(r for _, r in tr.cross_check))
    checks = [
        Check("flow", "isospectral", drift <= tol.get("drift", 1e-8), {"max_drift": _f(drift)}),
        Check("flow", "c_alpha_nonincreasing", audit_ok, {"max_increase": _f(incr)}),
        Check("flow", "limit_in_weyl_orbit", limits_ok and orbit <= 1e-6, {"max_orbit_distance": _f(orbit)}),
        Check("flow", "dual_route_agreement", cross <= tol.get("cross", 1e-6), {"max_residual": _f(cross)}),
    ]
    if n == 2:
        tr = flow.integrate(np.array([[0.0, 1.0], [1.0, 0.0]]), 30.0)
        d = np.diag(tr.states[-1])
        checks.append(Check("flow", "sl2_canonical_limit", np.abs(d - [-1, 1]).max() <= 1e-6, {"limit": d.tolist()}))
    return checks


SUITES = {
    "linalg": linalg_suite,
    "group": group_suite,
    "representation": representation_suite,
    "partition": partition_suite,
    "height": height_suite,
    "flow": flow_suite,
}


def run_all(n: int, seed: int, sizes: dict | None = None, tol: dict | None = None, rep_name: str = "std") -> list[Check]:
    sz = dict(DEFAULT_SIZES, **(sizes or {}))
    tol = tol or {}
    out = []
    for name, suite in SUITES.items():
        rng = np.random.default_rng([seed, list(SUITES).index(name)])
        if name == "partition":
            out += suite(n, rng, sz, tol, rep_name)
        else:
            out += suite(n, rng, sz, tol)
    return out
