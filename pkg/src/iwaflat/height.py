"""Height functions on flats and the critical-point machinery on SO(n).

``h(t) = <H0, H(g exp t)>`` for a Cartan vector ``t``.  With ``k = kappa(g exp t)``
and ``Y = k^T H0 k`` the gradient is ``diag(Y)``; the Hessian quadratic form is
``Q(H) = <H0, [Ad_k H, E_n(Ad_k H)]>``.  Optimization runs in orthonormal
coordinates ``tau`` of the traceless diagonal space, ``t = B tau``.

The C-set consists of ``k`` in SO(n) with ``f(k) = diag(k^T H0 k) = 0``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq, minimize

from .errors import InputError, NotFoundError, NumericalError
from .group import (
    FlatIwasawa,
    E_n,
    as_group_element,
    bracket,
    in_positive_chamber,
    is_generic,
    random_sl,
    root_datum,
    sign_matrices,
)
from .linalg import as_rng, haar_orthogonal, orthonormal_traceless_basis, polar_orthogonal

GRAD_TOL = 1e-9
R_ESCAPE = 40.0
C_RTOL = 1e-12
RANK_RTOL = 1e-8


def _cartan(H0) -> np.ndarray:
    H0 = np.asarray(H0, dtype=float)
    if H0.ndim != 1 or not np.all(np.isfinite(H0)):
        raise InputError("H0 must be a finite vector")
    if abs(H0.sum()) > 1e-12 * max(1.0, np.abs(H0).sum()):
        raise InputError("H0 must be traceless")
    return H0


@dataclass
class HeightProblem:
    H0: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        self.H0 = _cartan(self.H0)
        self.g = as_group_element(self.g)
        if self.g.shape[0] != len(self.H0):
            raise InputError("H0 and g have different sizes")

    @property
    def n(self) -> int:
        return len(self.H0)

    @cached_property
    def flat(self) -> FlatIwasawa:
        return FlatIwasawa(self.g)

    @cached_property
    def basis(self) -> np.ndarray:
        return orthonormal_traceless_basis(self.n)

    def to_t(self, tau) -> np.ndarray:
        return self.basis @ np.asarray(tau, dtype=float)

    def to_tau(self, t) -> np.ndarray:
        return self.basis.T @ np.asarray(t, dtype=float)


def height(p: HeightProblem, t) -> float:
    return float(p.H0 @ p.flat.height(t))


def grad_height(p: HeightProblem, t) -> np.ndarray:
    """diag(k^T H0 k) with k = kappa(g exp t)."""
    return f_map(p.flat.kappa(t), p.H0)


def hessian_form(H0, k, H) -> float:
    """Q(H) = <H0, [Ad_k H, E_n(Ad_k H)]>."""
    Y = k @ np.diag(H) @ k.T
    return float(np.trace(np.diag(H0) @ bracket(Y, E_n(Y))))


def hessian_from_k(H0, k, basis) -> np.ndarray:
    """Hessian matrix in the orthonormal coordinates given by the columns of ``basis``."""
    D = np.diag(H0)
    Ys = [k @ np.diag(b) @ k.T for b in basis.T]
    Ns = [E_n(Y) for Y in Ys]
    m = len(Ys)
    out = np.empty((m, m))
    for p in range(m):
        for q in range(p, m):
            v = 0.5 * np.trace(D @ (bracket(Ys[p], Ns[q]) + bracket(Ys[q], Ns[p])))
            out[p, q] = out[q, p] = v
    return out


def hess_height(p: HeightProblem, t) -> np.ndarray:
    """Symmetric (n-1) x (n-1) Hessian of h in the orthonormal basis of a."""
    return hessian_from_k(p.H0, p.flat.kappa(t), p.basis)


def root_sum_form(H0, k, H) -> float:
    """-2 sum_{i<j} Y_ij^2 (H0_i - H0_j) with Y = Ad_k H."""
    Y = k @ np.diag(H) @ k.T
    iu = np.triu_indices(len(H0), 1)
    return float(-2.0 * np.sum(Y[iu] ** 2 * (H0[iu[0]] - H0[iu[1]])))


# -- critical points -----------------------------------------------------------

@dataclass
class CriticalOptions:
    starts: int = 5
    start_scale: float = 2.0
    grad_tol: float = GRAD_TOL
    r_escape: float = R_ESCAPE
    max_iter: int = 200
    initial_radius: float = 1.0
    max_radius: float = 8.0
    eta: float = 0.1
    agree_tol: float = 1e-6
    probes: int = 200
    probe_radius: float = 10.0
    probe_tol: float = 1e-8
    seed: int = 0


@dataclass
class CriticalPointReport:
    status: str  # found | not_found | escaped
    a_star: np.ndarray | None
    h_star: float | None
    grad_norm: float
    hessian_eigenvalues: list
    iterations: int
    agreement: bool
    max_disagreement: float = 0.0
    probes_ok: bool | None = None
    exit_direction: np.ndarray | None = None
    starts: list = field(default_factory=list)

    def to_json(self) -> dict:
        arr = lambda v: None if v is None else [float(x) for x in v]
        return {
            "status": self.status,
            "a_star": arr(self.a_star),
            "h_star": self.h_star,
            "grad_norm": self.grad_norm,
            "hessian_eigenvalues": [float(x) for x in self.hessian_eigenvalues],
            "iterations": self.iterations,
            "agreement": self.agreement,
            "max_disagreement": self.max_disagreement,
            "probes_ok": self.probes_ok,
            "exit_direction": arr(self.exit_direction),
            "starts": self.starts,
        }


def _ascend(p: HeightProblem, tau0, opt: CriticalOptions) -> dict:
    path = []

    def fun(tau):
        t = p.to_t(tau)
        v = height(p, t)
        if not np.isfinite(v):
            raise NumericalError("non-finite height", diagnostics={"tau": tau.tolist()})
        return -v

    def jac(tau):
        return -p.basis.T @ grad_height(p, p.to_t(tau))

    def hess(tau):
        return -hess_height(p, p.to_t(tau))

    def cb(tau):
        path.append(np.array(tau))
        if np.linalg.norm(tau) > opt.r_escape:
            raise StopIteration

    scale = np.linalg.norm(p.H0)
    res = minimize(fun, np.asarray(tau0, dtype=float), jac=jac, hess=hess, method="trust-exact",
                   callback=cb,
                   options=dict(initial_trust_radius=opt.initial_radius, max_trust_radius=opt.max_radius,
                                eta=opt.eta, gtol=0.1 * opt.grad_tol * max(scale, 1e-300),
                                maxiter=opt.max_iter))
    tau = np.asarray(res.x)
    gvec = p.basis.T @ grad_height(p, p.to_t(tau))
    gnorm = float(np.linalg.norm(gvec))
    if np.linalg.norm(tau) <= opt.r_escape:
        tau, gnorm = _newton_polish(p, tau, gnorm)
    out = {"tau": tau, "h": -float(res.fun), "grad_norm": gnorm, "iterations": int(res.nit)}
    if np.linalg.norm(tau) > opt.r_escape:
        hs = [height(p, p.to_t(x)) for x in path]
        monotone = all(b >= a - 1e-12 * max(1.0, abs(a)) for a, b in zip(hs, hs[1:]))
        out["status"] = "not_found" if (monotone and gnorm > 1e-6 * scale) else "escaped"
        out["exit_direction"] = tau / np.linalg.norm(tau)
    elif gnorm <= opt.grad_tol * max(scale, 1e-300):
        out["status"] = "found"
    else:
        out["status"] = "escaped"
    return out


def _newton_polish(p: HeightProblem, tau, gnorm, steps: int = 6):
    """Plain Newton steps while the gradient keeps shrinking (trust-region stops near rounding)."""
    for _ in range(steps):
        Hs = hess_height(p, p.to_t(tau))
        if np.max(np.linalg.eigvalsh(Hs)) >= 0:
            break
        cand = tau - np.linalg.solve(Hs, p.basis.T @ grad_height(p, p.to_t(tau)))
        gn = float(np.linalg.norm(p.basis.T @ grad_height(p, p.to_t(cand))))
        if not gn < gnorm:
            break
        tau, gnorm = cand, gn
    return tau, gnorm


def find_critical(p: HeightProblem, options: CriticalOptions | None = None) -> CriticalPointReport:
    """Trust-region Newton ascent of h from several starts.

    A found point is checked for negative definiteness, for agreement across
    all converged starts, and for maximality against random probes.
    """
    opt = options or CriticalOptions()
    if not (in_positive_chamber(p.H0) and is_generic(p.H0)):
        warnings.warn("H0 is not generic in the positive chamber; uniqueness is not guaranteed")
    rng = as_rng(opt.seed)
    n = p.n
    starts = [np.zeros(n - 1)] + [opt.start_scale * rng.standard_normal(n - 1) for _ in range(opt.starts - 1)]
    runs = [_ascend(p, s, opt) for s in starts]
    found = [r for r in runs if r["status"] == "found"]
    iters = sum(r["iterations"] for r in runs)
    summary = [{"status": r["status"], "h": r["h"], "grad_norm": r["grad_norm"]} for r in runs]
    if not found:
        status = "not_found" if all(r["status"] == "not_found" for r in runs) else "escaped"
        exit_dir = next((p.to_t(r["exit_direction"]) for r in runs if "exit_direction" in r), None)
        best = max(runs, key=lambda r: r["h"])
        return CriticalPointReport(status, None, None, best["grad_norm"], [], iters, True,
                                   exit_direction=exit_dir, starts=summary)
    best = found[0]
    dis = max(float(np.linalg.norm(r["tau"] - best["tau"])) for r in found)
    tau = best["tau"]
    t = p.to_t(tau)
    eig = np.sort(np.linalg.eigvalsh(hess_height(p, t)))
    h_star = height(p, t)
    probe_dirs = rng.standard_normal((opt.probes, n - 1))
    probe_dirs /= np.linalg.norm(probe_dirs, axis=1, keepdims=True)
    radii = opt.probe_radius * rng.random(opt.probes) ** (1.0 / (n - 1))
    probes_ok = all(height(p, p.to_t(tau + r * d)) <= h_star + opt.probe_tol
                    for r, d in zip(radii, probe_dirs))
    return CriticalPointReport(
        "found", t, h_star, best["grad_norm"], eig.tolist(), iters,
        dis <= opt.agree_tol, dis, probes_ok, starts=summary,
    )


# -- the maps f and g on SO(n) ---------------------------------------------------

def f_map(k, H0) -> np.ndarray:
    """diag(k^T H0 k)."""
    k = np.asarray(k, dtype=float)
    return np.einsum("ij,i,ij->j", k, np.asarray(H0, dtype=float), k)


def g_map(k, H0) -> float:
    f = f_map(k, H0)
    return float(f @ f)


def riemannian_grad_g(k, H0) -> np.ndarray:
    """Antisymmetric G with sum(G * X) = dg(k exp(eps X)) / d eps; equals 2[Y, diag f]."""
    Y = k.T @ np.diag(H0) @ k
    F = np.diag(np.diag(Y))
    return 2.0 * bracket(Y, F)


def _so_basis_pairs(n: int):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def so_from_coords(x, n: int) -> np.ndarray:
    X = np.zeros((n, n))
    for c, (i, j) in zip(x, _so_basis_pairs(n)):
        X[i, j] += c
        X[j, i] -= c
    return X


def f_jacobian(k, H0) -> np.ndarray:
    """Matrix of X -> diag([Y, X]) = -E_a([X, Y]) on the basis E_ij - E_ji (i < j).

    The column for (i, j) is 2 Y_ij (e_j - e_i).
    """
    Y = k.T @ np.diag(H0) @ k
    n = len(H0)
    pairs = _so_basis_pairs(n)
    J = np.zeros((n, len(pairs)))
    for c, (i, j) in enumerate(pairs):
        J[j, c] = 2.0 * Y[i, j]
        J[i, c] = -2.0 * Y[i, j]
    return J


@dataclass
class CPoint:
    k: np.ndarray
    residual: float
    jacobian_rank: int
    restarts_used: int = 0

    def to_json(self) -> dict:
        return {"k": self.k.tolist(), "residual": self.residual, "jacobian_rank": self.jacobian_rank,
                "restarts_used": self.restarts_used}


def _lm_descent(residual_jac, k, rng, target, max_iter=200, kick=1e-2):
    """Levenberg-Marquardt on SO(n) with polar retraction and random kicks on stalls."""
    n = k.shape[0]
    r, J = residual_jac(k)
    val = float(r @ r)
    mu = 1e-3 * max(float(np.max(np.abs(J))) ** 2, 1e-300)
    stall = 0
    polish = 0
    for _ in range(max_iter):
        if val <= target:
            # quadratic convergence near the C-set: a few more steps reach rounding level
            polish += 1
            if polish > 4 or val == 0.0:
                break
            mu = 0.0
        if mu == 0.0:
            step = -np.linalg.lstsq(J, r, rcond=None)[0]  # minimal-norm Gauss-Newton step
        else:
            A = J.T @ J
            step = -np.linalg.solve(A + mu * np.eye(len(A)), J.T @ r)
        k_new = polar_orthogonal(k @ (np.eye(n) + so_from_coords(step, n)))
        r_new, J_new = residual_jac(k_new)
        v_new = float(r_new @ r_new)
        if val <= target and not v_new < val:
            break
        if v_new < val:
            rel = (val - v_new) / val
            k, r, J, val = k_new, r_new, J_new, v_new
            mu = max(mu / 3.0, 1e-15)
            stall = stall + 1 if rel < 1e-6 else 0
        else:
            mu *= 4.0
            stall += 1
        if stall >= 8:
            # stuck at a positive value: a saddle of g; kick along a random tangent direction
            X = so_from_coords(rng.standard_normal(n * (n - 1) // 2), n)
            k = polar_orthogonal(k @ (np.eye(n) + kick * X / np.linalg.norm(X)))
            r, J = residual_jac(k)
            val = float(r @ r)
            stall = 0
    return k, val


def find_C_point(H0, seed=0, restarts: int = 20, max_iter: int = 200) -> CPoint:
    """Find k in SO(n) with diag(k^T H0 k) = 0 by Levenberg-Marquardt descent of g."""
    H0 = _cartan(H0)
    n = len(H0)
    if not is_generic(H0):
        warnings.warn("H0 is not generic; the C-set may be empty")
    rng = as_rng(seed)
    target = C_RTOL * float(H0 @ H0)

    def rj(k):
        return f_map(k, H0), f_jacobian(k, H0)

    best = (None, np.inf)
    for attempt in range(restarts):
        k0 = haar_orthogonal(n, rng)
        k, val = _lm_descent(rj, k0, rng, target, max_iter)
        if val < best[1]:
            best = (k, val)
        if val <= target:
            c = CPoint(k, val, 0, attempt)
            c.jacobian_rank = C_tangent_rank(c, H0)
            return c
    raise NotFoundError(f"no C-point within {restarts} restarts (best residual {best[1]:.3e})",
                        best=CPoint(best[0], best[1], 0, restarts))


def C_tangent_rank(c: CPoint | np.ndarray, H0, rtol: float = RANK_RTOL) -> int:
    k = c.k if isinstance(c, CPoint) else np.asarray(c)
    s = np.linalg.svd(f_jacobian(k, _cartan(H0)), compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def level_set_sample(H0, a, count: int, seed=0, restarts: int = 20) -> list[np.ndarray]:
    """Elements k with grad h_{H0,k}(a) = 0, as kappa(c exp(-a)) for C-points c."""
    H0 = _cartan(H0)
    a = np.asarray(a, dtype=float)
    rng = as_rng(seed)
    out = []
    for _ in range(count):
        c = find_C_point(H0, rng, restarts)
        out.append(FlatIwasawa(c.k).kappa(-a))
    return out


# -- SL_3 constructions and numeric identities -----------------------------------

def am_gm_check(a: float, b: float, c: float) -> tuple[bool, float]:
    """slack = ((a^2+b^2+c^2)/3)^3 - 2 a^2 b^2 c^2 for a + b + c = 0."""
    a, b, c = float(a), float(b), float(c)
    if abs(a + b + c) > 1e-12 * max(1.0, abs(a) + abs(b) + abs(c)):
        raise InputError("a + b + c must vanish")
    m = (a * a + b * b + c * c) / 3.0
    slack = m ** 3 - 2.0 * (a * b * c) ** 2
    return bool(slack >= -1e-12 * max(m ** 3, 1.0)), slack


def am_gm_equality(a: float, b: float, c: float, rtol: float = 1e-10) -> bool:
    m = (a * a + b * b + c * c) / 3.0
    return abs(am_gm_check(a, b, c)[1]) <= rtol * m ** 3


def sl3_zero_diagonal(H0) -> np.ndarray:
    """Symmetric zero-diagonal X with spectrum H0 (n = 3).

    Off-diagonals x = X[0,1], y = X[0,2], z = X[1,2] satisfy
    x^2 + y^2 + z^2 = (a^2 + b^2 + c^2)/2 and 2xyz = abc.  Taking x^2 = y^2 = r
    reduces this to the cubic 2r^3 - S r^2 + P = 0 with a root in [S/3, S/2].
    """
    H0 = _cartan(H0)
    if len(H0) != 3:
        raise InputError("sl3_zero_diagonal needs n = 3")
    a, b, c = H0
    S = 0.5 * float(H0 @ H0)
    X = np.zeros((3, 3))
    if S == 0.0:
        return X
    P = (a * b * c / 2.0) ** 2
    cubic = lambda r: 2 * r ** 3 - S * r ** 2 + P
    lo, hi = S / 3.0, S / 2.0
    if cubic(lo) >= -64 * np.finfo(float).eps * S ** 3:
        r = lo  # equality case of AM-GM (double root, up to rounding)
    elif cubic(hi) <= 0.0:
        r = hi
    else:
        r = brentq(cubic, lo, hi, xtol=1e-16 * S)
    x = y = np.sqrt(r)
    # 2 x y z = abc; avoids the cancellation in sqrt(S - 2r) near r = S/2
    z = a * b * c / (2.0 * r)
    X[0, 1] = X[1, 0] = x
    X[0, 2] = X[2, 0] = y
    X[1, 2] = X[2, 1] = z
    return X


def dim_identity_check(n: int) -> dict:
    if n < 2:
        raise InputError("n must be at least 2")
    R = root_datum(n)
    root_sum = sum(R.multiplicity(a) for a in R.positives)
    dim_K, dim_M, dim_A = n * (n - 1) // 2, 0, n - 1
    return {
        "n": n,
        "sum_multiplicities": root_sum,
        "dim_K_minus_dim_M": dim_K - dim_M,
        "dim_A": dim_A,
        "identity_holds": root_sum == dim_K - dim_M,
        "equals_dim_A": root_sum == dim_A,
        "consistent": (root_sum == dim_K - dim_M) and ((root_sum == dim_A) == (n == 2)),
    }


def common_critical_experiment(H0, H0p, seed=0, restarts: int = 10) -> dict:
    """Minimize g(k, H0) + g(k, H0') over SO(3); report the floor found."""
    H0, H0p = _cartan(H0), _cartan(H0p)
    if len(H0) != 3 or len(H0p) != 3:
        raise InputError("common_critical_experiment needs n = 3")
    rng = as_rng(seed)

    def rj(k):
        return (np.concatenate([f_map(k, H0), f_map(k, H0p)]),
                np.vstack([f_jacobian(k, H0), f_jacobian(k, H0p)]))

    vals = []
    for _ in range(restarts):
        _, v = _lm_descent(rj, haar_orthogonal(3, rng), rng, 0.0, max_iter=300)
        vals.append(v)
    scale = float(H0 @ H0 + H0p @ H0p)
    return {
        "H0": H0.tolist(),
        "H0_prime": H0p.tolist(),
        "floor": float(min(vals)),
        "relative_floor": float(min(vals)) / scale,
        "restarts": restarts,
    }


def sl2_height_closed_form(theta: float, s: float) -> float:
    """h(s) for g = rotation by theta, H0 = diag(1, -1), t = s (1, -1)."""
    return float(-np.log(np.sin(theta) ** 2 * np.exp(2 * s) + np.cos(theta) ** 2 * np.exp(-2 * s)))


def rotation2(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def random_found_problem(H0, rng, max_tries: int = 1000, options: CriticalOptions | None = None):
    """Draw random g until h_{H0,g} has a critical point; return (problem, report)."""
    for _ in range(max_tries):
        p = HeightProblem(H0, random_sl(len(H0), rng))
        rep = find_critical(p, options)
        if rep.status == "found":
            return p, rep
    raise NotFoundError("no random element with a critical point", best=None)


def m_bi_invariance_residual(c: CPoint, H0, rng) -> float:
    ms = sign_matrices(len(H0))
    m = ms[rng.integers(len(ms))]
    m1 = ms[rng.integers(len(ms))]
    return g_map(m @ c.k @ m1, H0)
