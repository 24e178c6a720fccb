"""The isospectral flow X' = [E_k X, X] on symmetric traceless matrices.

For ``k`` in SO(n) and a Cartan vector ``H`` the curve
``p(t) = Ad_{kappa(k exp(tH))}(H)`` solves this ODE with ``p(0) = Ad_k(H)``.
The integrator is an embedded Dormand-Prince 5(4) pair (compiled when
available) with projection back to symmetric traceless matrices after every
step.  ``flow_from`` cross-checks the ODE state against the direct route.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConsistencyError, InputError, StiffnessError
from .group import FlatIwasawa, is_regular, weyl_orbit

OFFDIAG_TOL = 1e-6
CROSS_TOL = 1e-6
CROSS_T_SCALE = 25.0


def _as_p(X, tol: float = 1e-10) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise InputError("expected a square matrix")
    s = max(np.linalg.norm(X), 1e-300)
    if np.linalg.norm(X - X.T) > tol * s:
        raise InputError("flow state must be symmetric")
    if abs(np.trace(X)) > 1e-12 * max(s, 1.0):
        raise InputError("flow state must be traceless")
    return X


def vector_field(X) -> np.ndarray:
    """[E_k X, X] with E_k X = U^T - U, U the strictly upper part of X."""
    return kernels.flow_field(_as_p(X))


def offdiag_norm(X) -> float:
    return float(np.linalg.norm(X - np.diag(np.diag(X))))


@dataclass
class FlowControls:
    rtol: float = 1e-10
    atol: float = 1e-12
    sample_dt: float | None = None  # default: t_end / 400
    limit_tol: float = OFFDIAG_TOL
    stop_at_limit: bool = False
    h0: float = 1e-2
    hmin: float = 1e-14
    max_steps: int = 10_000_000


@dataclass(frozen=True)
class FlowState:
    t: float
    X: np.ndarray


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (m, n, n)
    steps_accepted: int = 0
    steps_rejected: int = 0
    stopped_at_limit: bool = False
    cross_check: list = field(default_factory=list)  # (t, residual)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> FlowState:
        return FlowState(float(self.times[i]), self.states[i])

    @property
    def spectra(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.states)[:, ::-1]

    @property
    def c_alpha(self) -> np.ndarray:
        d = np.diagonal(self.states, axis1=1, axis2=2)
        return np.cumsum(d, axis=1)[:, :-1]

    @property
    def offdiag(self) -> np.ndarray:
        return np.array([offdiag_norm(X) for X in self.states])

    def spectrum_drift(self) -> float:
        sp = self.spectra
        return float(np.max(np.abs(sp - sp[0])))

    def norm_drift(self) -> float:
        nr = np.linalg.norm(self.states, axis=(1, 2))
        return float(np.max(np.abs(nr - nr[0])))

    def write_csv(self, path) -> None:
        n = self.states.shape[1]
        iu = np.triu_indices(n)
        cols = ["t"] + [f"x_{i + 1}_{j + 1}" for i, j in zip(*iu)] + [f"c_{a + 1}" for a in range(n - 1)] + ["offdiag"]
        ca, od = self.c_alpha, self.offdiag
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for m in range(len(self)):
                row = [self.times[m], *self.states[m][iu], *ca[m], od[m]]
                w.writerow([repr(float(v)) for v in row])


def integrate(X0, t_end: float, controls: FlowControls | None = None, _observer=None) -> Trajectory:
    """Integrate the flow from X0 to t_end, recording states every ``sample_dt``."""
    c = controls or FlowControls()
    X = np.array(_as_p(X0), dtype=float, order="C")
    if not t_end > 0:
        raise InputError("t_end must be positive")
    dt = c.sample_dt or t_end / 400.0
    grid = np.arange(0.0, t_end, dt)
    grid = np.append(grid, t_end) if grid[-1] < t_end else grid
    scale = max(np.linalg.norm(X), 1e-300)
    atol = c.atol * scale
    times, states = [0.0], [X.copy()]
    if _observer:
        _observer(0.0, X)
    h = c.h0
    acc = rej = 0
    stopped = False
    t = 0.0
    for t1 in grid[1:]:
        if c.stop_at_limit and offdiag_norm(X) < c.limit_tol * scale:
            stopped = True
            break
        t, h, a, r, status = kernels.dopri_advance(X, t, float(t1), h, c.rtol, atol, c.hmin, c.max_steps - acc - rej)
        acc += a
        rej += r
        if status != 0:
            partial = Trajectory(np.array(times), np.array(states), acc, rej)
            reason = {1: "step size underflow", 2: "step budget exhausted", 3: "non-finite state"}[status]
            raise StiffnessError(f"{reason} at t={t:.6g}", partial=partial)
        times.append(float(t1))
        states.append(X.copy())
        if _observer:
            _observer(float(t1), X)
    return Trajectory(np.array(times), np.array(states), acc, rej, stopped)


def direct_state(flat: FlatIwasawa, H, t: float) -> np.ndarray:
    """Ad_{kappa(k exp(tH))}(H)."""
    kk = flat.kappa(t * np.asarray(H))
    return kk @ np.diag(H) @ kk.T


def flow_from(k, H, t_end: float, controls: FlowControls | None = None, cross_check: bool = True,
              cross_tol: float = CROSS_TOL) -> Trajectory:
    """Integrate from Ad_k(H), cross-validating against Ad_{kappa(k exp(tH))}(H).

    The comparison runs at sample times t <= 25 / max|H_i| and raises
    ConsistencyError if the routes differ by more than cross_tol * |H|.
    """
    k = np.asarray(k, dtype=float)
    H = np.asarray(H, dtype=float)
    if k.shape != (len(H), len(H)):
        raise InputError("k and H have different sizes")
    if np.linalg.norm(k @ k.T - np.eye(len(H))) > 1e-10:
        raise InputError("k must be orthogonal")
    X0 = k @ np.diag(H) @ k.T
    X0 = 0.5 * (X0 + X0.T)
    X0 -= np.trace(X0) / len(H) * np.eye(len(H))
    records = []
    observer = None
    if cross_check:
        flat = FlatIwasawa(k)
        t_cap = CROSS_T_SCALE / max(np.max(np.abs(H)), 1e-300)
        scale = max(np.linalg.norm(H), 1e-300)

        def observer(t, X):
            if t <= t_cap:
                res = float(np.linalg.norm(X - direct_state(flat, H, t))) / scale
                records.append((t, res))
                if res > cross_tol:
                    raise ConsistencyError(f"ODE and direct route differ by {res:.3e} at t={t:.6g}")

    traj = integrate(X0, t_end, controls, observer)
    traj.cross_check = records
    return traj


@dataclass
class FlowReport:
    limit: np.ndarray | None
    permutation: tuple | None
    convergence_time: float | None
    orbit_distance: float | None
    final_offdiag: float
    regular: bool

    def to_json(self) -> dict:
        return {
            "limit": None if self.limit is None else [float(x) for x in self.limit],
            "permutation": None if self.permutation is None else list(self.permutation),
            "convergence_time": self.convergence_time,
            "orbit_distance": self.orbit_distance,
            "final_offdiag": self.final_offdiag,
            "regular": self.regular,
        }


def limit_analysis(traj: Trajectory, H, tol: float = OFFDIAG_TOL) -> FlowReport:
    """Match the limiting diagonal against the Weyl orbit of H."""
    H = np.asarray(H, dtype=float)
    scale = max(np.linalg.norm(H), 1e-300)
    od = traj.offdiag
    final = float(od[-1])
    regular = is_regular(H)
    hits = np.nonzero(od < tol * scale)[0]
    if final >= tol * scale:
        return FlowReport(None, None, None, None, final, regular)
    conv_t = float(traj.times[hits[0]])
    d = np.diag(traj.states[-1]).copy()
    orbit = weyl_orbit(H)
    dists = [float(np.max(np.abs(d - w))) for w in orbit]
    dist = min(dists)
    perm = None
    if regular and dist <= tol * scale:
        # d_i = H[perm[i]]
        perm = tuple(int(np.argmin(np.abs(H - x))) for x in d)
    return FlowReport(d, perm, conv_t, dist, final, regular)


def monotonicity_audit(traj: Trajectory, slack: float = 1e-10) -> dict:
    ca = traj.c_alpha
    scale = max(float(np.linalg.norm(traj.states[0])), 1e-300)
    inc = np.diff(ca, axis=0)
    worst = float(inc.max()) if inc.size else 0.0
    total = float(np.sum(ca[0] - ca[-1]))
    diagonal_start = offdiag_norm(traj.states[0]) <= 1e-14 * scale
    strict_ok = diagonal_start or total > 0.0
    return {
        "max_increase": worst,
        "nonincreasing": worst <= slack * scale,
        "total_decrease": total,
        "diagonal_start": bool(diagonal_start),
        "strict_decrease_ok": bool(strict_ok),
        "passed": bool(worst <= slack * scale and strict_ok),
    }


def spectral_gap(H) -> float:
    h = np.sort(np.asarray(H, dtype=float))
    return float(np.min(np.diff(h)))


def default_t_end(H) -> float:
    """50 / (smallest eigenvalue gap)."""
    return 50.0 / max(spectral_gap(H), 1e-12)


def random_regular_H(n: int, rng, min_gap: float = 1e-2) -> np.ndarray:
    """Unit traceless vector with all coordinate gaps >= min_gap (rejection sampling)."""
    while True:
        H = rng.standard_normal(n)
        H -= H.mean()
        H /= np.linalg.norm(H)
        if spectral_gap(H) >= min_gap:
            return H
