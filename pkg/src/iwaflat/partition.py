"""The Omega_S partition of SL_n(R) and N-projection boundedness experiments.

For a weight ``lam`` of a representation ``rho`` let ``s_lam`` be the number of
basis vectors of weight strictly below ``lam``.  The rows of ``rho(g)`` with
those indices span a subspace whose ``s_lam``-th exterior power is a line.
The signature of ``g`` records, for every ``lam``, which weight spaces of
the exterior power that line meets nontrivially.  Elements with equal
signatures form one class ``Omega_S``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import ConsistencyError, InputError
from .group import (
    FlatIwasawa,
    as_group_element,
    random_M,
    random_positive_diagonal,
    random_sl,
    random_unipotent,
    weyl_orbit,
)
from .linalg import as_rng, minors, subset_array
from .representation import WeightedRep, block_below, dominant_vector, get_rep

SUPPORT_RTOL = 1e-9

Weight = tuple[int, ...]


@dataclass(frozen=True)
class OmegaSignature:
    """Per-weight support sets; ``entries`` is a tuple of ``(lam, sorted supports)``."""

    rep: str
    n: int
    entries: tuple[tuple[Weight, tuple[Weight, ...]], ...]

    def support(self, lam) -> tuple[Weight, ...]:
        key = tuple(int(x) for x in lam)
        for w, s in self.entries:
            if w == key:
                return s
        raise KeyError(key)

    def union(self, other: "OmegaSignature") -> "OmegaSignature":
        if (self.rep, self.n) != (other.rep, other.n):
            raise InputError("signatures of different representations")
        entries = tuple(
            (w, tuple(sorted(set(a) | set(b), reverse=True)))
            for (w, a), (_, b) in zip(self.entries, other.entries)
        )
        return OmegaSignature(self.rep, self.n, entries)

    def to_json(self) -> dict:
        return {
            "rep": self.rep,
            "n": self.n,
            "supports": [{"weight": list(w), "support": [list(a) for a in s]} for w, s in self.entries],
        }


@lru_cache(maxsize=None)
def _wedge_weight_groups(rep_name: str, n: int, idx: tuple[int, ...]):
    """Group the subset basis of the exterior power of the span of ``idx``'s rows.

    Returns (subset weights as a (K, n) integer array, mapping weight -> coordinate positions).
    Subsets run over all ``len(idx)``-subsets of the d basis columns.
    """
    rep = get_rep(rep_name, n)
    W = np.rint(rep.basis_weights).astype(int)
    S = subset_array(rep.dim, len(idx))
    sw = W[S].sum(axis=1)
    groups: dict[Weight, list[int]] = {}
    for pos, w in enumerate(tuple(int(x) for x in row) for row in sw):
        groups.setdefault(w, []).append(pos)
    return sw, {w: np.array(p, dtype=np.intp) for w, p in groups.items()}


def _supports(line: np.ndarray, groups, rtol: float) -> tuple[Weight, ...]:
    total = np.linalg.norm(line)
    if total == 0.0:
        raise ConsistencyError("trailing wedge vanishes; the element is singular")
    out = [w for w, pos in groups.items() if np.linalg.norm(line[pos]) > rtol * total]
    return tuple(sorted(out, reverse=True))


def classify(g, rep: WeightedRep, eps_rel: float = SUPPORT_RTOL) -> OmegaSignature:
    """Omega_S signature of ``g`` with respect to ``rep``."""
    g = np.asarray(g, dtype=float)
    R = rep.apply(g)
    entries = []
    for lam in rep.distinct_weights:
        s, idx = block_below(lam, rep)
        if s == 0:
            entries.append((lam, ()))
            continue
        _, groups = _wedge_weight_groups(rep.name, rep.n, tuple(idx))
        line = minors(R[idx])
        entries.append((lam, _supports(line, groups, eps_rel)))
    return OmegaSignature(rep.name, rep.n, tuple(entries))


def generic_signature(rep: WeightedRep, sample_count: int = 8, seed=0) -> OmegaSignature:
    """Union of supports over random elements (the generic class S^0)."""
    if sample_count < 1:
        raise InputError("sample_count must be positive")
    rng = as_rng(seed)
    sig = None
    for _ in range(sample_count):
        s = classify(random_sl(rep.n, rng), rep)
        sig = s if sig is None else sig.union(s)
    return sig


def left_invariance_check(g, rep: WeightedRep, seed=0, a_scale: float = 1.0,
                          eps_rel: float = SUPPORT_RTOL) -> bool:
    """classify(u a m g) == classify(g) for random u in N, a in A, m in M."""
    rng = as_rng(seed)
    n = rep.n
    u = random_unipotent(n, rng)
    a = random_positive_diagonal(n, rng, a_scale)
    m = random_M(n, rng)
    return classify(u @ a @ m @ g, rep, eps_rel) == classify(g, rep, eps_rel)


def extreme_diagonal(n: int, rng, magnitude: float = 20.0) -> np.ndarray:
    """Positive diagonal with log-entries +-magnitude in dominant (decreasing) order."""
    t = np.sort(rng.choice([-1.0, 1.0], size=n) * magnitude)[::-1]
    t -= t.mean()
    return np.diag(np.exp(t))


def density_estimate(rep: WeightedRep, samples: int, seed=0, generic: OmegaSignature | None = None) -> float:
    if samples < 1:
        raise InputError("samples must be positive")
    rng = as_rng(seed)
    if generic is None:
        generic = generic_signature(rep, 8, rng.integers(2**63))
    hits = sum(classify(random_sl(rep.n, rng), rep) == generic for _ in range(samples))
    return hits / samples


# -- N-projection bounds ------------------------------------------------------

def default_rays(n: int, count: int = 6, seed=0) -> np.ndarray:
    """Unit Cartan directions: Weyl images of the normalized dominant vector, padded with random ones."""
    rng = as_rng(seed)
    rho = dominant_vector(n)
    orbit = weyl_orbit(rho / np.linalg.norm(rho))
    if len(orbit) > count:
        pick = rng.choice(len(orbit), size=count, replace=False)
        rays = [orbit[i] for i in sorted(pick)]
    else:
        rays = list(orbit)
    while len(rays) < count:
        h = rng.standard_normal(n)
        h -= h.mean()
        rays.append(h / np.linalg.norm(h))
    return np.array(rays)


def n_bound_matrix(g, rep: WeightedRep, eps_rel: float = SUPPORT_RTOL) -> np.ndarray:
    """Entrywise bound for n'(rho(g) rho(a)) over all a in A.

    Entry (r, c), r < c, is ``max_mu |<c_mu, d_mu>| / |d_mu|^2`` where ``d`` is
    the wedge of rows c..d-1 of rho(g), ``c`` the same wedge with row c
    replaced by row r, and ``_mu`` denotes the weight-mu component.  Components
    with ``|d_mu| <= eps_rel |d|`` are treated as zero.
    """
    R = rep.apply(np.asarray(g, dtype=float))
    d = rep.dim
    W = np.rint(rep.basis_weights).astype(int)
    B = np.zeros((d, d))
    for c in range(1, d):
        S = subset_array(d, d - c)
        sw = W[S].sum(axis=1)
        keys, inv = np.unique(sw, axis=0, return_inverse=True)
        inv = inv.ravel()
        D = minors(R[c:])
        dn2 = np.bincount(inv, weights=D * D, minlength=len(keys))
        live = dn2 > (eps_rel ** 2) * dn2.sum()
        for r in range(c):
            C = minors(np.vstack([R[r:r + 1], R[c + 1:]]))
            cd = np.bincount(inv, weights=C * D, minlength=len(keys))
            B[r, c] = np.max(np.abs(cd[live]) / dn2[live])
    return B


def sl2_analytic_bound(g) -> float:
    (a, b), (c, d) = np.asarray(g, dtype=float)
    if c == 0 or d == 0:
        raise InputError("bottom row must have nonzero entries")
    return max(abs(a / c), abs(b / d))


@dataclass
class NBoundReport:
    g_id: str
    rep: str
    rays: np.ndarray
    grid: np.ndarray
    observed: np.ndarray  # (rays, grid) values of |n - I|_F
    bound_matrix: np.ndarray
    entry_sup: np.ndarray = field(repr=False)  # sup over grid of |n_rc|
    tol: float = 1e-9

    @property
    def observed_sup(self) -> float:
        return float(self.observed.max())

    @property
    def theoretical_bound(self) -> float:
        return float(np.linalg.norm(self.bound_matrix))

    @property
    def entrywise_ok(self) -> bool:
        return bool(np.all(self.entry_sup <= self.bound_matrix * (1 + self.tol) + self.tol))

    @property
    def bounded(self) -> bool:
        return bool(np.isfinite(self.observed_sup)
                    and self.observed_sup <= self.theoretical_bound * (1 + self.tol) + self.tol
                    and self.entrywise_ok)

    def to_json(self) -> dict:
        return {
            "g_id": self.g_id,
            "rep": self.rep,
            "rays": self.rays.tolist(),
            "t_min": float(self.grid[0]),
            "t_max": float(self.grid[-1]),
            "grid_points": int(len(self.grid)),
            "observed_sup": self.observed_sup,
            "theoretical_bound": self.theoretical_bound,
            "entrywise_ok": self.entrywise_ok,
            "bounded": self.bounded,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["ray", "t", "n_minus_I_fro"])
            for r in range(len(self.rays)):
                for t, v in zip(self.grid, self.observed[r]):
                    w.writerow([r, repr(float(t)), repr(float(v))])


def n_bound_experiment(g, rep: WeightedRep, rays=None, t_max: float = 15.0, grid: int = 61,
                       g_id: str = "g", seed=0, eps_rel: float = SUPPORT_RTOL) -> NBoundReport:
    """Observed sup of |n'(rho(g exp(tH))) - I| along rays versus the theoretical bound.

    For the standard representation n' is the N-projection of g exp(tH) itself.
    """
    g = as_group_element(g)
    if rays is None:
        rays = default_rays(rep.n, 6, seed)
    rays = np.atleast_2d(np.asarray(rays, dtype=float))
    ts = np.linspace(-t_max, t_max, grid)
    R = rep.apply(g)
    F = FlatIwasawa(R)
    W = rep.basis_weights
    obs = np.empty((len(rays), grid))
    entry_sup = np.zeros((rep.dim, rep.dim))
    eye = np.eye(rep.dim)
    for r, H in enumerate(rays):
        T = np.outer(ts, W @ H)  # rho(exp(tH)) = diag(exp(W H t))
        Ns = F.n_part_batch(T)
        obs[r] = np.linalg.norm(Ns - eye, axis=(1, 2))
        entry_sup = np.maximum(entry_sup, np.abs(Ns - eye).max(axis=0))
    return NBoundReport(g_id, rep.name, rays, ts, obs, n_bound_matrix(g, rep, eps_rel), entry_sup)


# -- representation-independence evidence ------------------------------------

def structured_samples(n: int, count: int, seed=0) -> list[np.ndarray]:
    """Random elements mixed with elements of NAM w for signed permutations w."""
    from .group import permutation_matrix

    rng = as_rng(seed)
    out = []
    for i in range(count):
        if i % 2 == 0:
            out.append(random_sl(n, rng))
        else:
            w = permutation_matrix(rng.permutation(n))
            out.append(random_unipotent(n, rng) @ random_positive_diagonal(n, rng) @ random_M(n, rng) @ w)
    return out


def rep_independence_experiment(n: int, samples: int = 20, seed=0) -> dict:
    """Compare the class partitions induced by Std and Adjoint on a sample set.

    Reports the number of sample pairs on which the two representations
    disagree about being in the same class; asserts nothing.
    """
    if n not in (2, 3):
        raise InputError("n must be 2 or 3")
    gs = structured_samples(n, samples, seed)
    sig_std = [classify(g, get_rep("std", n)) for g in gs]
    sig_ad = [classify(g, get_rep("adjoint", n)) for g in gs]
    disagreements = []
    same_pairs = 0
    for i, j in combinations(range(len(gs)), 2):
        a = sig_std[i] == sig_std[j]
        b = sig_ad[i] == sig_ad[j]
        same_pairs += a
        if a != b:
            disagreements.append([i, j, bool(a), bool(b)])
    return {
        "n": n,
        "samples": len(gs),
        "std_classes": len(set(sig_std)),
        "adjoint_classes": len(set(sig_ad)),
        "pairs": len(gs) * (len(gs) - 1) // 2,
        "same_class_pairs_std": int(same_pairs),
        "disagreements": disagreements,
    }


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
