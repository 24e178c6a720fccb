"""SL_n(R) structure: Iwasawa NAK factorization, Lie algebra projections,
restricted roots of sl_n, chamber/regularity/genericity tests, Weyl group.

Conventions
-----------
* ``g = n a k`` with ``n`` unit upper triangular, ``a`` positive diagonal and
  ``k`` in SO(n); computed by bottom-up Gram-Schmidt on the rows of ``g``.
* Cartan vectors are traceless length-n arrays (diagonals of elements of a).
* The pairing on sl_n is the trace form ``<X, Y> = tr(XY)``.
* ``Ad_g(X) = g X g^{-1}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import combinations, permutations

import numpy as np

from . import kernels
from .errors import DegenerateInputError, InputError
from .linalg import TINY, minors, subset_array, subset_index, subsets

#: relative tolerance for coordinate distinctness / vanishing subset sums
COORD_RTOL = 1e-9
DET_TOL = 1e-10


# -- group elements ---------------------------------------------------------

def as_matrix(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 1:
        raise InputError(f"expected a square matrix, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise InputError("matrix entries must be finite")
    return g


def as_group_element(g, tol: float = DET_TOL) -> np.ndarray:
    """Validate an element of SL_n(R)."""
    g = as_matrix(g)
    det = np.linalg.det(g)
    if abs(det - 1.0) > tol:
        raise InputError(f"determinant {float(det)!r} differs from 1")
    return g


def random_sl(n: int, rng) -> np.ndarray:
    """Gaussian matrix rescaled to determinant 1 (first row negated if needed)."""
    g = rng.standard_normal((n, n))
    det = np.linalg.det(g)
    if det < 0:
        g[0] = -g[0]
        det = -det
    return g / det ** (1.0 / n)


def exp_diag(t) -> np.ndarray:
    return np.diag(np.exp(np.asarray(t, dtype=float)))


def ad(g, X) -> np.ndarray:
    """Ad_g(X) = g X g^{-1}."""
    return g @ X @ np.linalg.inv(g)


def ad_orth(k, X) -> np.ndarray:
    """Ad_k(X) for orthogonal k."""
    return k @ X @ k.T


# -- Iwasawa decomposition --------------------------------------------------

@dataclass(frozen=True)
class IwasawaFactors:
    n_part: np.ndarray
    a_part: np.ndarray
    k_part: np.ndarray

    @property
    def a_diag(self) -> np.ndarray:
        return np.diag(self.a_part).copy()

    @property
    def H(self) -> np.ndarray:
        return np.log(self.a_diag)

    def product(self) -> np.ndarray:
        return self.n_part @ self.a_part @ self.k_part

    def __iter__(self):
        return iter((self.n_part, self.a_part, self.k_part))


def iwasawa(g) -> IwasawaFactors:
    """NAK factorization of an invertible matrix by bottom-up Gram-Schmidt on rows.

    Row ``i`` of ``n^{-1} g`` is row ``i`` of ``g`` minus its projection onto the
    span of the rows below it; ``a`` holds the norms of these orthogonal rows.
    """
    g = as_matrix(g)
    scale = np.prod(np.linalg.norm(g, axis=1))
    if abs(np.linalg.det(g)) <= 1e-14 * max(scale, TINY):
        raise DegenerateInputError("matrix is not invertible")
    try:
        n, a, k = kernels.gram_schmidt_nak(g)
    except ZeroDivisionError as exc:
        raise DegenerateInputError("matrix is not invertible") from exc
    return IwasawaFactors(n, np.diag(a), k)


def height_H(g) -> np.ndarray:
    """H(g) = log a(g), as a Cartan vector."""
    return iwasawa(g).H


def kappa(g) -> np.ndarray:
    return iwasawa(g).k_part


@lru_cache(maxsize=None)
def _drop_tables(n: int, d: int):
    """For each d-subset S and position p: index of S minus S[p] among (d-1)-subsets, and sign."""
    S = subset_array(n, d)
    lower = subset_index(n, d - 1)
    idx = np.empty((len(S), d), dtype=np.intp)
    for r, T in enumerate(subsets(n, d)):
        for p in range(d):
            idx[r, p] = lower[T[:p] + T[p + 1:]]
    sign = np.where(np.arange(d) % 2 == 0, 1.0, -1.0)
    return S, idx, sign


def _normalized(coords: np.ndarray, tS: np.ndarray) -> tuple[np.ndarray, float]:
    """Unit vector proportional to exp(tS) * coords, and log of the unnormalized norm."""
    nz = coords != 0.0
    if not np.any(nz):
        raise DegenerateInputError("vanishing wedge: matrix is not invertible")
    logs = np.full(coords.shape, -np.inf)
    logs[nz] = tS[nz] + np.log(np.abs(coords[nz]))
    m = logs.max()
    L = m + 0.5 * np.log(np.sum(np.exp(2.0 * (logs - m))))
    unit = np.zeros_like(coords)
    unit[nz] = np.sign(coords[nz]) * np.exp(logs[nz] - L)
    return unit, float(L)


class FlatIwasawa:
    """Iwasawa projections of ``g exp(t)`` for many Cartan vectors ``t``.

    All three projections are ratios of weighted sums over minors of ``g``:
    with ``U_i`` the wedge of rows ``i..n-1`` and ``a_S = exp(sum_{s in S} t_s)``,

    * ``H_i = log|U_i a| - log|U_{i+1} a|``,
    * ``k_{im} = sum_{S ni m} sign * (a_S U_{i,S} / |U_i a|) * (a_{S-m} U_{i+1,S-m} / |U_{i+1} a|)``,
    * ``n_{ij} = sum_S a_S^2 P_{ij,S} U_{j,S} / |U_j a|^2`` with ``P_ij`` the wedge of
      row ``i`` and rows ``j+1..n-1``.

    Minors are computed once; each evaluation works with normalized
    log-weights, so accuracy does not degrade as ``t`` grows (plain
    Gram-Schmidt on ``g exp(t)`` loses all digits once the spread of ``t``
    exceeds ~18).
    """

    def __init__(self, g):
        g = as_matrix(g)
        self.g = g
        n = self.n = g.shape[0]
        self.U = [minors(g[i:]) for i in range(n)] + [np.ones(1)]
        self.P = {
            (i, j): minors(np.vstack([g[i:i + 1], g[j + 1:]]))
            for i in range(n) for j in range(i + 1, n)
        }
        for i in range(n):
            if not np.any(self.U[i]):
                raise DegenerateInputError("matrix is not invertible")

    def _degree_weights(self, t):
        n = self.n
        return [t[subset_array(n, n - i)].sum(axis=1) if i < n else np.zeros(1) for i in range(n + 1)]

    def evaluate(self, t, need_n: bool = True):
        """Return (n_part or None, H, k_part) for ``g exp(t)``."""
        t = np.asarray(t, dtype=float)
        n = self.n
        if t.shape != (n,):
            raise InputError(f"Cartan vector must have length {n}")
        tS = self._degree_weights(t)
        units, logs = [], []
        for i in range(n + 1):
            u, L = _normalized(self.U[i], tS[i])
            units.append(u)
            logs.append(L)
        H = np.array([logs[i] - logs[i + 1] for i in range(n)])
        k = np.zeros((n, n))
        for i in range(n):
            d = n - i
            if d == 1:
                k[i, :] = units[i]
                continue
            S, idx, sign = _drop_tables(n, d)
            contrib = units[i][:, None] * units[i + 1][idx] * sign[None, :]
            np.add.at(k[i], S, contrib)
        npart = None
        if need_n:
            npart = np.eye(n)
            for (i, j), P in self.P.items():
                U = self.U[j]
                nz = U != 0.0
                w = np.zeros_like(U)
                w[nz] = np.exp(tS[j][nz] - logs[j]) * P[nz]
                npart[i, j] = float(w @ units[j])
        return npart, H, k

    def n_part_batch(self, T) -> np.ndarray:
        """N-parts of ``g exp(t)`` for each row ``t`` of ``T``; shape (m, n, n).

        Each entry is a weighted mean of the ratios ``P_S / U_S`` over subsets
        with ``U_S != 0``, with weights ``a_S^2 U_S^2``; it is evaluated with
        a per-row log shift.
        """
        T = np.atleast_2d(np.asarray(T, dtype=float))
        n = self.n
        out = np.broadcast_to(np.eye(n), (len(T), n, n)).copy()
        for j in range(1, n):
            U = self.U[j]
            nz = U != 0.0
            S = subset_array(n, n - j)[nz]
            logw = 2.0 * T[:, S].sum(axis=2) + np.log(U[nz] ** 2)[None, :]
            w = np.exp(logw - logw.max(axis=1, keepdims=True))
            den = w.sum(axis=1)
            for i in range(j):
                out[:, i, j] = (w @ (self.P[(i, j)][nz] / U[nz])) / den
        return out

    def factors(self, t) -> IwasawaFactors:
        npart, H, k = self.evaluate(t)
        return IwasawaFactors(npart, np.diag(np.exp(H)), k)

    def height(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        tS = self._degree_weights(t)
        logs = [_normalized(self.U[i], tS[i])[1] for i in range(self.n + 1)]
        return np.array([logs[i] - logs[i + 1] for i in range(self.n)])

    def kappa(self, t) -> np.ndarray:
        return self.evaluate(t, need_n=False)[2]


def flat_iwasawa(g, t) -> IwasawaFactors:
    """Iwasawa factors of ``g exp(t)`` (accurate for large ``t``)."""
    return FlatIwasawa(g).factors(t)


# -- Lie algebra projections --------------------------------------------------

def project_nak(X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split X = E_n X + E_a X + E_k X (strictly upper, diagonal, antisymmetric).

    The strictly lower part ``L`` goes to ``E_k X = L - L^T``; its reflection
    ``L^T`` joins the strictly upper part in ``E_n X``.
    """
    X = as_matrix(X)
    L = np.tril(X, -1)
    U = np.triu(X, 1)
    return U + L.T, np.diag(np.diag(X)), L - L.T


def E_n(X):
    return project_nak(X)[0]


def E_a(X) -> np.ndarray:
    """Diagonal part, as a vector."""
    return np.diag(X).copy()


def E_k(X):
    X = np.asarray(X, dtype=float)
    L = np.tril(X, -1)
    return L - L.T


def bracket(X, Y):
    return X @ Y - Y @ X


# -- roots and the Cartan subspace --------------------------------------------

@dataclass(frozen=True)
class RootDatum:
    """Restricted roots of sl_n: alpha = eps_i - eps_j stored as the pair (i, j)."""

    n: int
    roots: tuple = field(init=False)
    positives: tuple = field(init=False)
    simples: tuple = field(init=False)

    def __post_init__(self):
        n = self.n
        object.__setattr__(self, "roots", tuple((i, j) for i in range(n) for j in range(n) if i != j))
        object.__setattr__(self, "positives", tuple((i, j) for i in range(n) for j in range(i + 1, n)))
        object.__setattr__(self, "simples", tuple((i, i + 1) for i in range(n - 1)))

    def multiplicity(self, alpha) -> int:
        if tuple(alpha) not in self.roots:
            raise InputError(f"{alpha} is not a root")
        return 1

    def coroot(self, alpha) -> np.ndarray:
        """H_alpha = E_ii - E_jj as a Cartan vector."""
        i, j = alpha
        h = np.zeros(self.n)
        h[i], h[j] = 1.0, -1.0
        return h

    def evaluate(self, alpha, H) -> float:
        i, j = alpha
        return float(H[i] - H[j])

    def as_vector(self, alpha) -> np.ndarray:
        return self.coroot(alpha)

    @cached_property
    def simple_coroot_matrix(self) -> np.ndarray:
        return np.column_stack([self.coroot(a) for a in self.simples])


@lru_cache(maxsize=None)
def root_datum(n: int) -> RootDatum:
    if n < 2:
        raise InputError("n must be at least 2")
    return RootDatum(n)


def root_project(X, alpha) -> float:
    """Component of X in the root space g_alpha (the (i, j) matrix entry)."""
    i, j = alpha
    if i == j:
        raise InputError("diagonal positions are not root spaces")
    return float(np.asarray(X)[i, j])


def cartan_vector(H) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.ndim != 1:
        raise InputError("Cartan vector must be one-dimensional")
    if abs(H.sum()) > 1e-12 * max(1.0, np.abs(H).max()):
        raise InputError("Cartan vector must be traceless")
    return H


def _scale(H) -> float:
    return float(np.linalg.norm(H))


def is_regular(H, rtol: float = COORD_RTOL) -> bool:
    H = np.asarray(H, dtype=float)
    s = _scale(H)
    if s == 0.0:
        return False
    gaps = np.abs(H[:, None] - H[None, :])[np.triu_indices(len(H), 1)]
    return bool(np.all(gaps > rtol * s))


def is_generic(H, rtol: float = COORD_RTOL) -> bool:
    """Regular, and no proper nonempty subset of coordinates sums to zero.

    For SL_n the subspaces a^L of proper semistandard Levi subgroups are
    exactly the Cartan vectors that split into >= 2 blocks with zero sum.
    """
    H = np.asarray(H, dtype=float)
    if not is_regular(H, rtol):
        return False
    n = len(H)
    tol = rtol * _scale(H)
    for r in range(1, n):
        for T in combinations(range(n), r):
            if abs(H[list(T)].sum()) <= tol:
                return False
    return True


def in_positive_chamber(H, rtol: float = COORD_RTOL) -> bool:
    H = np.asarray(H, dtype=float)
    s = _scale(H)
    return bool(s > 0 and np.all(np.diff(H) < -rtol * s))


def c_alpha_coords(H) -> np.ndarray:
    """Coordinates in the simple coroot basis {E_ii - E_i+1,i+1}: prefix sums."""
    H = np.asarray(H, dtype=float)
    return np.cumsum(H)[:-1]


def weyl_orbit(H) -> list[np.ndarray]:
    """All distinct coordinate permutations of H (lexicographically sorted)."""
    H = np.asarray(H, dtype=float)
    pts = sorted(set(permutations(H.tolist())), reverse=True)
    return [np.array(p) for p in pts]


def permutation_matrix(perm) -> np.ndarray:
    """Signed permutation in SO(n) with (m H m^T)_ii = H[perm[i]]."""
    n = len(perm)
    m = np.zeros((n, n))
    m[np.arange(n), perm] = 1.0
    if np.linalg.det(m) < 0:
        m[0] = -m[0]
    return m


def sign_matrices(n: int) -> list[np.ndarray]:
    """The group M: diagonal +-1 matrices of determinant 1."""
    out = []
    for signs in np.ndindex(*(2,) * n):
        d = np.where(np.array(signs) == 1, -1.0, 1.0)
        if np.prod(d) > 0:
            out.append(np.diag(d))
    return out


def random_M(n: int, rng) -> np.ndarray:
    d = rng.choice([-1.0, 1.0], size=n)
    if np.prod(d) < 0:
        d[0] = -d[0]
    return np.diag(d)


def random_M_prime(n: int, rng) -> np.ndarray:
    return random_M(n, rng) @ permutation_matrix(rng.permutation(n))


def random_unipotent(n: int, rng, scale: float = 1.0) -> np.ndarray:
    return np.eye(n) + np.triu(scale * rng.standard_normal((n, n)), 1)


def random_positive_diagonal(n: int, rng, scale: float = 1.0) -> np.ndarray:
    t = scale * rng.standard_normal(n)
    return exp_diag(t - t.mean())


def random_cartan(n: int, rng, normalize: bool = True) -> np.ndarray:
    H = rng.standard_normal(n)
    H -= H.mean()
    return H / np.linalg.norm(H) if normalize else H


def dominant_default(n: int) -> np.ndarray:
    """Unit generic vector in the positive chamber: centered (2^(n-1), ..., 2, 1)."""
    h = 2.0 ** np.arange(n - 1, -1, -1)
    h -= h.mean()
    return h / np.linalg.norm(h)
