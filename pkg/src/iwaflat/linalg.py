"""Dense linear algebra and exterior-power utilities.

Exterior powers use the induced orthonormal basis ``e_T = e_{t1} ^ ... ^ e_{tk}``
indexed by k-subsets ``T`` of ``{0, ..., n-1}`` in lexicographic order.  The
coordinate of ``v_1 ^ ... ^ v_k`` at ``T`` is the k x k minor of the stacked
vectors on the columns ``T``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import DegenerateInputError, InputError

#: Linear-independence threshold, relative to the product of vector norms.
DEGENERACY_RTOL = 1e-10
#: Absolute floor used to avoid division underflow.
TINY = 1e-300


@lru_cache(maxsize=None)
def subsets(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    """Lexicographically ordered k-subsets of ``range(n)``."""
    return tuple(combinations(range(n), k))


@lru_cache(maxsize=None)
def subset_array(n: int, k: int) -> np.ndarray:
    arr = np.array(subsets(n, k), dtype=np.intp).reshape(-1, k)
    arr.flags.writeable = False
    return arr


@lru_cache(maxsize=None)
def subset_index(n: int, k: int) -> dict[tuple[int, ...], int]:
    return {T: i for i, T in enumerate(subsets(n, k))}


@dataclass(frozen=True)
class WedgeVector:
    """An element of the k-th exterior power of R^n in the subset basis."""

    ambient_dim: int
    degree: int
    coords: np.ndarray

    def __post_init__(self):
        expected = len(subsets(self.ambient_dim, self.degree))
        if self.coords.shape != (expected,):
            raise InputError(
                f"wedge coordinates must have length C({self.ambient_dim},{self.degree})={expected}"
            )

    @property
    def basis(self) -> tuple[tuple[int, ...], ...]:
        return subsets(self.ambient_dim, self.degree)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def dot(self, other: "WedgeVector") -> float:
        if (self.ambient_dim, self.degree) != (other.ambient_dim, other.degree):
            raise InputError("wedge vectors live in different exterior powers")
        return float(self.coords @ other.coords)

    def __getitem__(self, T) -> float:
        return float(self.coords[subset_index(self.ambient_dim, self.degree)[tuple(T)]])


def _as_rows(vectors) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(vectors, dtype=float))
    if rows.ndim != 2:
        raise InputError("expected a list of vectors")
    if not np.all(np.isfinite(rows)):
        raise InputError("vectors must have finite entries")
    return rows


def minors(rows: np.ndarray) -> np.ndarray:
    """All maximal minors of a k x n array, columns in lexicographic subset order."""
    k, n = rows.shape
    if k == 0:
        return np.ones(1)
    if k > n:
        raise InputError(f"cannot wedge {k} vectors in dimension {n}")
    if k == 1:
        return rows[0].copy()
    cols = subset_array(n, k)
    blocks = rows[:, cols]  # (k, m, k)
    return np.linalg.det(np.moveaxis(blocks, 1, 0))


def wedge(vectors) -> WedgeVector:
    """Exterior product of k vectors of R^n."""
    rows = _as_rows(vectors)
    k, n = rows.shape
    if not 1 <= k <= n:
        raise InputError(f"need 1 <= k <= n, got k={k}, n={n}")
    return WedgeVector(n, k, minors(rows))


def gram_det(vectors) -> float:
    rows = _as_rows(vectors)
    return float(np.linalg.det(rows @ rows.T))


def _independent_wedge(W) -> tuple[np.ndarray, WedgeVector]:
    rows = _as_rows(W)
    w = wedge(rows)
    scale = float(np.prod(np.linalg.norm(rows, axis=1)))
    if w.norm() <= DEGENERACY_RTOL * max(scale, TINY):
        raise DegenerateInputError("spanning vectors are linearly dependent")
    return rows, w


def proj_norm_via_wedge(v, W) -> float:
    """Norm of the projection of ``v`` onto the orthogonal complement of span(W).

    Uses ``|v ^ w_1 ^ ... ^ w_k| / |w_1 ^ ... ^ w_k|``.
    """
    rows, w = _independent_wedge(W)
    v = np.asarray(v, dtype=float)
    if v.shape != (rows.shape[1],):
        raise InputError("dimension mismatch between v and W")
    if rows.shape[0] == rows.shape[1]:
        return 0.0
    vw = wedge(np.vstack([v, rows]))
    return vw.norm() / w.norm()


def proj_coeff_via_wedge(v, W, i: int) -> float:
    """i-th coefficient of the orthogonal projection of ``v`` onto span(W), in the basis W.

    The coefficient is ``<w_1 ^ .. v (slot i) .. ^ w_k, w_1 ^ .. ^ w_k> / |w_1 ^ .. ^ w_k|^2``.
    """
    rows, w = _independent_wedge(W)
    v = np.asarray(v, dtype=float)
    if v.shape != (rows.shape[1],):
        raise InputError("dimension mismatch between v and W")
    if not 0 <= i < rows.shape[0]:
        raise InputError(f"index {i} out of range for {rows.shape[0]} spanning vectors")
    swapped = rows.copy()
    swapped[i] = v
    return wedge(swapped).dot(w) / w.norm() ** 2


def sym_eigen(S) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvectors (columns) of a symmetric matrix."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InputError("expected a square matrix")
    scale = max(np.linalg.norm(S), TINY)
    if np.linalg.norm(S - S.T) > 1e-10 * scale:
        raise InputError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (S + S.T))
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_orthogonal(n: int, seed=None) -> np.ndarray:
    """Haar-distributed element of SO(n).

    Gaussian matrix, QR with the sign convention diag(R) > 0, then the first
    column is negated if the determinant is -1.
    """
    if n < 2:
        raise InputError("n must be at least 2")
    rng = as_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def orthonormal_traceless_basis(n: int) -> np.ndarray:
    """n x (n-1) matrix whose columns are an orthonormal basis of traceless vectors.

    Gram-Schmidt on e_i - e_{i+1} in index order.
    """
    B = np.zeros((n, n - 1))
    for i in range(n - 1):
        v = np.zeros(n)
        v[i], v[i + 1] = 1.0, -1.0
        v -= B[:, :i] @ (B[:, :i].T @ v)
        B[:, i] = v / np.linalg.norm(v)
    return B


def polar_orthogonal(m: np.ndarray) -> np.ndarray:
    """Orthogonal factor of the polar decomposition."""
    u, _, vt = np.linalg.svd(m)
    return u @ vt
