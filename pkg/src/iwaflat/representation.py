"""Weight-graded representations of SL_n(R) with Iwasawa-compatible bases.

Two representations are provided: ``Std`` (``rho(g) = g``) and ``Adjoint``
(``rho(g)`` is the matrix of ``X -> g X g^{-1}`` on an orthonormal basis of
sl_n).  Basis vectors are sorted by non-increasing weight, so that the images
of N, A and K are unipotent upper triangular, positive diagonal and
orthogonal respectively.  ``rho(g)`` is written in the column convention
(column ``c`` holds the coordinates of the image of basis vector ``c``); for
``Std`` this is ``g`` itself and its rows are the images of the basis vectors
under the right action ``v -> v g``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np

from .errors import InputError
from .linalg import orthonormal_traceless_basis


def dominant_vector(n: int) -> np.ndarray:
    """Strictly dominant vector (n-1, n-3, ..., -(n-1)) used to sort weights."""
    return np.arange(n - 1, -n, -2, dtype=float)


def weight_lt(mu, lam) -> bool:
    """``mu < lam`` in root order: lam - mu is a nonzero sum of simple roots.

    Equivalently every prefix sum of lam - mu is a nonnegative integer and the
    total is zero.
    """
    d = np.asarray(lam, dtype=float) - np.asarray(mu, dtype=float)
    if not np.any(d):
        return False
    c = np.cumsum(d)
    if abs(c[-1]) > 1e-9:
        return False
    r = np.round(c)
    return bool(np.all(np.abs(c - r) <= 1e-9) and np.all(r >= 0))


@dataclass(frozen=True)
class WeightedRep:
    name: str
    n: int
    basis_weights: np.ndarray  # (d, n) integer-valued
    _apply: Callable = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.basis_weights)

    def apply(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if g.shape != (self.n, self.n):
            raise InputError(f"{self.name} expects {self.n}x{self.n} matrices")
        return self._apply(g)

    __call__ = apply

    @cached_property
    def weight_keys(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(int(x) for x in w) for w in np.rint(self.basis_weights))

    @cached_property
    def distinct_weights(self) -> tuple[tuple[int, ...], ...]:
        """Distinct weights in basis order (non-increasing)."""
        seen = []
        for w in self.weight_keys:
            if w not in seen:
                seen.append(w)
        return tuple(seen)

    def multiplicity(self, lam) -> int:
        return self.weight_keys.count(tuple(int(x) for x in lam))

    def block_below(self, lam) -> tuple[int, list[int]]:
        return block_below(lam, self)


def block_below(lam, rep: WeightedRep) -> tuple[int, list[int]]:
    """(s_lambda, indices of basis vectors whose weight is strictly below lambda)."""
    key = tuple(int(x) for x in np.rint(lam))
    if key not in rep.weight_keys:
        raise InputError(f"{key} is not a weight of {rep.name}")
    return _block_below(rep.name, rep.n, key)


@lru_cache(maxsize=None)
def _block_below(name: str, n: int, key: tuple[int, ...]):
    rep = _REPS[name](n)
    idx = [i for i, w in enumerate(rep.weight_keys) if weight_lt(w, key)]
    return len(idx), idx


@lru_cache(maxsize=None)
def std_rep(n: int) -> WeightedRep:
    if n < 2:
        raise InputError("n must be at least 2")
    return WeightedRep("std", n, np.eye(n), lambda g: g.copy())


def _adjoint_basis(n: int):
    """Orthonormal basis matrices of sl_n and their weights, sorted by weight."""
    dom = dominant_vector(n)
    items = []
    for i in range(n):
        for j in range(n):
            if i != j:
                w = np.zeros(n)
                w[i], w[j] = 1.0, -1.0
                B = np.zeros((n, n))
                B[i, j] = 1.0
                items.append((w, (0, i, j), B))
    Z = orthonormal_traceless_basis(n)
    for c in range(n - 1):
        items.append((np.zeros(n), (1, c, c), np.diag(Z[:, c])))
    items.sort(key=lambda it: (-float(it[0] @ dom), tuple(-it[0]), it[1]))
    weights = np.array([it[0] for it in items])
    mats = np.array([it[2] for it in items])
    return weights, mats


@lru_cache(maxsize=None)
def adjoint_rep(n: int) -> WeightedRep:
    if n < 2:
        raise InputError("n must be at least 2")
    weights, mats = _adjoint_basis(n)
    Bm = mats.reshape(len(mats), -1)  # rows: flattened orthonormal basis

    def apply(g):
        gi = np.linalg.inv(g)
        # vec(g B g^{-1}) = (g kron g^{-T}) vec(B) in row-major flattening
        return Bm @ np.kron(g, gi.T) @ Bm.T

    return WeightedRep("adjoint", n, weights, apply)


_REPS = {"std": std_rep, "adjoint": adjoint_rep}


def get_rep(name: str, n: int) -> WeightedRep:
    try:
        return _REPS[name.lower()](n)
    except KeyError:
        raise InputError(f"unknown representation {name!r} (expected std or adjoint)") from None
