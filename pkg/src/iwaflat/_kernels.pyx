# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: bottom-up Gram-Schmidt NAK factorization and the
Dormand-Prince integrator for X' = [E_k X, X].

Must stay call-compatible with ``_kernels_py``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, pow, isfinite

cnp.import_array()

BACKEND = "cython"


def gram_schmidt_nak(g):
    """Return (n_part, a_diag, k_part) with g = n_part @ diag(a_diag) @ k_part."""
    cdef double[:, ::1] G = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t n = G.shape[0]
    if G.shape[1] != n:
        raise ValueError("expected a square matrix")
    nm = np.eye(n)
    W = np.array(G, copy=True)
    a = np.empty(n)
    km = np.empty((n, n))
    cdef double[:, ::1] N = nm
    cdef double[:, ::1] Wv = W
    cdef double[::1] A = a
    cdef double[:, ::1] K = km
    cdef Py_ssize_t i, j, m, sweep
    cdef double c, nrm2

    cdef double[::1] norms2 = np.empty(n)
    for i in range(n - 1, -1, -1):
        for sweep in range(2):
            for j in range(i + 1, n):
                c = 0.0
                for m in range(n):
                    c += Wv[i, m] * Wv[j, m]
                c /= norms2[j]
                for m in range(n):
                    Wv[i, m] -= c * Wv[j, m]
                N[i, j] += c
        nrm2 = 0.0
        for m in range(n):
            nrm2 += Wv[i, m] * Wv[i, m]
        if not (nrm2 > 0.0) or not isfinite(nrm2):
            raise ZeroDivisionError("matrix is singular")
        norms2[i] = nrm2
        A[i] = sqrt(nrm2)
        for m in range(n):
            K[i, m] = Wv[i, m] / A[i]
    return nm, a, km


cdef void _field(double[:, ::1] X, double[:, ::1] out, Py_ssize_t n) noexcept nogil:
    # out = [K, X] with K = U^T - U, U the strictly upper part of X
    cdef Py_ssize_t i, j, m
    cdef double s, kim, kmj
    for i in range(n):
        for j in range(n):
            s = 0.0
            for m in range(n):
                if m < i:
                    kim = X[m, i]
                elif m > i:
                    kim = -X[i, m]
                else:
                    kim = 0.0
                if j < m:
                    kmj = X[j, m]
                elif j > m:
                    kmj = -X[m, j]
                else:
                    kmj = 0.0
                s += kim * X[m, j] - X[i, m] * kmj
            out[i, j] = s


def flow_field(X):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0]
    out = np.empty((n, n))
    _field(Xv, out, n)
    return out


# Dormand-Prince 5(4)
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40


def dopri_advance(X, double t0, double t1, double h, double rtol, double atol,
                  double hmin, long max_steps):
    """Advance X (modified in place) from t0 to t1.

    Returns (t_reached, h_next, accepted_steps, rejected_steps, status) with
    status 0 = reached t1, 1 = step underflow, 2 = step budget exhausted,
    3 = non-finite state.
    """
    cdef double[:, ::1] Xv = X
    cdef Py_ssize_t n = Xv.shape[0]
    cdef Py_ssize_t i, j
    k_all = np.zeros((7, n, n))
    cdef double[:, :, ::1] k = k_all
    tmp_arr = np.zeros((n, n))
    new_arr = np.zeros((n, n))
    cdef double[:, ::1] Y = tmp_arr
    cdef double[:, ::1] Z = new_arr
    cdef double t = t0, hh, err, sc, e, fac, tr, sym
    cdef long accepted = 0, rejected = 0
    cdef int status = 0
    cdef bint have_k1 = False

    with nogil:
        while t < t1:
            if accepted + rejected >= max_steps:
                status = 2
                break
            hh = h
            if t + hh > t1:
                hh = t1 - t
            if not have_k1:
                _field(Xv, k[0], n)
                have_k1 = True
            for i in range(n):
                for j in range(n):
                    Y[i, j] = Xv[i, j] + hh * A21 * k[0, i, j]
            _field(Y, k[1], n)
            for i in range(n):
                for j in range(n):
                    Y[i, j] = Xv[i, j] + hh * (A31 * k[0, i, j] + A32 * k[1, i, j])
            _field(Y, k[2], n)
            for i in range(n):
                for j in range(n):
                    Y[i, j] = Xv[i, j] + hh * (A41 * k[0, i, j] + A42 * k[1, i, j] + A43 * k[2, i, j])
            _field(Y, k[3], n)
            for i in range(n):
                for j in range(n):
                    Y[i, j] = Xv[i, j] + hh * (A51 * k[0, i, j] + A52 * k[1, i, j]
                                               + A53 * k[2, i, j] + A54 * k[3, i, j])
            _field(Y, k[4], n)
            for i in range(n):
                for j in range(n):
                    Y[i, j] = Xv[i, j] + hh * (A61 * k[0, i, j] + A62 * k[1, i, j] + A63 * k[2, i, j]
                                               + A64 * k[3, i, j] + A65 * k[4, i, j])
            _field(Y, k[5], n)
            for i in range(n):
                for j in range(n):
                    Z[i, j] = Xv[i, j] + hh * (B1 * k[0, i, j] + B3 * k[2, i, j] + B4 * k[3, i, j]
                                               + B5 * k[4, i, j] + B6 * k[5, i, j])
            _field(Z, k[6], n)
            err = 0.0
            for i in range(n):
                for j in range(n):
                    e = hh * (E1 * k[0, i, j] + E3 * k[2, i, j] + E4 * k[3, i, j]
                              + E5 * k[4, i, j] + E6 * k[5, i, j] + E7 * k[6, i, j])
                    sc = atol + rtol * (fabs(Xv[i, j]) if fabs(Xv[i, j]) > fabs(Z[i, j]) else fabs(Z[i, j]))
                    e = fabs(e) / sc
                    if e > err:
                        err = e
            if not isfinite(err):
                status = 3
                break
            if err <= 1.0:
                t = t1 if hh < h else t + hh
                accepted += 1
                # project back to symmetric traceless matrices
                tr = 0.0
                for i in range(n):
                    tr += Z[i, i]
                tr /= n
                for i in range(n):
                    for j in range(i, n):
                        sym = 0.5 * (Z[i, j] + Z[j, i])
                        Xv[i, j] = sym
                        Xv[j, i] = sym
                    Xv[i, i] -= tr
                _field(Xv, k[0], n)
            else:
                rejected += 1
            if err == 0.0:
                fac = 5.0
            else:
                fac = 0.9 * pow(err, -0.2)
                if fac < 0.2:
                    fac = 0.2
                elif fac > 5.0:
                    fac = 5.0
            if err <= 1.0 and hh < h:
                # clipped to land on t1: do not let the short step shrink h
                if hh * fac > h:
                    h = hh * fac
            else:
                h = hh * fac
            if t < t1 and h < hmin:
                status = 1
                break
    return t, h, accepted, rejected, status
