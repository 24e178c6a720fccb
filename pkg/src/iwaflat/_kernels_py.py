"""Pure-Python (numpy) versions of the compiled kernels in ``_kernels.pyx``.

Same signatures, same step-size controller, same projection; results agree
with the compiled versions to rounding.
"""
import numpy as np

BACKEND = "python"

_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def gram_schmidt_nak(g):
    """Return (n_part, a_diag, k_part) with g = n_part @ diag(a_diag) @ k_part."""
    W = np.array(g, dtype=float)
    n = W.shape[0]
    if W.shape != (n, n):
        raise ValueError("expected a square matrix")
    N = np.eye(n)
    norms2 = np.empty(n)
    for i in range(n - 1, -1, -1):
        for _ in range(2):
            for j in range(i + 1, n):
                c = (W[i] @ W[j]) / norms2[j]
                W[i] -= c * W[j]
                N[i, j] += c
        nrm2 = W[i] @ W[i]
        if not (nrm2 > 0.0) or not np.isfinite(nrm2):
            raise ZeroDivisionError("matrix is singular")
        norms2[i] = nrm2
    a = np.sqrt(norms2)
    return N, a, W / a[:, None]


def flow_field(X):
    X = np.asarray(X, dtype=float)
    U = np.triu(X, 1)
    K = U.T - U
    return K @ X - X @ K


def dopri_advance(X, t0, t1, h, rtol, atol, hmin, max_steps):
    """Advance X (modified in place) from t0 to t1; see the compiled version."""
    n = X.shape[0]
    t = t0
    accepted = rejected = 0
    status = 0
    k = [None] * 7
    k[0] = flow_field(X)
    while t < t1:
        if accepted + rejected >= max_steps:
            status = 2
            break
        hh = min(h, t1 - t)
        for s in range(1, 6):
            Y = X + hh * sum(a * k[m] for m, a in enumerate(_A[s]))
            k[s] = flow_field(Y)
        Z = X + hh * sum(b * k[m] for m, b in enumerate(_B) if b)
        k[6] = flow_field(Z)
        e = hh * sum(c * k[m] for m, c in enumerate(_E) if c)
        sc = atol + rtol * np.maximum(np.abs(X), np.abs(Z))
        err = float(np.max(np.abs(e) / sc))
        if not np.isfinite(err):
            status = 3
            break
        if err <= 1.0:
            t = t1 if hh < h else t + hh
            accepted += 1
            Z = 0.5 * (Z + Z.T)
            Z -= (np.trace(Z) / n) * np.eye(n)
            X[...] = Z
            k[0] = flow_field(X)
        else:
            rejected += 1
        fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        if err <= 1.0 and hh < h:
            h = max(h, hh * fac)
        else:
            h = hh * fac
        if t < t1 and h < hmin:
            status = 1
            break
    return t, h, accepted, rejected, status
