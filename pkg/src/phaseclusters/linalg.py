"""Dense eigenvalues for small real matrices.

Householder reduction to upper Hessenberg form followed by the Francis
double-shift QR iteration with deflation. Intended for the tiny matrices that
show up in cluster stability analysis (dimension at most 16).
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

MAX_DIM = 16
MAX_ITS_PER_ROOT = 60


class EigenConvergenceError(RuntimeError):
    def __init__(self, iterations: int, remaining: int):
        super().__init__(
            f"QR iteration did not converge after {iterations} sweeps "
            f"({remaining} eigenvalues outstanding)"
        )
        self.iterations = iterations
        self.remaining = remaining


def hessenberg(A: ArrayLike) -> NDArray[np.float64]:
    """Orthogonally similar upper Hessenberg matrix (Householder reflections)."""
    H = np.array(A, dtype=float, copy=True)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x
        v[0] += math.copysign(alpha, x[0])
        vnorm = np.linalg.norm(v)
        if vnorm == 0.0:
            continue
        v /= vnorm
        H[k + 1 :, k:] -= 2.0 * np.outer(v, v @ H[k + 1 :, k:])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v)
        H[k + 2 :, k] = 0.0
    return H


def _hqr(a: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Eigenvalues of an upper Hessenberg matrix; ``a`` is destroyed."""
    n = a.shape[0]
    wr = np.zeros(n)
    wi = np.zeros(n)
    anorm = float(np.sum(np.abs(np.triu(a, -1))))
    nn = n - 1
    t = 0.0
    total_its = 0
    while nn >= 0:
        its = 0
        while True:
            # look for a negligible subdiagonal element
            l = nn
            while l >= 1:
                s = abs(a[l - 1, l - 1]) + abs(a[l, l])
                if s == 0.0:
                    s = anorm
                if abs(a[l, l - 1]) + s == s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                    wi[nn - 1] = wi[nn] = 0.0
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1] = -z
                    wi[nn] = z
                nn -= 2
                break
            if its == MAX_ITS_PER_ROOT:
                raise EigenConvergenceError(total_its, nn + 1)
            if its in (10, 20, 40):
                # exceptional shift
                t += x
                for i in range(nn + 1):
                    a[i, i] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                x = y = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            total_its += 1
            # two consecutive small subdiagonal elements
            m = nn - 2
            while m >= l:
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u + v == v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
                if i != m + 2:
                    a[i, i - 3] = 0.0
            # double-shift QR sweep on rows l..nn, columns m..nn
            for k in range(m, nn):
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k, k - 1] = -a[k, k - 1]
                else:
                    a[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                for j in range(k, nn + 1):
                    p = a[k, j] + q * a[k + 1, j]
                    if k != nn - 1:
                        p += r * a[k + 2, j]
                        a[k + 2, j] -= p * z
                    a[k + 1, j] -= p * y
                    a[k, j] -= p * x
                mmin = nn if nn < k + 3 else k + 3
                for i in range(l, mmin + 1):
                    p = x * a[i, k] + y * a[i, k + 1]
                    if k != nn - 1:
                        p += z * a[i, k + 2]
                        a[i, k + 2] -= p * r
                    a[i, k + 1] -= p * q
                    a[i, k] -= p
    return wr, wi


def eigenvalues_small_real_matrix(A: ArrayLike) -> NDArray[np.complex128]:
    """Full spectrum of a small real square matrix.

    Complex eigenvalues come in exactly conjugate pairs. The result is sorted
    by (real part, imaginary part).

    Raises
    ------
    ValueError
        Non-square input, non-finite entries or dimension above 16.
    EigenConvergenceError
        QR iteration failed to deflate.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n > MAX_DIM:
        raise ValueError(f"dimension {n} exceeds the supported maximum {MAX_DIM}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if n == 0:
        return np.zeros(0, dtype=complex)
    wr, wi = _hqr(hessenberg(A))
    eig = wr + 1j * wi
    order = np.lexsort((eig.imag, eig.real))
    return eig[order]


def eigenpair_residuals(
    A: ArrayLike, eigenvalues: ArrayLike, iterations: int = 3
) -> NDArray[np.float64]:
    """Relative residual ||A v - lam v|| / ||A|| for each eigenvalue, with v
    recovered by shifted inverse iteration."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    scale = max(np.linalg.norm(A, 2), 1e-300)
    rng = np.random.default_rng(0)
    out = np.empty(len(eigenvalues))
    for idx, lam in enumerate(np.asarray(eigenvalues, dtype=complex)):
        # offset keeps the shifted matrix invertible at an exact eigenvalue
        shift = lam + 1e-10 * scale * (1 + 1j)
        M = A.astype(complex) - shift * np.eye(n)
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        for _ in range(iterations):
            v = np.linalg.solve(M, v)
            v /= np.linalg.norm(v)
        out[idx] = np.linalg.norm(A @ v - lam * v) / scale
    return out
