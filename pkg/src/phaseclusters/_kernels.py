"""Time-stepping kernels for the full oscillator system.

Two interchangeable backends: numba-compiled loops (default) and plain numpy.
Set PHASECLUSTERS_DISABLE_NUMBA=1 to force the numpy path; it is also used
automatically when numba is not importable.

The right-hand side uses the mean-field identity

    sum_j cos(r(x_i - x_j)) = cos(r x_i) C_r + sin(r x_i) S_r
    sum_j sin(r(x_i - x_j)) = sin(r x_i) C_r - cos(r x_i) S_r

with C_r = sum_j cos(r x_j), S_r = sum_j sin(r x_j), so one evaluation costs
O(N R) instead of O(N^2 R). Oscillators with bitwise equal phases receive
bitwise equal velocities, which keeps cluster subspaces exactly invariant.

Phases are wrapped to [0, 2pi) after every step; otherwise increments of the
order 1e-14 (weak noise) would be lost to rounding once the unwrapped phases
grow large.
"""

from __future__ import annotations

import os

import numpy as np

TWO_PI = 2.0 * np.pi

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_disabled() -> bool:
    return os.environ.get("PHASECLUSTERS_DISABLE_NUMBA", "").strip().lower() not in (
        "",
        "0",
        "false",
        "no",
    )


_backend = "numba" if HAVE_NUMBA and not _env_disabled() else "numpy"


def backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Switch between "numba" and "numpy" at runtime (benchmarks, tests)."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not available")
    _backend = name


# -- scalar loop versions (compiled by numba) --------------------------------


def _rhs_loop(theta, omega, c, s, out):
    N = theta.shape[0]
    R = c.shape[0]
    for i in range(N):
        out[i] = 0.0
    for r in range(R):
        Cr = 0.0
        Sr = 0.0
        for j in range(N):
            Cr += np.cos(r * theta[j])
            Sr += np.sin(r * theta[j])
        for i in range(N):
            ci = np.cos(r * theta[i])
            si = np.sin(r * theta[i])
            out[i] += c[r] * (ci * Cr + si * Sr) + s[r] * (si * Cr - ci * Sr)
    for i in range(N):
        out[i] = omega + out[i] / N


def _wrap_inplace_loop(theta):
    for i in range(theta.shape[0]):
        x = theta[i] % TWO_PI
        if x >= TWO_PI:
            x = 0.0
        theta[i] = x


def _all_finite_loop(theta):
    for i in range(theta.shape[0]):
        if not np.isfinite(theta[i]):
            return False
    return True


def _rk4_chunk_loop(theta, omega, c, s, dt, nsteps, stride, out):
    N = theta.shape[0]
    k1 = np.empty(N)
    k2 = np.empty(N)
    k3 = np.empty(N)
    k4 = np.empty(N)
    tmp = np.empty(N)
    row = 0
    for n in range(1, nsteps + 1):
        _rhs(theta, omega, c, s, k1)
        for i in range(N):
            tmp[i] = theta[i] + 0.5 * dt * k1[i]
        _rhs(tmp, omega, c, s, k2)
        for i in range(N):
            tmp[i] = theta[i] + 0.5 * dt * k2[i]
        _rhs(tmp, omega, c, s, k3)
        for i in range(N):
            tmp[i] = theta[i] + dt * k3[i]
        _rhs(tmp, omega, c, s, k4)
        for i in range(N):
            theta[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if not _all_finite(theta):
            return n
        _wrap_inplace(theta)
        if n % stride == 0:
            for i in range(N):
                out[row, i] = theta[i]
            row += 1
    return -1


def _em_chunk_loop(theta, omega, c, s, dt, noise, stride, out):
    N = theta.shape[0]
    f = np.empty(N)
    row = 0
    for n in range(1, noise.shape[0] + 1):
        _rhs(theta, omega, c, s, f)
        for i in range(N):
            theta[i] += dt * f[i] + noise[n - 1, i]
        if not _all_finite(theta):
            return n
        _wrap_inplace(theta)
        if n % stride == 0:
            for i in range(N):
                out[row, i] = theta[i]
            row += 1
    return -1


if HAVE_NUMBA:
    _rhs = numba.njit(cache=True, nogil=True)(_rhs_loop)
    _wrap_inplace = numba.njit(cache=True, nogil=True)(_wrap_inplace_loop)
    _all_finite = numba.njit(cache=True, nogil=True)(_all_finite_loop)
    _rk4_chunk_nb = numba.njit(cache=True, nogil=True)(_rk4_chunk_loop)
    _em_chunk_nb = numba.njit(cache=True, nogil=True)(_em_chunk_loop)
else:  # pragma: no cover
    _rhs = _rhs_loop
    _wrap_inplace = _wrap_inplace_loop
    _all_finite = _all_finite_loop
    _rk4_chunk_nb = _em_chunk_nb = None


# -- vectorized numpy versions ------------------------------------------------


def rhs_numpy(theta, omega, c, s):
    r = np.arange(c.shape[0])
    rx = np.outer(theta, r)
    cos_rx = np.cos(rx)
    sin_rx = np.sin(rx)
    C = cos_rx.sum(axis=0)
    S = sin_rx.sum(axis=0)
    acc = (cos_rx * C + sin_rx * S) @ c + (sin_rx * C - cos_rx * S) @ s
    return omega + acc / theta.shape[0]


def _wrap_numpy(theta):
    theta %= TWO_PI
    theta[theta >= TWO_PI] = 0.0


def _rk4_chunk_numpy(theta, omega, c, s, dt, nsteps, stride, out):
    row = 0
    for n in range(1, nsteps + 1):
        k1 = rhs_numpy(theta, omega, c, s)
        k2 = rhs_numpy(theta + 0.5 * dt * k1, omega, c, s)
        k3 = rhs_numpy(theta + 0.5 * dt * k2, omega, c, s)
        k4 = rhs_numpy(theta + dt * k3, omega, c, s)
        theta += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(theta)):
            return n
        _wrap_numpy(theta)
        if n % stride == 0:
            out[row] = theta
            row += 1
    return -1


def _em_chunk_numpy(theta, omega, c, s, dt, noise, stride, out):
    row = 0
    for n in range(1, noise.shape[0] + 1):
        theta += dt * rhs_numpy(theta, omega, c, s) + noise[n - 1]
        if not np.all(np.isfinite(theta)):
            return n
        _wrap_numpy(theta)
        if n % stride == 0:
            out[row] = theta
            row += 1
    return -1


# -- dispatch -------------------------------------------------------------------


def rhs(theta, omega, c, s):
    """Velocity vector of the full system (fresh array)."""
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    if _backend == "numba":
        out = np.empty_like(theta)
        _rhs(theta, float(omega), c, s, out)
        return out
    return rhs_numpy(theta, omega, c, s)


def rk4_chunk(theta, omega, c, s, dt, nsteps, stride, out):
    """Advance ``theta`` in place by ``nsteps`` RK4 steps, writing every
    ``stride``-th state into consecutive rows of ``out``. Returns the 1-based
    step at which a non-finite value appeared, or -1."""
    fn = _rk4_chunk_nb if _backend == "numba" else _rk4_chunk_numpy
    return int(fn(theta, float(omega), c, s, float(dt), int(nsteps), int(stride), out))


def em_chunk(theta, omega, c, s, dt, noise, stride, out):
    """Euler-Maruyama counterpart of rk4_chunk; ``noise`` holds the already
    scaled increments, one row per step."""
    fn = _em_chunk_nb if _backend == "numba" else _em_chunk_numpy
    return int(fn(theta, float(omega), c, s, float(dt), noise, int(stride), out))
