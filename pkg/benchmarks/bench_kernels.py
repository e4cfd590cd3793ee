"""Compare the numba and numpy integration backends.

    python3 benchmarks/bench_kernels.py [--steps 20000] [--repeat 3]

Both backends integrate the same Case 1 configuration from the same seed; the
final states are checked for agreement before timings are reported.
"""
import argparse
import time

import numpy as np

from phaseclusters import _kernels
from phaseclusters.coupling import preset


def run(backend, theta0, c, s, dt, nsteps, noise):
    _kernels.set_backend(backend)
    theta = theta0.copy()
    out = np.empty((1, theta.size))
    t0 = time.perf_counter()
    if noise is None:
        _kernels.rk4_chunk(theta, 0.0, c, s, dt, nsteps, nsteps, out)
    else:
        _kernels.em_chunk(theta, 0.0, c, s, dt, noise, nsteps, out)
    return time.perf_counter() - t0, theta


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--N", type=int, default=6)
    args = ap.parse_args()

    g = preset("case1")
    c, s = np.ascontiguousarray(g.c), np.ascontiguousarray(g.s)
    rng = np.random.default_rng(0)
    theta0 = rng.uniform(0, 2 * np.pi, args.N)
    noise = 1e-12 * np.sqrt(1e-3) * rng.standard_normal((args.steps, args.N))

    if not _kernels.HAVE_NUMBA:
        print("numba not importable; only the numpy backend is available")
    # compile once outside the timed region
    run("numba", theta0, c, s, 0.01, 2, None)
    run("numba", theta0, c, s, 1e-3, 2, noise[:2])

    print(f"N={args.N}, steps={args.steps}, best of {args.repeat}")
    print(f"{'scheme':<16}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for scheme, dt, nz in (("rk4", 0.01, None), ("euler-maruyama", 1e-3, noise)):
        best = {}
        final = {}
        for backend in ("numba", "numpy"):
            times = []
            for _ in range(args.repeat):
                t, th = run(backend, theta0, c, s, dt, args.steps, nz)
                times.append(t)
            best[backend] = min(times)
            final[backend] = th
        diff = np.max(np.abs(np.angle(np.exp(1j * (final["numba"] - final["numpy"])))))
        print(
            f"{scheme:<16}{best['numba']:>12.4f}{best['numpy']:>12.4f}"
            f"{best['numpy'] / best['numba']:>10.1f}{diff:>14.2e}"
        )
    _kernels.set_backend("numba")


if __name__ == "__main__":
    main()
