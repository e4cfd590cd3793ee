"""Integration of the full N-oscillator system and heteroclinic bookkeeping.

Noise-free runs use fixed-step RK4; noisy runs use Euler-Maruyama with
additive Gaussian increments of standard deviation ``noise_amplitude *
sqrt(dt)`` per step and component. Increments are drawn in chunks from a
seeded numpy Generator, so both kernel backends consume the same noise.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import _kernels
from .cluster_algebra import Partition, is_phase_nondegenerate
from .coupling import TWO_PI, FourierCoupling, circle_distance, preset, wrap_phase, wrap_signed
from .stability import transverse_exponents

logger = logging.getLogger(__name__)

RK4_DEFAULT_DT = 0.01
EM_DEFAULT_DT = 0.001
NOISE_CHUNK_STEPS = 200_000


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    N: int
    g: FourierCoupling
    t_end: float
    omega: float = 0.0
    dt: float | None = None
    noise_amplitude: float = 0.0
    rng_seed: int = 0
    initial: str | tuple[float, ...] = "random"
    record_stride: int | None = None

    def __post_init__(self) -> None:
        if self.N < 2:
            raise ValueError("need at least two oscillators")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.noise_amplitude < 0:
            raise ValueError("noise_amplitude must be non-negative")
        if self.record_stride is not None and self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if not isinstance(self.initial, str):
            init = tuple(float(x) for x in self.initial)
            if len(init) != self.N:
                raise ValueError(f"initial state has {len(init)} entries, expected {self.N}")
            object.__setattr__(self, "initial", init)
        elif self.initial != "random":
            raise ValueError('initial must be a phase vector or "random"')

    @property
    def step(self) -> float:
        if self.dt is not None:
            return float(self.dt)
        return EM_DEFAULT_DT if self.noise_amplitude > 0 else RK4_DEFAULT_DT

    @property
    def stride(self) -> int:
        if self.record_stride is not None:
            return int(self.record_stride)
        return max(1, int(round(0.1 / self.step)))

    @property
    def scheme(self) -> str:
        return "euler-maruyama" if self.noise_amplitude > 0 else "rk4"

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "coupling": self.g.to_dict(),
            "t_end": self.t_end,
            "omega": self.omega,
            "dt": self.dt,
            "noise_amplitude": self.noise_amplitude,
            "rng_seed": self.rng_seed,
            "initial": self.initial if isinstance(self.initial, str) else list(self.initial),
            "record_stride": self.record_stride,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        data = dict(data)
        if "coupling" in data:
            g = FourierCoupling.from_dict(data.pop("coupling"))
        elif "preset" in data:
            g = preset(data.pop("preset"))
        else:
            raise ValueError('config needs "coupling" or "preset"')
        data.pop("preset", None)
        known = {
            "N", "t_end", "omega", "dt", "noise_amplitude", "rng_seed", "initial", "record_stride"
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if isinstance(data.get("initial"), list):
            data["initial"] = tuple(data["initial"])
        return cls(g=g, **data)


@dataclass(frozen=True)
class Trajectory:
    times: NDArray[np.float64]
    states: NDArray[np.float64]
    config: SimConfig
    backend: str = field(default="numba")

    def __post_init__(self) -> None:
        self.times.flags.writeable = False
        self.states.flags.writeable = False

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> NDArray[np.float64]:
        return self.states[-1]


def initial_state(config: SimConfig, rng: np.random.Generator) -> NDArray[np.float64]:
    if isinstance(config.initial, str):
        return rng.uniform(0.0, TWO_PI, config.N)
    return np.asarray(wrap_phase(np.asarray(config.initial, dtype=float)), dtype=float).copy()


def integrate(config: SimConfig) -> Trajectory:
    """Integrate from t = 0 to t_end, recording every ``stride`` steps.

    The initial state is always recorded; the final state is recorded even
    when the step count is not a multiple of the stride.
    """
    dt = config.step
    nsteps = int(round(config.t_end / dt))
    if nsteps < 1:
        raise ValueError("t_end shorter than one step")
    stride = min(config.stride, nsteps)
    rng = np.random.default_rng(config.rng_seed)
    theta = initial_state(config, rng)
    c = np.ascontiguousarray(config.g.c)
    s = np.ascontiguousarray(config.g.s)
    sigma = config.noise_amplitude * np.sqrt(dt)

    n_full, rem = divmod(nsteps, stride)
    rows = [theta.copy()]
    steps_done = 0
    # chunk boundaries are aligned with the record stride
    chunk_records = max(1, NOISE_CHUNK_STEPS // stride)
    blocks = n_full
    while blocks > 0:
        nb = min(blocks, chunk_records)
        out = np.empty((nb, config.N))
        _advance(theta, config, c, s, dt, nb * stride, stride, out, sigma, rng, steps_done)
        rows.append(out)
        steps_done += nb * stride
        blocks -= nb
    if rem:
        out = np.empty((1, config.N))
        _advance(theta, config, c, s, dt, rem, rem, out, sigma, rng, steps_done)
        rows.append(out)
        steps_done += rem
    states = np.vstack(rows)
    step_index = np.concatenate(([0], stride * np.arange(1, n_full + 1)))
    if rem:
        step_index = np.append(step_index, nsteps)
    times = step_index * dt
    return Trajectory(times, states, config, _kernels.backend())


def _advance(theta, config, c, s, dt, nsteps, stride, out, sigma, rng, steps_done) -> None:
    if sigma > 0:
        noise = rng.standard_normal((nsteps, config.N))
        noise *= sigma
        bad = _kernels.em_chunk(theta, config.omega, c, s, dt, noise, stride, out)
    else:
        bad = _kernels.rk4_chunk(theta, config.omega, c, s, dt, nsteps, stride, out)
    if bad >= 0:
        raise SimulationError(
            f"non-finite phase at step {steps_done + bad} (t = {(steps_done + bad) * dt:.6g})"
        )


def observables(traj: Trajectory | ArrayLike, ref: int = -1) -> NDArray[np.float64]:
    """Y_k(t) = sin(theta_k(t) - theta_ref(t)), shape (T, N)."""
    states = traj.states if isinstance(traj, Trajectory) else np.atleast_2d(np.asarray(traj, float))
    N = states.shape[1]
    if not -N <= ref < N:
        raise IndexError(f"reference oscillator {ref} out of range for N={N}")
    return np.sin(states - states[:, [ref]])


@dataclass(frozen=True)
class Clustering:
    partition: Partition
    labels: tuple[int, ...]

    @property
    def groups(self) -> list[tuple[int, ...]]:
        out: dict[int, list[int]] = {}
        for i, lab in enumerate(self.labels):
            out.setdefault(lab, []).append(i)
        return [tuple(v) for v in out.values()]


def detect_clustering(theta: ArrayLike, tol: float = 1e-3) -> Clustering:
    """Single-linkage grouping of oscillators with 1 - cos(theta_i - theta_j) < tol.

    Labels are numbered by first appearance; partition sizes are sorted in
    descending order.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    theta = np.asarray(theta, dtype=float)
    N = len(theta)
    parent = list(range(N))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    close = circle_distance(theta[:, None], theta[None, :]) < tol
    for i, j in zip(*np.nonzero(np.triu(close, 1))):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = [find(i) for i in range(N)]
    relabel: dict[int, int] = {}
    labels = tuple(relabel.setdefault(r, len(relabel)) for r in roots)
    sizes = sorted(Counter(labels).values(), reverse=True)
    return Clustering(Partition(tuple(sizes)), labels)


# -- (2,2,2) saddles and itineraries ------------------------------------------

# oscillator pair that each subspace I_1, I_2, I_3 lets split
SUBSPACE_PAIRS = {1: (0, 1), 2: (4, 5), 3: (2, 3)}
PAIRS = ((0, 1), (2, 3), (4, 5))


@dataclass(frozen=True)
class SaddleSet:
    alpha: float
    beta: float
    points: NDArray[np.float64]

    def __post_init__(self) -> None:
        self.points.flags.writeable = False

    def point(self, index: int) -> NDArray[np.float64]:
        """P_index for index in 1..6."""
        if not 1 <= index <= 6:
            raise IndexError("saddle indices run from 1 to 6")
        return self.points[index - 1]

    def cluster_phases(self, index: int) -> NDArray[np.float64]:
        """Phases of the pairs {1,2}, {3,4}, {5,6} at P_index."""
        return self.point(index)[[0, 2, 4]]


def saddle_set(alpha: float, beta: float, tol: float = 1e-9) -> SaddleSet:
    """The six points of I_0 obtained by relabelling the clusters of
    (0, 0, alpha, alpha, beta, beta)."""
    a, b = float(alpha), float(beta)
    if not 0.0 < a < b < TWO_PI:
        raise ValueError(f"need 0 < alpha < beta < 2pi, got alpha={a}, beta={b}")
    if abs(wrap_signed(b - 2 * a)) < tol or not is_phase_nondegenerate([0.0, a, b], tol):
        raise ValueError(f"(alpha, beta) = ({a}, {b}) is phase degenerate")
    cl = [
        (0.0, a, b),
        (0.0, b - a, TWO_PI - a),
        (0.0, TWO_PI - b, TWO_PI + a - b),
        (0.0, TWO_PI - a, b - a),
        (0.0, TWO_PI + a - b, TWO_PI - b),
        (0.0, b, a),
    ]
    pts = np.array([np.repeat(wrap_phase(np.array(x)), 2) for x in cl])
    return SaddleSet(a, b, pts)


def rotation_distance(
    states: ArrayLike, point: ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Euclidean norm of the wrapped difference, minimized over a common
    phase shift. Returns (distance, optimal shift) for each row of ``states``."""
    X = np.atleast_2d(np.asarray(states, dtype=float))
    d = X - np.asarray(point, dtype=float)
    shift = np.angle(np.exp(1j * d).mean(axis=1))
    # one Gauss-Newton correction turns the circular mean into the L2 optimum
    resid = wrap_signed(d - shift[:, None])
    shift = shift + resid.mean(axis=1)
    resid = wrap_signed(d - shift[:, None])
    return np.linalg.norm(resid, axis=1), np.asarray(wrap_phase(shift)).reshape(-1)


def _pair_key(theta: NDArray[np.float64]) -> tuple[tuple[int, int], ...] | None:
    N = len(theta)
    D = circle_distance(theta[:, None], theta[None, :])
    np.fill_diagonal(D, np.inf)
    nearest = np.argmin(D, axis=1)
    pairs = set()
    for i in range(N):
        j = int(nearest[i])
        if int(nearest[j]) != i:
            return None
        pairs.add((min(i, j), max(i, j)))
    return tuple(sorted(pairs)) if len(pairs) == N // 2 else None


def dominant_pairing(states: ArrayLike, tol: float = 1e-2) -> tuple[int, ...]:
    """Permutation that lays the most frequently observed (2,2,2) pairing out
    as {1,2}, {3,4}, {5,6}. Falls back to the identity when no sample is
    pair-clustered."""
    X = np.atleast_2d(np.asarray(states, dtype=float))
    counts: Counter = Counter()
    for theta in X:
        key = _pair_key(theta)
        if key is None:
            continue
        if max(circle_distance(theta[i], theta[j]) for i, j in key) < tol:
            counts[key] += 1
    if not counts:
        return tuple(range(X.shape[1]))
    pairs = counts.most_common(1)[0][0]
    return tuple(i for pair in pairs for i in pair)


@dataclass(frozen=True)
class ItineraryEvent:
    saddle_index: int
    t_enter: float
    t_exit: float
    alignment: float
    min_distance: float

    def to_dict(self) -> dict:
        return {
            "saddle_index": self.saddle_index,
            "t_enter": self.t_enter,
            "t_exit": self.t_exit,
            "alignment": self.alignment,
            "min_distance": self.min_distance,
        }


def saddle_distances(
    states: ArrayLike, saddles: SaddleSet
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Rotation-minimized distances and shifts to P_1..P_6, shape (T, 6)."""
    X = np.atleast_2d(np.asarray(states, dtype=float))
    dist = np.empty((X.shape[0], 6))
    shift = np.empty((X.shape[0], 6))
    for k in range(6):
        dist[:, k], shift[:, k] = rotation_distance(X, saddles.points[k])
    return dist, shift


def itinerary(
    traj: Trajectory,
    saddles: SaddleSet,
    enter_tol: float = 0.05,
    min_dwell: float = 5.0,
    pairing: Sequence[int] | None = None,
) -> list[ItineraryEvent]:
    """Residence intervals near P_1..P_6.

    An event opens when the rotation-minimized distance to some P_i drops
    below ``enter_tol`` and closes once it exceeds ``2 * enter_tol``. Events
    shorter than ``min_dwell`` are dropped and consecutive visits to the same
    saddle are merged. ``pairing`` reorders oscillators so that the clusters
    of the trajectory line up with the pairs of I_0; by default it is
    detected from the trajectory itself.
    """
    if enter_tol <= 0 or min_dwell < 0:
        raise ValueError("tolerances must be positive")
    if traj.states.shape[1] != 6:
        raise ValueError("saddle itineraries are defined for N = 6")
    perm = np.asarray(dominant_pairing(traj.states) if pairing is None else pairing)
    X = traj.states[:, perm]
    dist, shift = saddle_distances(X, saddles)
    times = traj.times

    events: list[ItineraryEvent] = []
    current = -1
    t_in = 0.0
    best = np.inf
    best_shift = 0.0
    for n in range(len(times)):
        if current < 0:
            k = int(np.argmin(dist[n]))
            if dist[n, k] < enter_tol:
                current, t_in = k, times[n]
                best, best_shift = dist[n, k], shift[n, k]
            continue
        d = dist[n, current]
        if d < best:
            best, best_shift = d, shift[n, current]
        if d > 2 * enter_tol:
            events.append(ItineraryEvent(current + 1, float(t_in), float(times[n]), float(best_shift), float(best)))
            current = -1
    if current >= 0:
        t_out = float(times[-1])
        if t_out <= t_in:
            t_out = t_in + float(np.finfo(float).eps)
        events.append(ItineraryEvent(current + 1, float(t_in), t_out, float(best_shift), float(best)))

    kept = [e for e in events if e.t_exit - e.t_enter >= min_dwell]
    merged: list[ItineraryEvent] = []
    for e in kept:
        if merged and merged[-1].saddle_index == e.saddle_index:
            prev = merged[-1]
            if e.min_distance < prev.min_distance:
                prev = replace(prev, alignment=e.alignment, min_distance=e.min_distance)
            merged[-1] = replace(prev, t_exit=e.t_exit)
        else:
            merged.append(e)
    return merged


def saddle_returns(
    traj: Trajectory,
    saddles: SaddleSet,
    enter_tol: float = 0.05,
    pairing: Sequence[int] | None = None,
) -> int:
    """Number of entries into the enter_tol neighbourhood of the saddle set."""
    perm = np.asarray(dominant_pairing(traj.states) if pairing is None else pairing)
    dist, _ = saddle_distances(traj.states[:, perm], saddles)
    near = dist.min(axis=1) < enter_tol
    return int(near[0]) + int(np.sum(near[1:] & ~near[:-1]))


def find_cycles(indices: Sequence[int], length: int = 3) -> list[tuple[tuple[int, ...], int]]:
    """Maximal runs in which a block of ``length`` distinct indices repeats
    back to back. Returns (cycle, repetitions) pairs."""
    seq = list(indices)
    found = []
    i = 0
    while i + length <= len(seq):
        block = tuple(seq[i : i + length])
        if len(set(block)) != length:
            i += 1
            continue
        reps = 1
        j = i + length
        while j + length <= len(seq) and tuple(seq[j : j + length]) == block:
            reps += 1
            j += length
        if reps > 1:
            found.append((block, reps))
            i = j
        else:
            i += 1
    return found


@dataclass(frozen=True)
class ConnectionResult:
    reached: bool
    final_distance: float
    time: float
    landed_at: int | None
    max_drift: float


def saddle_exponents(g: FourierCoupling, saddles: SaddleSet, index: int) -> NDArray[np.float64]:
    """Transverse exponents of the pairs {1,2}, {3,4}, {5,6} at P_index."""
    return transverse_exponents(g, (2, 2, 2), saddles.cluster_phases(index))


def connection_check(
    g: FourierCoupling,
    saddles: SaddleSet,
    source: int,
    subspace: int,
    target: int | None,
    kick: float = 1e-6,
    tol: float = 1e-6,
    dt: float = RK4_DEFAULT_DT,
    t_max: float = 2000.0,
    check_every: float = 1.0,
) -> ConnectionResult:
    """Follow the unstable manifold of P_source inside I_subspace.

    The start point is P_source displaced by ``kick`` along the splitting
    direction of the pair that I_subspace frees. Every other pair is
    projected back onto its diagonal after each chunk (by invariance the
    drift should be zero; it is reported). Integration stops once the
    rotation-minimized distance to P_target drops below ``tol``; with
    ``target=None`` it stops at whichever saddle other than the source is
    reached first.
    """
    if subspace not in SUBSPACE_PAIRS:
        raise ValueError("subspace must be 1, 2 or 3")
    lam = saddle_exponents(g, saddles, source)
    if int(np.sum(lam > 0)) != 1:
        raise ValueError(
            f"P_{source} has {int(np.sum(lam > 0))} positive transverse exponents; "
            "connection checks need exactly one"
        )
    a, b = SUBSPACE_PAIRS[subspace]
    frozen = [p for p in PAIRS if p != (a, b)]
    theta = saddles.point(source).copy()
    theta[a] += kick / np.sqrt(2.0)
    theta[b] -= kick / np.sqrt(2.0)
    c = np.ascontiguousarray(g.c)
    s = np.ascontiguousarray(g.s)
    n_chunk = max(1, int(round(check_every / dt)))
    out = np.empty((1, 6))
    t = 0.0
    max_drift = 0.0
    targets = [target] if target is not None else [k for k in range(1, 7) if k != source]
    dist = np.inf
    landed = None
    while t < t_max:
        bad = _kernels.rk4_chunk(theta, 0.0, c, s, dt, n_chunk, n_chunk, out)
        if bad >= 0:
            raise SimulationError(f"non-finite phase during connection check at t = {t:.6g}")
        t += n_chunk * dt
        for i, j in frozen:
            drift = abs(wrap_signed(theta[i] - theta[j]))
            max_drift = max(max_drift, drift)
            if drift > 0.0:
                mean = theta[i] + 0.5 * wrap_signed(theta[j] - theta[i])
                theta[i] = theta[j] = wrap_phase(mean)
        dists = {k: float(rotation_distance(theta, saddles.point(k))[0][0]) for k in targets}
        k_best = min(dists, key=dists.get)
        dist = dists[k_best]
        if dist < tol:
            landed = k_best
            break
    if landed is None and target is not None:
        d_all = [float(rotation_distance(theta, saddles.point(k))[0][0]) for k in range(1, 7)]
        k_near = int(np.argmin(d_all)) + 1
        landed = k_near if d_all[k_near - 1] < tol else None
    return ConnectionResult(
        reached=landed is not None and landed == target if target is not None else landed is not None,
        final_distance=float(dist),
        time=float(t),
        landed_at=landed,
        max_drift=float(max_drift),
    )


def unstable_subspace(g: FourierCoupling, saddles: SaddleSet, index: int) -> int:
    """Index of the subspace I_k that frees the single unstable pair of P_index."""
    lam = saddle_exponents(g, saddles, index)
    pos = np.nonzero(lam > 0)[0]
    if len(pos) != 1:
        raise ValueError(f"P_{index} has {len(pos)} unstable pairs")
    pair = PAIRS[int(pos[0])]
    return next(k for k, v in SUBSPACE_PAIRS.items() if v == pair)


def connection_map(g: FourierCoupling, saddles: SaddleSet, **kwargs) -> dict[int, tuple[int, int | None]]:
    """For each P_i: (subspace of its unstable pair, saddle its unstable
    manifold lands on), computed by integration."""
    out = {}
    for i in range(1, 7):
        k = unstable_subspace(g, saddles, i)
        res = connection_check(g, saddles, i, k, None, **kwargs)
        out[i] = (k, res.landed_at)
    return out
