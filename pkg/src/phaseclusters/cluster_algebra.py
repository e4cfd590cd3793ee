"""Partitions, cluster states and their existence equations.

Cluster phases are gauge fixed with phi_1 = 0, which removes the neutral
direction generated by a common phase shift and makes the existence system
square in (phi_2, ..., phi_M).
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .coupling import CouplingLike, circle_distance, wrap_phase

logger = logging.getLogger(__name__)

ENUMERATION_MAX_N = 12


@dataclass(frozen=True)
class Partition:
    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        sizes = tuple(int(m) for m in self.sizes)
        if len(sizes) == 0:
            raise ValueError("a partition needs at least one cluster")
        if any(m < 1 for m in sizes):
            raise ValueError(f"cluster sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def N(self) -> int:
        return sum(self.sizes)

    @property
    def M(self) -> int:
        return len(self.sizes)

    @property
    def m(self) -> NDArray[np.float64]:
        return np.asarray(self.sizes, dtype=float)

    def labels(self) -> NDArray[np.int64]:
        """Cluster index of each oscillator with clusters laid out contiguously."""
        return np.repeat(np.arange(self.M), self.sizes)

    def lift(self, phases: ArrayLike) -> NDArray[np.float64]:
        """Full phase vector in T^N with oscillators grouped by cluster."""
        phases = np.asarray(phases, dtype=float)
        if phases.shape != (self.M,):
            raise ValueError(f"expected {self.M} cluster phases, got shape {phases.shape}")
        return phases[self.labels()]


def as_partition(p: Partition | Sequence[int]) -> Partition:
    return p if isinstance(p, Partition) else Partition(tuple(p))


@dataclass(frozen=True)
class ClusterState:
    partition: Partition
    phases: tuple[float, ...]
    omega: float
    frequency: float

    @property
    def phase_array(self) -> NDArray[np.float64]:
        return np.asarray(self.phases, dtype=float)

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.partition.sizes),
            "phases": list(self.phases),
            "omega": self.omega,
            "Omega": self.frequency,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClusterState":
        return cls(
            Partition(tuple(data["sizes"])),
            tuple(float(x) for x in data["phases"]),
            float(data["omega"]),
            float(data["Omega"]),
        )


def _check_phases(p: Partition, phases: ArrayLike) -> NDArray[np.float64]:
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (p.M,):
        raise ValueError(f"expected {p.M} phases for partition {p.sizes}, got {phases.shape}")
    return phases


def coupling_matrix(g: CouplingLike, phases: ArrayLike) -> NDArray[np.float64]:
    """G[k, l] = g(phi_k - phi_l); the diagonal is g(0)."""
    phases = np.asarray(phases, dtype=float)
    return np.asarray(g(phases[:, None] - phases[None, :]), dtype=float).reshape(
        len(phases), len(phases)
    )


def derivative_matrix(g: CouplingLike, phases: ArrayLike) -> NDArray[np.float64]:
    """D[k, l] = g'(phi_k - phi_l); the diagonal is g'(0)."""
    phases = np.asarray(phases, dtype=float)
    return np.asarray(g.derivative(phases[:, None] - phases[None, :]), dtype=float).reshape(
        len(phases), len(phases)
    )


def reduced_vector_field(
    g: CouplingLike, p: Partition | Sequence[int], psi: ArrayLike, omega: float = 0.0
) -> NDArray[np.float64]:
    """dPsi_k/dt = omega + (1/N) sum_l m_l g(Psi_k - Psi_l)."""
    p = as_partition(p)
    psi = _check_phases(p, psi)
    return omega + coupling_matrix(g, psi) @ p.m / p.N


def cluster_frequency(
    g: CouplingLike, p: Partition | Sequence[int], phases: ArrayLike, omega: float = 0.0
) -> float:
    """Common rotation frequency Omega evaluated from the first cluster."""
    return float(reduced_vector_field(g, p, phases, omega)[0])


def existence_residual(
    g: CouplingLike, p: Partition | Sequence[int], phases: ArrayLike
) -> NDArray[np.float64]:
    """sum_l m_l (g_kl - g_1l) for k = 2..M, with g_kk = g(0)."""
    p = as_partition(p)
    phases = _check_phases(p, phases)
    if p.M < 2:
        raise ValueError("existence equations need at least two clusters")
    F = coupling_matrix(g, phases) @ p.m
    return F[1:] - F[0]


def existence_jacobian(
    g: CouplingLike, p: Partition, phases: ArrayLike
) -> NDArray[np.float64]:
    """Derivative of existence_residual with respect to (phi_2, ..., phi_M)."""
    D = derivative_matrix(g, phases)
    m = p.m
    # dF_k/dphi_j = delta_kj sum_{l != k} m_l D_kl - m_j D_kj
    off = D * m[None, :]
    np.fill_diagonal(off, 0.0)
    J = np.diag(off.sum(axis=1)) - off
    return J[1:, 1:] - J[0:1, 1:]


class SolverError(RuntimeError):
    """Newton iteration failed; carries the last iterate and its residual."""

    def __init__(self, message: str, phases: NDArray[np.float64], residual: float, iterations: int):
        super().__init__(f"{message} (|residual|_max = {residual:.3e} after {iterations} iterations)")
        self.phases = phases
        self.residual = residual
        self.iterations = iterations


class SingularJacobianError(SolverError):
    pass


def solve_phases(
    g: CouplingLike,
    p: Partition | Sequence[int],
    guess: ArrayLike,
    omega: float = 0.0,
    tol: float = 1e-12,
    max_iter: int = 50,
    cond_limit: float = 1e12,
) -> ClusterState:
    """Newton's method on the existence equations with phi_1 held at 0.

    Steps are halved while they increase the residual max-norm. The Jacobian
    is never regularized: a singular Jacobian (typical for evenly spaced,
    highly symmetric states) is reported through SingularJacobianError.
    """
    p = as_partition(p)
    x = _check_phases(p, guess).copy()
    if p.M < 2:
        raise ValueError("solve_phases needs at least two clusters")
    x = x - x[0]
    res = existence_residual(g, p, x)
    norm = float(np.max(np.abs(res)))
    it = 0
    while norm >= tol:
        if it == max_iter:
            raise SolverError("Newton iteration did not converge", wrap_phase(x), norm, it)
        J = existence_jacobian(g, p, x)
        if not np.all(np.isfinite(J)):
            raise SingularJacobianError("non-finite Newton Jacobian", wrap_phase(x), norm, it)
        sv = np.linalg.svd(J, compute_uv=False)
        # judged against the size of g' itself, so that 1x1 systems are covered too
        ref = float(np.max(np.abs(derivative_matrix(g, x))))
        if sv[-1] <= max(sv[0] / cond_limit, ref / cond_limit):
            raise SingularJacobianError("singular Newton Jacobian", wrap_phase(x), norm, it)
        step = np.linalg.solve(J, -res)
        lam = 1.0
        while True:
            trial = x.copy()
            trial[1:] += lam * step
            trial_res = existence_residual(g, p, trial)
            trial_norm = float(np.max(np.abs(trial_res)))
            if trial_norm < norm or lam < 1e-4:
                break
            lam *= 0.5
        if trial_norm >= norm:
            raise SolverError("Newton iteration stalled", wrap_phase(x), norm, it)
        x, res, norm = trial, trial_res, trial_norm
        it += 1
    phases = wrap_phase(x)
    logger.debug("solve_phases converged in %d iterations, residual %.2e", it, norm)
    return ClusterState(
        p, tuple(float(v) for v in phases), float(omega), cluster_frequency(g, p, phases, omega)
    )


def is_phase_nondegenerate(phases: ArrayLike, tol: float = 1e-6) -> bool:
    """True when every ordered difference phi_i - phi_j (i != j) is attained
    by that ordered pair alone, measured with d(a, b) = 1 - cos(a - b)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    phases = np.asarray(phases, dtype=float)
    M = len(phases)
    pairs = [(i, j) for i in range(M) for j in range(M) if i != j]
    if len(pairs) < 2:
        return True
    diffs = np.array([phases[i] - phases[j] for i, j in pairs])
    d = circle_distance(diffs[:, None], diffs[None, :])
    np.fill_diagonal(d, np.inf)
    return bool(np.all(d > tol))


class Certificate(str, enum.Enum):
    PRIME_N = "PrimeN"
    DISTINCT_SIZES = "DistinctSizes"
    PHASE_NONDEGENERATE = "PhaseNonDegenerate"
    INCONCLUSIVE = "Inconclusive"


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % k for k in range(2, math.isqrt(n) + 1))


def inequivalence_certificate(
    p: Partition | Sequence[int], phases: ArrayLike, tol: float = 1e-6
) -> Certificate:
    """First sufficient condition for all clusters to be pairwise inequivalent."""
    p = as_partition(p)
    if _is_prime(p.N) and max(p.sizes) > 1:
        return Certificate.PRIME_N
    if len(set(p.sizes)) == p.M:
        return Certificate.DISTINCT_SIZES
    if is_phase_nondegenerate(phases, tol):
        return Certificate.PHASE_NONDEGENERATE
    return Certificate.INCONCLUSIVE


@dataclass(frozen=True)
class IsotropyClass:
    sizes: tuple[int, ...]
    fix_dim: int
    num_conjugates: int
    orbit_size: int

    def as_row(self) -> dict:
        return {
            "sizes": " ".join(str(m) for m in self.sizes),
            "fix_dim": self.fix_dim,
            "num_conjugates": self.num_conjugates,
            "orbit_size": self.orbit_size,
        }


def integer_partitions(n: int, largest: int | None = None) -> Iterator[tuple[int, ...]]:
    """Partitions of n as non-increasing tuples, in reverse lexicographic order."""
    if largest is None:
        largest = n
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in integer_partitions(n - first, first):
            yield (first,) + rest


def _multinomial_orbit(sizes: Sequence[int]) -> int:
    N = sum(sizes)
    out = math.factorial(N)
    for m in sizes:
        out //= math.factorial(m)
    return out


def enumerate_isotropy(N: int) -> list[IsotropyClass]:
    """One isotropy class per integer partition of N (no phase-shift symmetry).

    For block sizes m_k with multiplicities mult_s of each distinct size s,
    the subgroup count is N!/(prod m_k! prod mult_s!) and the orbit of a
    representative point has N!/prod m_k! elements.
    """
    if not (1 <= N <= ENUMERATION_MAX_N):
        raise ValueError(f"N must lie in [1, {ENUMERATION_MAX_N}], got {N}")
    classes = []
    for sizes in integer_partitions(N):
        orbit = _multinomial_orbit(sizes)
        conj = orbit
        for mult in Counter(sizes).values():
            conj //= math.factorial(mult)
        classes.append(IsotropyClass(sizes, len(sizes), conj, orbit))
    return classes


def isotropy_subgroup_count(N: int, m: int, ks: Sequence[int]) -> float:
    """The count N!/[m (k_1! ... k_l!)] quoted for classes with an m-fold
    cyclic phase shift. Evaluated as stated, with no multiplicity correction;
    for m = 1 and repeated block sizes it therefore equals the orbit size, not
    the number of conjugate subgroups."""
    if m * sum(ks) != N:
        raise ValueError(f"N={N} is not m*(k_1+...+k_l) for m={m}, ks={tuple(ks)}")
    denom = m
    for k in ks:
        denom *= math.factorial(k)
    return math.factorial(N) / denom


def brute_force_set_partition_count(sizes: Sequence[int]) -> int:
    """Count set partitions of {0..N-1} whose block sizes form the multiset
    ``sizes`` by explicit enumeration of restricted-growth strings."""
    N = sum(sizes)
    target = sorted(sizes)
    count = 0
    for rgs in _restricted_growth_strings(N):
        if sorted(Counter(rgs).values()) == target:
            count += 1
    return count


def _restricted_growth_strings(n: int) -> Iterator[tuple[int, ...]]:
    def rec(prefix: list[int], top: int) -> Iterator[tuple[int, ...]]:
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for b in range(top + 2):
            prefix.append(b)
            yield from rec(prefix, max(top, b))
            prefix.pop()

    if n == 0:
        yield ()
        return
    yield from rec([0], 0)


def random_partition(rng: np.random.Generator, N: int) -> Partition:
    """Uniformly random composition of N into positive parts."""
    cuts = sorted(rng.choice(np.arange(1, N), size=rng.integers(0, N), replace=False)) if N > 1 else []
    bounds = [0, *cuts, N]
    return Partition(tuple(int(b - a) for a, b in itertools.pairwise(bounds)))
