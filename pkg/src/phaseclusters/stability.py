"""Linear stability of cluster states.

The linearization of the full system at a cluster state splits into a
tangential block (perturbations that keep the clustering, an M x M matrix
with one zero eigenvalue from the phase-shift symmetry) and transverse blocks
(perturbations that split a cluster). The transverse block of cluster k is a
multiple of the identity on its (m_k - 1)-dimensional zero-sum subspace, so
it contributes one exponent

    lambda_k = (1/N) [m_k g'(0) + sum_{l != k} m_l g'(phi_k - phi_l)]

with multiplicity m_k - 1.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .cluster_algebra import (
    Partition,
    as_partition,
    derivative_matrix,
    existence_residual,
)
from .coupling import (
    BumpPerturbation,
    CouplingLike,
    FourierCoupling,
    PerturbedCoupling,
    default_epsilon,
    wrap_signed,
)
from .linalg import eigenvalues_small_real_matrix

logger = logging.getLogger(__name__)

MARGINAL_BAND = 1e-9


class Classification(str, enum.Enum):
    ALL_UNSTABLE = "AllUnstable"
    ONE_STABLE = "OneStable"
    TWO_STABLE = "TwoStable"
    ALL_STABLE = "AllStable"
    MARGINAL = "Marginal"


_BY_COUNT = {
    0: Classification.ALL_UNSTABLE,
    1: Classification.ONE_STABLE,
    2: Classification.TWO_STABLE,
    3: Classification.ALL_STABLE,
}


def _phases(p: Partition, phases: ArrayLike) -> NDArray[np.float64]:
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (p.M,):
        raise ValueError(f"expected {p.M} phases, got shape {phases.shape}")
    return phases


def tangential_matrix(
    g: CouplingLike, p: Partition | Sequence[int], phases: ArrayLike
) -> NDArray[np.float64]:
    """T[k, l] = (1/N)[delta_kl sum_{r != k} m_r g'_kr - (1 - delta_kl) m_l g'_kl].

    Rows sum to zero, which is what produces the trivial eigenvalue.
    """
    p = as_partition(p)
    D = derivative_matrix(g, _phases(p, phases))
    off = D * p.m[None, :]
    np.fill_diagonal(off, 0.0)
    return (np.diag(off.sum(axis=1)) - off) / p.N


def three_cluster_mu_nu(
    g: CouplingLike, sizes: Partition | Sequence[int], phases: ArrayLike
) -> tuple[float, float]:
    """Trace-type and determinant-type invariants of the 3-cluster tangential block.

    nu is evaluated from both the grouped and the expanded polynomial forms;
    they are algebraically identical and a disagreement signals a bug.
    """
    p = as_partition(sizes)
    if p.M != 3:
        raise ValueError(f"mu/nu are defined for three clusters, got M={p.M}")
    D = derivative_matrix(g, _phases(p, phases))
    return mu_nu_from_derivatives(p.sizes, D)


def mu_nu_from_derivatives(sizes: Sequence[int], D: ArrayLike) -> tuple[float, float]:
    m1, m2, m3 = (float(m) for m in sizes)
    N = m1 + m2 + m3
    D = np.asarray(D, dtype=float)
    g12, g13, g21, g23, g31, g32 = D[0, 1], D[0, 2], D[1, 0], D[1, 2], D[2, 0], D[2, 1]
    mu = (m2 * g12 + m3 * g13 + m1 * g21 + m3 * g23 + m1 * g31 + m2 * g32) / N
    nu_grouped = (4.0 / N**2) * (
        (m1 * g21 + m3 * g23) * (m1 * g31 + m2 * g32)
        - m2 * m3 * g32 * g23
        + (m2 * g12 + m3 * g13) * (m1 * g31 + m2 * g32)
        - m1 * m3 * g31 * g13
        + (m2 * g12 + m3 * g13) * (m1 * g21 + m3 * g23)
        - m1 * m2 * g21 * g12
    )
    nu_expanded = nu_from_expanded_form(sizes, D)
    scale = max(1.0, abs(nu_grouped), abs(nu_expanded))
    if abs(nu_grouped - nu_expanded) > 1e-10 * scale:
        raise ArithmeticError(f"nu forms disagree: {nu_grouped!r} vs {nu_expanded!r}")
    return float(mu), float(nu_expanded)


def nu_from_expanded_form(sizes: Sequence[int], D: ArrayLike) -> float:
    m1, m2, m3 = (float(m) for m in sizes)
    N = m1 + m2 + m3
    D = np.asarray(D, dtype=float)
    g12, g13, g21, g23, g31, g32 = D[0, 1], D[0, 2], D[1, 0], D[1, 2], D[2, 0], D[2, 1]
    return float(
        (4.0 / N**2)
        * (
            m1**2 * g21 * g31
            + m2**2 * g12 * g32
            + m3**2 * g13 * g23
            + m1 * m2 * (g21 * g32 + g12 * g31)
            + m1 * m3 * (g23 * g31 + g13 * g21)
            + m2 * m3 * (g13 * g32 + g12 * g23)
        )
    )


def tangential_from_mu_nu(mu: float, nu: float) -> NDArray[np.complex128]:
    """{0, (mu +/- sqrt(mu^2 - nu))/2}; the root is imaginary when nu > mu^2."""
    disc = mu * mu - nu
    if disc >= 0.0:
        root = np.sqrt(disc)
        pair = [0.5 * (mu - root), 0.5 * (mu + root)]
        return np.array([pair[0], pair[1], 0.0], dtype=complex)
    root = np.sqrt(-disc)
    return np.array([0.5 * mu - 0.5j * root, 0.5 * mu + 0.5j * root, 0.0], dtype=complex)


def _sort_complex(z: ArrayLike) -> NDArray[np.complex128]:
    z = np.asarray(z, dtype=complex)
    return z[np.lexsort((z.imag, z.real))]


def tangential_eigenvalues(
    g: CouplingLike,
    p: Partition | Sequence[int],
    phases: ArrayLike,
    method: str = "matrix",
) -> NDArray[np.complex128]:
    """Spectrum of the tangential matrix, sorted by real part.

    ``method="formula"`` uses the closed form for three clusters,
    ``method="matrix"`` runs the QR eigen-solver on T (any M).
    """
    p = as_partition(p)
    if method == "formula":
        mu, nu = three_cluster_mu_nu(g, p, phases)
        return _sort_complex(tangential_from_mu_nu(mu, nu))
    if method != "matrix":
        raise ValueError(f"unknown method {method!r}")
    return eigenvalues_small_real_matrix(tangential_matrix(g, p, phases))


def transverse_exponents(
    g: CouplingLike, p: Partition | Sequence[int], phases: ArrayLike
) -> NDArray[np.float64]:
    """One exponent per cluster, in cluster order; NaN for trivial clusters."""
    p = as_partition(p)
    D = derivative_matrix(g, _phases(p, phases))
    m = p.m
    lam = (D * m[None, :]).sum(axis=1) / p.N  # diagonal term is m_k g'(0)
    return np.where(m > 1, lam, np.nan)


def transverse_multiplicities(p: Partition | Sequence[int]) -> list[int]:
    return [m - 1 for m in as_partition(p).sizes]


def k_values(g: CouplingLike, p: Partition | Sequence[int], phases: ArrayLike) -> NDArray[np.float64]:
    """K_k = (1/m_k) sum_{l != k} m_l g'_kl in cluster order."""
    p = as_partition(p)
    D = derivative_matrix(g, _phases(p, phases))
    off = D * p.m[None, :]
    np.fill_diagonal(off, 0.0)
    return off.sum(axis=1) / p.m


@dataclass(frozen=True)
class TransverseClassification:
    K: tuple[float, ...]
    order: tuple[int, ...]
    neg_g0_prime: float
    classification: Classification


def transverse_classification(
    g: CouplingLike,
    p: Partition | Sequence[int],
    phases: ArrayLike,
    band: float = MARGINAL_BAND,
) -> TransverseClassification:
    """Count how many sorted K thresholds lie below -g'(0).

    ``order`` holds the original cluster indices in ascending-K order, so
    ``K[i]`` belongs to cluster ``order[i]``.
    """
    p = as_partition(p)
    if p.M != 3:
        raise ValueError(f"classification by K thresholds needs three clusters, got M={p.M}")
    tang = tangential_eigenvalues(g, p, phases)
    nontrivial = tang[np.argsort(np.abs(tang))[1:]]
    if np.any(nontrivial.real >= 0):
        warnings.warn("state is not tangentially stable", RuntimeWarning, stacklevel=2)
    K = k_values(g, p, phases)
    order = np.argsort(K, kind="stable")
    K_sorted = K[order]
    neg_g0 = -float(g.derivative(0.0))
    if np.any(np.abs(K_sorted - neg_g0) < band):
        cls = Classification.MARGINAL
    else:
        cls = _BY_COUNT[int(np.sum(K_sorted < neg_g0))]
    return TransverseClassification(
        tuple(float(k) for k in K_sorted), tuple(int(i) for i in order), neg_g0, cls
    )


def classify_by_exponents(exponents: ArrayLike, band: float = MARGINAL_BAND) -> Classification:
    """Classification read directly off the signs of three transverse exponents."""
    lam = np.asarray(exponents, dtype=float)
    if np.any(np.abs(lam) < band):
        return Classification.MARGINAL
    return _BY_COUNT[int(np.sum(lam < 0))]


@dataclass(frozen=True)
class StabilityReport:
    tangential: tuple[complex, ...]
    transverse: tuple[tuple[float | None, int], ...]
    mu: float | None
    nu: float | None
    classification: Classification | None
    K: tuple[float, ...] = field(default=())
    K_order: tuple[int, ...] = field(default=())

    def spectrum(self) -> NDArray[np.complex128]:
        """Multiset union of tangential and transverse eigenvalues (size N)."""
        vals = list(self.tangential)
        for lam, mult in self.transverse:
            if mult > 0:
                vals.extend([complex(lam)] * mult)
        return _sort_complex(vals)

    def to_dict(self) -> dict:
        return {
            "tangential": [[z.real, z.imag] for z in self.tangential],
            "transverse": [
                {"exponent": lam, "multiplicity": mult} for lam, mult in self.transverse
            ],
            "mu": self.mu,
            "nu": self.nu,
            "classification": self.classification.value if self.classification else None,
            "K": list(self.K),
            "K_order": list(self.K_order),
        }


def stability_report(
    g: CouplingLike, p: Partition | Sequence[int], phases: ArrayLike
) -> StabilityReport:
    p = as_partition(p)
    tang = tangential_eigenvalues(g, p, phases)
    trans = transverse_exponents(g, p, phases)
    transverse = tuple(
        (None if np.isnan(lam) else float(lam), m - 1) for lam, m in zip(trans, p.sizes)
    )
    mu = nu = None
    cls = None
    K: tuple[float, ...] = ()
    order: tuple[int, ...] = ()
    if p.M == 3:
        mu, nu = three_cluster_mu_nu(g, p, phases)
        if min(p.sizes) > 1:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                tc = transverse_classification(g, p, phases)
            cls, K, order = tc.classification, tc.K, tc.order
    return StabilityReport(
        tuple(complex(z) for z in tang), transverse, mu, nu, cls, K, order
    )


def full_jacobian(g: CouplingLike, theta: ArrayLike) -> NDArray[np.float64]:
    """d/dtheta_j of omega + (1/N) sum_k g(theta_i - theta_k)."""
    theta = np.asarray(theta, dtype=float)
    N = len(theta)
    D = np.asarray(g.derivative(theta[:, None] - theta[None, :]), dtype=float).reshape(N, N)
    np.fill_diagonal(D, 0.0)  # self-coupling g(0) is constant
    return (np.diag(D.sum(axis=1)) - D) / N


def full_rhs(g: CouplingLike, theta: ArrayLike, omega: float = 0.0) -> NDArray[np.float64]:
    theta = np.asarray(theta, dtype=float)
    N = len(theta)
    G = np.asarray(g(theta[:, None] - theta[None, :]), dtype=float).reshape(N, N)
    return omega + G.sum(axis=1) / N


@dataclass(frozen=True)
class BifurcationThresholds:
    r_values: tuple[float, ...]
    epsilon_used: float
    bisected: tuple[float, ...]
    cluster_order: tuple[int, ...]


def _perturbed_exponent(
    g: FourierCoupling, p: Partition, phases: NDArray[np.float64], k: int, r: float, eps: float
) -> float:
    gr = PerturbedCoupling(g, BumpPerturbation(eps, r))
    return float(transverse_exponents(gr, p, phases)[k])


def _bisect_sign_change(f, lo: float, hi: float, xtol: float = 1e-13) -> float:
    flo = f(lo)
    fhi = f(hi)
    if np.sign(flo) == np.sign(fhi):
        raise ArithmeticError(f"no sign change in [{lo}, {hi}]")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = f(mid)
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bifurcation_thresholds(
    g: FourierCoupling,
    p: Partition | Sequence[int],
    phases: ArrayLike,
    epsilon: float | None = None,
) -> BifurcationThresholds:
    """Values of r where the transverse exponents of g + r h cross zero.

    Each crossing sits at r_k = g'(0) + K_k; every r_k is checked against a
    bisection on the sign of the corresponding exponent of the perturbed
    coupling.
    """
    p = as_partition(p)
    phases = _phases(p, phases)
    if min(p.sizes) < 2:
        raise ValueError("thresholds need every cluster to be nontrivial")
    sep = np.abs(wrap_signed(phases[:, None] - phases[None, :]))[~np.eye(p.M, dtype=bool)]
    min_sep = float(sep.min()) if sep.size else np.pi
    eps = default_epsilon(phases) if epsilon is None else float(epsilon)
    if not (0.0 < eps < min_sep) or eps >= np.pi:
        raise ValueError(
            f"epsilon={eps} must lie in (0, {min_sep:.6g}), the smallest cluster separation"
        )
    K = k_values(g, p, phases)
    order = np.argsort(K, kind="stable")
    g0 = float(g.derivative(0.0))
    r_values = g0 + K[order]
    bisected = []
    for k, rk in zip(order, r_values):
        width = 1.0 + abs(rk)
        rb = _bisect_sign_change(
            lambda r: _perturbed_exponent(g, p, phases, int(k), r, eps), rk - width, rk + width
        )
        if abs(rb - rk) > 1e-8:
            raise ArithmeticError(
                f"bisection located the crossing of cluster {k} at {rb}, expected {rk}"
            )
        bisected.append(rb)
    return BifurcationThresholds(
        tuple(float(r) for r in r_values),
        eps,
        tuple(bisected),
        tuple(int(k) for k in order),
    )


@dataclass(frozen=True)
class SweepRow:
    r: float
    exponents: tuple[float, ...]
    n_stable: int
    classification: Classification | None
    residual: float
    tangential: tuple[complex, ...]


def sweep_row(
    g: FourierCoupling, p: Partition, phases: ArrayLike, r: float, epsilon: float
) -> SweepRow:
    """Transverse exponents and invariants of g + r h at one parameter value."""
    phases = np.asarray(phases, dtype=float)
    gr = PerturbedCoupling(g, BumpPerturbation(epsilon, r))
    lam = transverse_exponents(gr, p, phases)
    stable = int(np.sum(lam[~np.isnan(lam)] < 0))
    cls = classify_by_exponents(lam) if p.M == 3 else None
    res = float(np.max(np.abs(existence_residual(gr, p, phases)))) if p.M > 1 else 0.0
    tang = tangential_eigenvalues(gr, p, phases)
    return SweepRow(float(r), tuple(float(x) for x in lam), stable, cls, res, tuple(tang))
