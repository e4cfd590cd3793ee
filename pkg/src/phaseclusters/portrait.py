"""Phase portrait of three-cluster dynamics in difference coordinates.

With Psi = (Psi_1, Psi_2, Psi_3) the cluster phases, the coordinates
u = Psi_1 - Psi_3 and v = Psi_2 - Psi_3 remove the neutral rotation; a point
(u, v) corresponds to the full state Psi = (u, v, 0). Relative equilibria of
the cluster dynamics are fixed points of the (u, v) flow, and the 2 x 2
Jacobian there carries the two nontrivial tangential eigenvalues.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .cluster_algebra import Partition, as_partition, reduced_vector_field
from .coupling import TWO_PI, CouplingLike, wrap_phase, wrap_signed

HYPERBOLIC_MARGIN = 1e-8
MERGE_DISTANCE = 1e-6


class FixedPointKind(str, enum.Enum):
    SOURCE = "Source"
    SADDLE = "Saddle"
    SINK = "Sink"
    NON_HYPERBOLIC = "NonHyperbolic"


@dataclass(frozen=True)
class ReducedFixedPoint:
    u: float
    v: float
    kind: FixedPointKind
    jacobian_eigenvalues: tuple[complex, complex]

    def to_dict(self) -> dict:
        return {
            "u": self.u,
            "v": self.v,
            "kind": self.kind.value,
            "eigenvalues": [[z.real, z.imag] for z in self.jacobian_eigenvalues],
        }


def _three(m: Partition | Sequence[int]) -> Partition:
    p = as_partition(m)
    if p.M != 3:
        raise ValueError(f"difference coordinates need three clusters, got M={p.M}")
    return p


def _fields(g: CouplingLike, p: Partition, u: NDArray, v: NDArray) -> tuple[NDArray, NDArray, NDArray]:
    """F_k(Psi) * N at Psi = (u, v, 0), vectorized over u, v."""
    m1, m2, m3 = p.m
    g0 = np.asarray(g(np.zeros_like(u)))
    guv = np.asarray(g(u - v))
    gvu = np.asarray(g(v - u))
    F1 = m1 * g0 + m2 * guv + m3 * np.asarray(g(u))
    F2 = m1 * gvu + m2 * g0 + m3 * np.asarray(g(v))
    F3 = m1 * np.asarray(g(-u)) + m2 * np.asarray(g(-v)) + m3 * g0
    return F1, F2, F3


def difference_field(
    g: CouplingLike, m: Partition | Sequence[int], uv: ArrayLike
) -> NDArray[np.float64]:
    """(du/dt, dv/dt) = (F_1 - F_3, F_2 - F_3). The intrinsic frequency cancels.

    ``uv`` may have shape (2,) or (..., 2).
    """
    p = _three(m)
    uv = np.asarray(uv, dtype=float)
    F1, F2, F3 = _fields(g, p, uv[..., 0], uv[..., 1])
    return np.stack([F1 - F3, F2 - F3], axis=-1) / p.N


def difference_jacobian(
    g: CouplingLike, m: Partition | Sequence[int], uv: ArrayLike
) -> NDArray[np.float64]:
    """Analytic Jacobian of difference_field, shape (..., 2, 2)."""
    p = _three(m)
    m1, m2, m3 = p.m
    uv = np.asarray(uv, dtype=float)
    u, v = uv[..., 0], uv[..., 1]
    d = g.derivative
    du_uv = np.asarray(d(u - v))
    dv_vu = np.asarray(d(v - u))
    dpu = np.asarray(d(u))
    dpv = np.asarray(d(v))
    dmu = np.asarray(d(-u))
    dmv = np.asarray(d(-v))
    # partial derivatives of N*F_k with respect to u and v
    F1u = m2 * du_uv + m3 * dpu
    F1v = -m2 * du_uv
    F2u = -m1 * dv_vu
    F2v = m1 * dv_vu + m3 * dpv
    F3u = -m1 * dmu
    F3v = -m2 * dmv
    J = np.empty(u.shape + (2, 2))
    J[..., 0, 0] = F1u - F3u
    J[..., 0, 1] = F1v - F3v
    J[..., 1, 0] = F2u - F3u
    J[..., 1, 1] = F2v - F3v
    return J / p.N


def classify(eigs: ArrayLike, margin: float = HYPERBOLIC_MARGIN) -> FixedPointKind:
    re = np.real(np.asarray(eigs))
    if np.any(np.abs(re) < margin):
        return FixedPointKind.NON_HYPERBOLIC
    if np.all(re < 0):
        return FixedPointKind.SINK
    if np.all(re > 0):
        return FixedPointKind.SOURCE
    return FixedPointKind.SADDLE


def _eig2(J: NDArray[np.float64]) -> tuple[complex, complex]:
    tr = J[0, 0] + J[1, 1]
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    disc = complex(tr * tr - 4.0 * det)
    root = np.sqrt(disc)
    a, b = 0.5 * (tr - root), 0.5 * (tr + root)
    return (complex(a), complex(b)) if (a.real, a.imag) <= (b.real, b.imag) else (complex(b), complex(a))


def uv_of_phases(phases: ArrayLike) -> tuple[float, float]:
    """Difference coordinates of cluster phases (Psi_1, Psi_2, Psi_3)."""
    a, b, c = np.asarray(phases, dtype=float)
    return float(wrap_phase(a - c)), float(wrap_phase(b - c))


def lift_uv(m: Partition | Sequence[int], uv: ArrayLike) -> NDArray[np.float64]:
    """Full phase vector of the point Psi = (u, v, 0)."""
    p = _three(m)
    u, v = np.asarray(uv, dtype=float)
    return p.lift(np.array([u, v, 0.0]))


def find_fixed_points(
    g: CouplingLike,
    m: Partition | Sequence[int],
    grid_density: int = 32,
    max_iter: int = 60,
    tol: float = 1e-12,
) -> list[ReducedFixedPoint]:
    """Newton refinement from a grid_density^2 grid of seeds on the torus.

    Converged points are merged when their wrapped distance is below 1e-6
    and returned sorted by (u, v). Where the Jacobian is singular no step is
    taken; a seed that already sits on a zero of the field is still kept,
    which is how degenerate couplings such as g = 0 show up (all points
    NonHyperbolic).
    """
    if grid_density < 8:
        raise ValueError("grid_density must be at least 8")
    p = _three(m)
    ticks = TWO_PI * np.arange(grid_density) / grid_density + np.pi / grid_density
    U, V = np.meshgrid(ticks, ticks, indexing="ij")
    X = np.stack([U.ravel(), V.ravel()], axis=-1)
    for _ in range(max_iter):
        F = difference_field(g, p, X)
        J = difference_jacobian(g, p, X)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        ok = np.abs(det) > 1e-14
        step = np.zeros_like(X)
        # 2x2 inverse applied row by row
        step[ok, 0] = -(J[ok, 1, 1] * F[ok, 0] - J[ok, 0, 1] * F[ok, 1]) / det[ok]
        step[ok, 1] = -(-J[ok, 1, 0] * F[ok, 0] + J[ok, 0, 0] * F[ok, 1]) / det[ok]
        # cap steps so far-off seeds do not jump across many basins
        norm = np.linalg.norm(step, axis=1)
        scale = np.minimum(1.0, 0.5 / np.maximum(norm, 1e-300))
        X = np.asarray(wrap_phase(X + step * scale[:, None]))
        if np.all(np.max(np.abs(F), axis=1) < tol):
            break
    F = difference_field(g, p, X)
    good = np.max(np.abs(F), axis=1) < 1e-10
    pts: list[NDArray[np.float64]] = []
    for x in X[good]:
        if not any(np.linalg.norm(wrap_signed(x - y)) < MERGE_DISTANCE for y in pts):
            pts.append(x)
    out = []
    for x in pts:
        eigs = _eig2(difference_jacobian(g, p, x))
        out.append(ReducedFixedPoint(float(x[0]), float(x[1]), classify(eigs), eigs))
    out.sort(key=lambda fp: (fp.u, fp.v))
    return out


@dataclass(frozen=True)
class Portrait:
    samples: NDArray[np.float64]  # rows of (u, v, du, dv)
    fixed_points: list[ReducedFixedPoint]

    def to_csv(self) -> str:
        lines = ["u,v,du,dv"]
        lines += [",".join(f"{x:.17g}" for x in row) for row in self.samples]
        return "\n".join(lines) + "\n"

    def fixed_points_json(self) -> str:
        return json.dumps([fp.to_dict() for fp in self.fixed_points], indent=2)


def export_portrait(
    g: CouplingLike,
    m: Partition | Sequence[int],
    resolution: int = 64,
    grid_density: int = 32,
) -> Portrait:
    """Field samples on a resolution x resolution grid over [0, 2pi)^2 plus
    the fixed point list."""
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    p = _three(m)
    ticks = TWO_PI * np.arange(resolution) / resolution
    U, V = np.meshgrid(ticks, ticks, indexing="ij")
    X = np.stack([U.ravel(), V.ravel()], axis=-1)
    F = difference_field(g, p, X)
    samples = np.column_stack([X, F])
    return Portrait(samples, find_fixed_points(g, p, grid_density))


def cluster_swap_maps(m: Partition | Sequence[int]) -> list:
    """Coordinate maps on (u, v) induced by swapping two clusters of equal size."""
    p = _three(m)
    maps = []
    if p.sizes[0] == p.sizes[1]:
        maps.append(lambda u, v: (v, u))
    if p.sizes[0] == p.sizes[2]:
        maps.append(lambda u, v: (-u, v - u))
    if p.sizes[1] == p.sizes[2]:
        maps.append(lambda u, v: (u - v, -v))
    return maps


def check_full_system(
    g: CouplingLike, m: Partition | Sequence[int], fp: ReducedFixedPoint, omega: float = 0.0
) -> float:
    """Spread of the reduced cluster velocities at the lifted point (zero for
    a rigidly rotating state)."""
    p = _three(m)
    F = reduced_vector_field(g, p, np.array([fp.u, fp.v, 0.0]), omega)
    return float(np.ptp(F))
