"""Coupling functions on the circle.

A coupling function is a truncated Fourier series

    g(phi) = sum_{r=0}^{R} c_r cos(r phi) + s_r sin(r phi)

evaluated elementwise on floats or numpy arrays. The bump family used for
transverse bifurcation sweeps lives here as well, since it only makes sense
as an additive perturbation of a coupling function.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Protocol, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

TWO_PI = 2.0 * np.pi

PhaseLike = Union[float, ArrayLike]


def wrap_phase(phi: PhaseLike) -> NDArray[np.float64] | float:
    """Canonical representative in [0, 2pi)."""
    out = np.mod(np.asarray(phi, dtype=float), TWO_PI)
    # mod can round up to exactly 2pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    return float(out) if out.ndim == 0 else out


def wrap_signed(phi: PhaseLike) -> NDArray[np.float64] | float:
    """Signed representative in (-pi, pi]."""
    x = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), TWO_PI)
    return float(x) if x.ndim == 0 else x


def circle_distance(phi: PhaseLike, psi: PhaseLike) -> NDArray[np.float64] | float:
    """The metric d(phi, psi) = 1 - cos(phi - psi); values lie in [0, 2]."""
    d = 1.0 - np.cos(np.asarray(phi, dtype=float) - np.asarray(psi, dtype=float))
    return float(d) if d.ndim == 0 else d


class CouplingLike(Protocol):
    """Anything with a value and a derivative on the circle."""

    def __call__(self, phi: PhaseLike) -> NDArray[np.float64] | float: ...

    def derivative(self, phi: PhaseLike) -> NDArray[np.float64] | float: ...


@dataclass(frozen=True)
class FourierCoupling:
    """Truncated Fourier series with cosine coefficients c_0..c_R and sine
    coefficients s_1..s_R."""

    cos_coeffs: tuple[float, ...]
    sin_coeffs: tuple[float, ...]
    _c: NDArray[np.float64] = field(init=False, repr=False, compare=False)
    _s: NDArray[np.float64] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        c = tuple(float(x) for x in self.cos_coeffs)
        s = tuple(float(x) for x in self.sin_coeffs)
        if len(c) == 0:
            raise ValueError("need at least the constant coefficient c0")
        if len(s) != len(c) - 1:
            raise ValueError(
                f"expected {len(c) - 1} sine coefficients for R={len(c) - 1}, got {len(s)}"
            )
        if not all(np.isfinite(c)) or not all(np.isfinite(s)):
            raise ValueError("coupling coefficients must be finite")
        object.__setattr__(self, "cos_coeffs", c)
        object.__setattr__(self, "sin_coeffs", s)
        c_arr = np.array(c)
        s_arr = np.concatenate(([0.0], s))
        c_arr.flags.writeable = False
        s_arr.flags.writeable = False
        object.__setattr__(self, "_c", c_arr)
        object.__setattr__(self, "_s", s_arr)

    @classmethod
    def from_modes(cls, c: ArrayLike, s: ArrayLike) -> "FourierCoupling":
        """Build from c_0..c_R and s_1..s_R, padding the shorter list with zeros."""
        c = list(np.atleast_1d(np.asarray(c, dtype=float)))
        s = list(np.atleast_1d(np.asarray(s, dtype=float)))
        R = max(len(c) - 1, len(s), 0)
        c += [0.0] * (R + 1 - len(c))
        s += [0.0] * (R - len(s))
        return cls(tuple(c), tuple(s))

    @property
    def modes(self) -> int:
        return len(self.cos_coeffs) - 1

    @property
    def c(self) -> NDArray[np.float64]:
        """Cosine coefficients c_0..c_R as a read-only array."""
        return self._c

    @property
    def s(self) -> NDArray[np.float64]:
        """Sine coefficients padded with s_0 = 0, length R + 1."""
        return self._s

    def __call__(self, phi: PhaseLike) -> NDArray[np.float64] | float:
        x = np.asarray(phi, dtype=float)
        rx = x[..., None] * np.arange(self.modes + 1)
        out = np.cos(rx) @ self._c + np.sin(rx) @ self._s
        return float(out) if out.ndim == 0 else out

    def derivative(self, phi: PhaseLike) -> NDArray[np.float64] | float:
        x = np.asarray(phi, dtype=float)
        r = np.arange(self.modes + 1)
        rx = x[..., None] * r
        out = np.cos(rx) @ (r * self._s) - np.sin(rx) @ (r * self._c)
        return float(out) if out.ndim == 0 else out

    # aliases matching the operation names used in the docs
    def eval(self, phi: PhaseLike) -> NDArray[np.float64] | float:
        return self(phi)

    def eval_derivative(self, phi: PhaseLike) -> NDArray[np.float64] | float:
        return self.derivative(phi)

    def scaled(self, factor: float) -> "FourierCoupling":
        return FourierCoupling(
            tuple(factor * x for x in self.cos_coeffs),
            tuple(factor * x for x in self.sin_coeffs),
        )

    def to_dict(self) -> dict[str, list[float]]:
        return {"c": list(self.cos_coeffs), "s": list(self.sin_coeffs)}

    @classmethod
    def from_dict(cls, data: dict) -> "FourierCoupling":
        if "c" not in data or "s" not in data:
            raise ValueError('coupling JSON needs both "c" and "s" arrays')
        return cls(tuple(data["c"]), tuple(data["s"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "FourierCoupling":
        return cls.from_dict(json.loads(text))


# Fourier coefficients for the three N=6 examples (r = 1..4; c_0 = 0).
PRESETS: dict[str, FourierCoupling] = {
    "case0": FourierCoupling(
        (0.0, 0.0, 0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0, -1.0),
    ),
    "case1": FourierCoupling(
        (0.0, 0.31185, 0.37096, 0.0, 0.99008),
        (0.10793, 0.58180, 0.0, -0.14053),
    ),
    "case2": FourierCoupling(
        (0.0, 0.31185, 0.39, 0.0, 0.99008),
        (0.10793, 0.58180, 0.0, -0.14053),
    ),
}


def preset(name: str) -> FourierCoupling:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def _bump_profile(u: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """B(u) = exp(1 - 1/(1-u^2)) on |u| < 1 and its derivative dB/du."""
    inside = np.abs(u) < 1.0
    one_minus = np.where(inside, 1.0 - u * u, 1.0)
    B = np.where(inside, np.exp(1.0 - 1.0 / one_minus), 0.0)
    dB = np.where(inside, B * (-2.0 * u / (one_minus * one_minus)), 0.0)
    return B, dB


@dataclass(frozen=True)
class BumpPerturbation:
    """Smooth odd-looking bump h supported on wrapped |phi| < epsilon with
    h(0) = 0 and h'(0) = -1."""

    epsilon: float
    strength: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.epsilon < np.pi):
            raise ValueError(f"epsilon must lie in (0, pi), got {self.epsilon}")

    def __call__(self, phi: PhaseLike) -> NDArray[np.float64] | float:
        x = np.asarray(wrap_signed(phi), dtype=float)
        B, _ = _bump_profile(x / self.epsilon)
        out = -x * B
        return float(out) if out.ndim == 0 else out

    def derivative(self, phi: PhaseLike) -> NDArray[np.float64] | float:
        x = np.asarray(wrap_signed(phi), dtype=float)
        u = x / self.epsilon
        B, dB = _bump_profile(u)
        out = -B - u * dB
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PerturbedCoupling:
    """g_r = g + r h for a bump h. Outside the bump support g is evaluated alone."""

    base: FourierCoupling
    bump: BumpPerturbation

    @property
    def r(self) -> float:
        return self.bump.strength

    def _inside(self, phi: PhaseLike) -> NDArray[np.bool_]:
        return np.abs(np.asarray(wrap_signed(phi))) < self.bump.epsilon

    def __call__(self, phi: PhaseLike) -> NDArray[np.float64] | float:
        base = np.asarray(self.base(phi))
        out = np.where(self._inside(phi), base + self.r * np.asarray(self.bump(phi)), base)
        return float(out) if out.ndim == 0 else out

    def derivative(self, phi: PhaseLike) -> NDArray[np.float64] | float:
        base = np.asarray(self.base.derivative(phi))
        out = np.where(
            self._inside(phi), base + self.r * np.asarray(self.bump.derivative(phi)), base
        )
        return float(out) if out.ndim == 0 else out


def default_epsilon(phases: ArrayLike) -> float:
    """Half the smallest wrapped |phi_j - phi_k| over cluster pairs."""
    phases = np.asarray(phases, dtype=float)
    diffs = np.abs(wrap_signed(phases[:, None] - phases[None, :]))
    off = diffs[~np.eye(len(phases), dtype=bool)]
    if off.size == 0:
        return 0.5 * np.pi
    return float(0.5 * off.min())


def perturbed_coupling(
    g: FourierCoupling, r: float, epsilon: float
) -> PerturbedCoupling:
    return PerturbedCoupling(g, BumpPerturbation(epsilon, r))
