"""Domain types shared by the simulation, estimation and CLI layers.

Units: rates and couplings are angular rates in 1/us, times in us. The
experimental rates (kappa_q = 0.07, kappa_p = 5) are used as given, no 2*pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DEFAULT_KAPPA_Q",
    "DEFAULT_KAPPA_P",
    "EpsenseError",
    "NegativeRate",
    "NonFinite",
    "SystemParams",
    "ComplexEnergy",
    "PureState2",
    "Density3",
    "make_params",
    "canonicalize",
]

DEFAULT_KAPPA_Q = 0.07
DEFAULT_KAPPA_P = 5.0


class EpsenseError(ValueError):
    """Base class for domain errors raised by this package."""


class NegativeRate(EpsenseError):
    pass


class NonFinite(EpsenseError):
    pass


def _check_finite(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise NonFinite(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class SystemParams:
    """Resonant qubit-resonator coupling with qubit and photon loss."""

    omega: float
    kappa_q: float
    kappa_p: float

    @property
    def kappa(self) -> float:
        return self.kappa_p - self.kappa_q

    @property
    def gamma(self) -> float:
        """Common damping shared by both non-Hermitian eigenvalues."""
        return (self.kappa_q + self.kappa_p) / 4.0

    @property
    def omega_ep(self) -> float:
        return abs(self.kappa_p - self.kappa_q) / 4.0

    @property
    def delta_omega(self) -> float:
        return self.omega - self.omega_ep

    def with_omega(self, omega: float) -> SystemParams:
        return make_params(omega, self.kappa_q, self.kappa_p)


def make_params(omega: float, kappa_q: float, kappa_p: float) -> SystemParams:
    """Validate and build a :class:`SystemParams`.

    Raises
    ------
    NonFinite
        If any argument is NaN or infinite.
    NegativeRate
        If any argument is negative.
    """
    omega, kappa_q, kappa_p = float(omega), float(kappa_q), float(kappa_p)
    _check_finite(omega=omega, kappa_q=kappa_q, kappa_p=kappa_p)
    for name, v in (("omega", omega), ("kappa_q", kappa_q), ("kappa_p", kappa_p)):
        if v < 0:
            raise NegativeRate(f"{name} must be >= 0, got {v}")
    return SystemParams(omega, kappa_q, kappa_p)


@dataclass(frozen=True)
class ComplexEnergy:
    """Half of the complex vacuum Rabi splitting."""

    re: float
    im: float

    @classmethod
    def from_complex(cls, z: complex) -> ComplexEnergy:
        return cls(float(z.real), float(z.imag))

    def __complex__(self) -> complex:
        return complex(self.re, self.im)

    def __neg__(self) -> ComplexEnergy:
        return ComplexEnergy(-self.re, -self.im)

    def __abs__(self) -> float:
        return math.hypot(self.re, self.im)


def canonicalize(e: ComplexEnergy) -> ComplexEnergy:
    """Pick the sign of ``e`` with ``re >= 0`` (and ``im <= 0`` when ``re == 0``)."""
    _check_finite(re=e.re, im=e.im)
    if e.re > 0 or (e.re == 0 and e.im <= 0):
        # normalise -0.0 so equal values compare and serialise identically
        return ComplexEnergy(e.re + 0.0, e.im + 0.0)
    return ComplexEnergy(-e.re + 0.0, -e.im + 0.0)


@dataclass(frozen=True)
class PureState2:
    """Unnormalised amplitudes on the single-excitation subspace {|e,0>, |g,1>}."""

    c_e0: complex
    c_g1: complex

    @classmethod
    def excited(cls) -> PureState2:
        return cls(1.0 + 0j, 0j)

    @property
    def norm2(self) -> float:
        return abs(self.c_e0) ** 2 + abs(self.c_g1) ** 2

    def as_array(self) -> np.ndarray:
        return np.array([self.c_e0, self.c_g1], dtype=complex)


# Basis order of the three-level space.
G0, E0, G1 = 0, 1, 2


class Density3:
    """3x3 density matrix on the ordered basis [|g,0>, |e,0>, |g,1>]."""

    __slots__ = ("_rho",)

    HERMITIAN_TOL = 1e-12
    TRACE_TOL = 1e-9
    POSITIVITY_TOL = 1e-9

    def __init__(self, rho):
        rho = np.array(rho, dtype=complex)
        if rho.shape != (3, 3):
            raise EpsenseError(f"density matrix must be 3x3, got {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise NonFinite("density matrix has non-finite entries")
        rho.setflags(write=False)
        self._rho = rho

    @classmethod
    def from_pure(cls, psi: PureState2, dark_weight: float = 0.0) -> Density3:
        """``|psi><psi| + dark_weight |g,0><g,0|`` with psi embedded in the 3-level space."""
        v = np.array([0.0, psi.c_e0, psi.c_g1], dtype=complex)
        rho = np.outer(v, v.conj())
        rho[G0, G0] += dark_weight
        return cls(rho)

    @classmethod
    def basis(cls, index: int) -> Density3:
        rho = np.zeros((3, 3), dtype=complex)
        rho[index, index] = 1.0
        return cls(rho)

    @property
    def matrix(self) -> np.ndarray:
        return self._rho

    @property
    def populations(self) -> np.ndarray:
        return self._rho.diagonal().real.copy()

    def invariant_violations(self) -> dict[str, float]:
        rho = self._rho
        return {
            "hermitian": float(np.max(np.abs(rho - rho.conj().T))),
            "trace": float(abs(np.trace(rho) - 1.0)),
            "min_eig": float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()),
        }

    def is_valid(self) -> bool:
        v = self.invariant_violations()
        return (
            v["hermitian"] <= self.HERMITIAN_TOL
            and v["trace"] <= self.TRACE_TOL
            and v["min_eig"] >= -self.POSITIVITY_TOL
        )

    def __repr__(self) -> str:
        return f"Density3(populations={self.populations.tolist()})"
