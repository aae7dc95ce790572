"""Spectral analysis of the non-Hermitian single-excitation Hamiltonian."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .model import ComplexEnergy, EpsenseError, SystemParams, canonicalize

# |E| below which the spectrum is classified as sitting on the exceptional point.
EP_TOL = 1e-9


class AtExceptionalPoint(EpsenseError):
    """Raised where the sensitivity diverges."""


def build_hamiltonian(p: SystemParams) -> np.ndarray:
    """Effective Hamiltonian on the ordered basis [|e,0>, |g,1>]."""
    return np.array(
        [[-0.5j * p.kappa_q, p.omega], [p.omega, -0.5j * p.kappa_p]],
        dtype=complex,
    )


def squared_half_splitting(p: SystemParams) -> float:
    """``E**2 = omega**2 - kappa**2/16``; its sign says which side of the EP we are on."""
    # factored form keeps full relative precision next to the EP
    w0 = p.omega_ep
    return (p.omega - w0) * (p.omega + w0)


def half_splitting(p: SystemParams) -> ComplexEnergy:
    """Half the complex vacuum Rabi splitting, on the canonical branch.

    Real above the exceptional point, purely imaginary with negative
    imaginary part below it.
    """
    e2 = squared_half_splitting(p)
    if e2 >= 0:
        return ComplexEnergy(math.sqrt(e2), 0.0)
    return canonicalize(ComplexEnergy(0.0, math.sqrt(-e2)))


@dataclass(frozen=True)
class NHSpectrum:
    lambda_plus: complex
    lambda_minus: complex
    half_splitting: ComplexEnergy
    v_plus: np.ndarray
    v_minus: np.ndarray
    norm_plus: complex
    norm_minus: complex
    is_ep: bool


def _gauge(v: np.ndarray) -> tuple[np.ndarray, complex]:
    """Unit 2-norm with the first nonzero component real positive.

    Returns the gauged vector and the constant it was multiplied by.
    """
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise EpsenseError("zero eigenvector")
    lead = v[np.flatnonzero(np.abs(v) > 1e-300)[0]]
    factor = (abs(lead) / lead) / nrm
    return v * factor, complex(factor)


def eigensystem(p: SystemParams) -> NHSpectrum:
    """Closed-form eigenvalues and right eigenvectors.

    Eigenvectors follow ``(omega, -i*kappa/4 +/- E)``; when ``omega == 0``
    that form vanishes for one branch and the bare basis vector is used
    instead. At the EP both slots hold the single coalesced vector.
    """
    e = half_splitting(p)
    ec = complex(e)
    gamma = p.gamma
    lam_p = -1j * gamma + ec
    lam_m = -1j * gamma - ec
    is_ep = abs(e) < EP_TOL
    k4 = p.kappa / 4.0

    def raw(sign: int) -> np.ndarray:
        v = np.array([p.omega, -1j * k4 + sign * ec], dtype=complex)
        if np.linalg.norm(v) == 0 or p.omega == 0:
            # omega = 0: H is diagonal, eigenvectors are the basis states
            lam = lam_p if sign > 0 else lam_m
            h = build_hamiltonian(p)
            idx = int(np.argmin(np.abs(np.diag(h) - lam)))
            v = np.zeros(2, dtype=complex)
            v[idx] = 1.0
        return v

    v_plus, n_plus = _gauge(raw(+1))
    if is_ep:
        v_minus, n_minus = v_plus.copy(), n_plus
    else:
        v_minus, n_minus = _gauge(raw(-1))
    return NHSpectrum(lam_p, lam_m, e, v_plus, v_minus, n_plus, n_minus, is_ep)


def sensitivity_theory(p: SystemParams) -> float:
    """Signal amplification ``|dE/d omega| = omega / |E|``."""
    e = half_splitting(p)
    if abs(e) < EP_TOL:
        raise AtExceptionalPoint(
            f"sensitivity diverges at omega = {p.omega} (EP at {p.omega_ep})"
        )
    return p.omega / abs(e)


class SpectrumRow(NamedTuple):
    omega: float
    delta_omega: float
    re_e: float
    im_e: float
    s_theory: float | None


def spectrum_sweep(p_base: SystemParams, omega_grid: Sequence[float]) -> list[SpectrumRow]:
    """Tabulate the half splitting and sensitivity over a coupling grid.

    Rows at the exceptional point carry ``s_theory = None``.
    """
    rows = []
    for omega in omega_grid:
        p = p_base.with_omega(omega)
        e = half_splitting(p)
        try:
            s = sensitivity_theory(p)
        except AtExceptionalPoint:
            s = None
        rows.append(SpectrumRow(p.omega, p.omega - p.omega_ep, e.re, e.im, s))
    return rows

