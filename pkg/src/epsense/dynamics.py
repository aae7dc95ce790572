"""Time evolution: closed-form no-jump propagator and a Lindblad integrator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import G0, Density3, EpsenseError, PureState2, SystemParams

# Longest RK4 substep (us); kappa_p * dt stays around 0.01 at experimental rates.
MAX_SUBSTEP = 0.002
# Max-norm gap between full- and half-step runs at the final time.
PROBE_TOL = 1e-7
# Squared norm below which the no-jump branch is not conditioned on.
NORM_FLOOR = 1e-12


class NegativeTime(EpsenseError):
    pass


class VanishedNorm(EpsenseError):
    pass


class StepTooLarge(EpsenseError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling of ``[t0, t_max]`` with ``n_points`` points (us)."""

    t0: float = 0.0
    t_max: float = 2.0
    n_points: int = 81

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.t_max)):
            raise EpsenseError("time grid bounds must be finite")
        if self.t0 < 0:
            raise NegativeTime(f"t0 must be >= 0, got {self.t0}")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise EpsenseError(f"n_points must be an integer >= 2, got {self.n_points}")
        if not self.t_max > self.t0:
            raise EpsenseError(f"t_max ({self.t_max}) must exceed t0 ({self.t0})")

    @property
    def dt(self) -> float:
        return (self.t_max - self.t0) / (self.n_points - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t_max, int(self.n_points))


def no_jump_amplitudes(
    p: SystemParams, times, psi0: PureState2 | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`propagate_no_jump` over an array of times."""
    psi0 = psi0 or PureState2.excited()
    times = np.ascontiguousarray(np.atleast_1d(np.asarray(times, dtype=float)))
    if np.any(times < 0):
        raise NegativeTime("evolution times must be >= 0")
    return _kernels.amplitudes(
        p.omega, p.kappa_q, p.kappa_p, complex(psi0.c_e0), complex(psi0.c_g1), times
    )


def propagate_no_jump(p: SystemParams, psi0: PureState2, t: float) -> PureState2:
    """Apply ``exp(-i H t)`` to ``psi0`` in closed form.

    The result is not renormalised: its squared norm is the probability that
    no jump happened up to ``t``.
    """
    if t < 0:
        raise NegativeTime(f"t must be >= 0, got {t}")
    if not (np.isfinite(psi0.c_e0) and np.isfinite(psi0.c_g1)):
        raise EpsenseError("initial amplitudes must be finite")
    ce, cg = no_jump_amplitudes(p, [t], psi0)
    return PureState2(complex(ce[0]), complex(cg[0]))


def conditioned_populations(psi: PureState2) -> tuple[float, float]:
    """Renormalised (p_e, p_g1) of a no-jump state."""
    n = psi.norm2
    if not n > NORM_FLOOR:
        raise VanishedNorm(f"no-jump norm {n:.3e} is below {NORM_FLOOR:g}")
    p_e = abs(psi.c_e0) ** 2 / n
    return p_e, 1.0 - p_e


def _embedded_operators(p: SystemParams):
    h = np.zeros((3, 3), dtype=complex)
    h[1:, 1:] = [[-0.5j * p.kappa_q, p.omega], [p.omega, -0.5j * p.kappa_p]]
    sm = np.zeros((3, 3), dtype=complex)
    sm[G0, 1] = 1.0  # |e,0> -> |g,0>
    a = np.zeros((3, 3), dtype=complex)
    a[G0, 2] = 1.0  # |g,1> -> |g,0>
    return h, sm, a


def lindblad_rhs(p: SystemParams, rho) -> np.ndarray:
    """Right-hand side of the master equation with qubit and photon loss."""
    rho = rho.matrix if isinstance(rho, Density3) else np.asarray(rho, dtype=complex)
    h, sm, a = _embedded_operators(p)
    out = -1j * (h @ rho - rho @ h.conj().T)
    out += p.kappa_q * sm @ rho @ sm.conj().T
    out += p.kappa_p * a @ rho @ a.conj().T
    return out


def liouvillian(p: SystemParams) -> np.ndarray:
    """9x9 generator acting on row-major ``rho.ravel()``."""
    h, sm, a = _embedded_operators(p)
    eye = np.eye(3)
    # vec(A rho B) = kron(A, B.T) vec(rho) for row-major vec
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.conj()))
    gen += p.kappa_q * np.kron(sm, sm.conj())
    gen += p.kappa_p * np.kron(a, a.conj())
    return gen


def _run_rk4(gen, x0, gaps, n_subs):
    """Advance through consecutive gaps; returns the state after each gap."""
    out = [x0]
    x = x0
    # identical gaps are batched into one kernel call
    i = 0
    while i < len(gaps):
        j = i
        while j + 1 < len(gaps) and gaps[j + 1] == gaps[i] and n_subs[j + 1] == n_subs[i]:
            j += 1
        seg = _kernels.rk4_linear(gen, x, gaps[i] / n_subs[i], n_subs[i], j - i + 1)
        out.extend(seg[1:])
        x = np.ascontiguousarray(seg[-1])
        i = j + 1
    return out


def integrate_master(
    p: SystemParams, rho0: Density3, grid: TimeGrid, *, check: bool = True
) -> list[Density3]:
    """Fixed-step RK4 solution of the master equation sampled on ``grid``.

    ``rho0`` is the state at ``t = 0``; if ``grid.t0 > 0`` the solution is
    first advanced to ``t0``. A step-halving probe at the final time raises
    :class:`StepTooLarge` when the two runs disagree by more than ``PROBE_TOL``.
    """
    gen = liouvillian(p)
    x0 = np.ascontiguousarray(rho0.matrix.ravel())
    times = grid.times
    gaps = list(np.diff(np.concatenate(([0.0], times)))) if grid.t0 > 0 else list(np.diff(times))
    n_subs = [max(1, math.ceil(g / MAX_SUBSTEP - 1e-9)) for g in gaps]

    states = _run_rk4(gen, x0, gaps, n_subs)
    if grid.t0 > 0:
        states = states[1:]
    if check:
        fine = _run_rk4(gen, x0, gaps, [2 * n for n in n_subs])[-1]
        err = float(np.max(np.abs(fine - states[-1])))
        if not err <= PROBE_TOL:
            raise StepTooLarge(f"step-halving probe differs by {err:.2e} > {PROBE_TOL:g}")

    out = []
    for x in states:
        rho = x.reshape(3, 3)
        out.append(Density3(0.5 * (rho + rho.conj().T)))
    return out


def no_jump_decomposition(p: SystemParams, psi0: PureState2, times) -> list[Density3]:
    """Exact solution from a single-excitation pure state.

    Both loss channels land in the dark state |g,0>, so
    ``rho(t) = |psi(t)><psi(t)| + (1 - n(t)) |g,0><g,0|`` with the
    unnormalised no-jump state ``psi(t)``.
    """
    ce, cg = no_jump_amplitudes(p, times, psi0)
    out = []
    for a, b in zip(ce, cg):
        psi = PureState2(complex(a), complex(b))
        out.append(Density3.from_pure(psi, dark_weight=1.0 - psi.norm2))
    return out
