"""Quantum-jump unravelling of the master equation and no-jump post-selection.

Every jump of this model (qubit decay or photon loss) lands in the dark state
|g,0>, so a trajectory is fully described by its first-jump time. That time is
drawn exactly by inverting the closed-form no-jump norm ``n(t) = r`` for a
uniform ``r``; no time stepping is involved.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dynamics import TimeGrid, no_jump_amplitudes
from .model import Density3, EpsenseError, PureState2, SystemParams

# Bisection tolerance on the jump instant (us).
JUMP_TIME_TOL = 1e-6
_CHUNK = 16384


class NoSurvivors(EpsenseError):
    pass


class JumpChannel(enum.IntEnum):
    QubitDecay = _kernels.QUBIT_DECAY
    PhotonLoss = _kernels.PHOTON_LOSS


@dataclass(frozen=True)
class TrajectoryRecord:
    jumped: bool
    jump_time: float | None
    jump_channel: JumpChannel | None
    # normalised no-jump state at t_max, or None once the trajectory is dark
    final_state: PureState2 | None

    @property
    def dark(self) -> bool:
        return self.final_state is None


@dataclass(frozen=True)
class EnsembleStats:
    n_traj: int
    times: np.ndarray
    survivors: np.ndarray
    conditioned_p_e: np.ndarray
    conditioned_p_g1: np.ndarray
    rho_mean: np.ndarray
    jump_times: np.ndarray
    jump_channels: np.ndarray

    @property
    def survival_fraction(self) -> np.ndarray:
        return self.survivors / self.n_traj

    def density(self, k: int) -> Density3:
        return Density3(self.rho_mean[k])

    def channel_counts(self) -> dict[str, int]:
        return {
            ch.name: int(np.count_nonzero(self.jump_channels == ch.value))
            for ch in JumpChannel
        }


def _jumps(p: SystemParams, t_max: float, seeds: np.ndarray, psi0: PureState2):
    u = _kernels.uniforms(seeds, 2)
    n_iter = _kernels.bisection_iterations(t_max, JUMP_TIME_TOL)
    return _kernels.first_jumps(
        p.omega, p.kappa_q, p.kappa_p, complex(psi0.c_e0), complex(psi0.c_g1),
        float(t_max), n_iter, u,
    )


def _check_initial(psi0: PureState2) -> None:
    if abs(psi0.norm2 - 1.0) > 1e-12:
        raise EpsenseError(f"initial state must be normalised, |psi0|^2 = {psi0.norm2}")


def sample_trajectory(
    p: SystemParams, grid: TimeGrid, seed: int, psi0: PureState2 | None = None
) -> TrajectoryRecord:
    """Draw one quantum-jump trajectory on ``[0, grid.t_max]``.

    ``seed`` keys a counter-based generator: the same seed always gives the
    same trajectory, and ensemble member ``i`` of :func:`run_ensemble` uses
    the seed ``_kernels.trajectory_seeds(seed, i, i + 1)[0]``.
    """
    psi0 = psi0 or PureState2.excited()
    _check_initial(psi0)
    seeds = np.array([_kernels.to_u64(seed)], dtype=np.uint64)
    jump_t, channel = _jumps(p, grid.t_max, seeds, psi0)
    if np.isfinite(jump_t[0]):
        return TrajectoryRecord(True, float(jump_t[0]), JumpChannel(int(channel[0])), None)
    ce, cg = no_jump_amplitudes(p, [grid.t_max], psi0)
    n = abs(ce[0]) ** 2 + abs(cg[0]) ** 2
    scale = 1.0 / np.sqrt(n)
    return TrajectoryRecord(
        False, None, None, PureState2(complex(ce[0] * scale), complex(cg[0] * scale))
    )


def _survivor_counts(jump_t: np.ndarray, times: np.ndarray) -> np.ndarray:
    ordered = np.sort(jump_t)
    # survivor at t: jump instant strictly after t (or never)
    return jump_t.size - np.searchsorted(ordered, times, side="right")


def run_ensemble(
    p: SystemParams,
    grid: TimeGrid,
    n_traj: int,
    seed: int,
    *,
    workers: int = 1,
    psi0: PureState2 | None = None,
) -> EnsembleStats:
    """Sample ``n_traj`` trajectories and aggregate them on ``grid``.

    Trajectories are split into chunks that may run on ``workers`` threads.
    Per-chunk results are integer survivor counts merged by addition, so the
    output does not depend on the worker count or completion order.

    All trajectories that have not jumped by ``t`` share the same
    deterministic no-jump state, so their conditioned populations are those
    of the renormalised closed-form state wherever a survivor exists.
    """
    if n_traj < 1:
        raise EpsenseError(f"n_traj must be >= 1, got {n_traj}")
    if workers < 1:
        raise EpsenseError(f"workers must be >= 1, got {workers}")
    psi0 = psi0 or PureState2.excited()
    _check_initial(psi0)
    times = grid.times
    bounds = [(s, min(s + _CHUNK, n_traj)) for s in range(0, n_traj, _CHUNK)]

    def work(bound):
        seeds = _kernels.trajectory_seeds(seed, *bound)
        jump_t, channel = _jumps(p, grid.t_max, seeds, psi0)
        return jump_t, channel, _survivor_counts(jump_t, times)

    if workers == 1:
        parts = [work(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, bounds))

    survivors = np.zeros(times.size, dtype=np.int64)
    for _, _, counts in parts:
        survivors += counts
    jump_times = np.concatenate([jt for jt, _, _ in parts])
    channels = np.concatenate([ch for _, ch, _ in parts])

    ce, cg = no_jump_amplitudes(p, times, psi0)
    n = np.abs(ce) ** 2 + np.abs(cg) ** 2
    alive = survivors > 0
    with np.errstate(all="ignore"):
        cond_e = np.where(alive, np.abs(ce) ** 2 / n, np.nan)
    cond_g1 = np.where(alive, 1.0 - cond_e, np.nan)

    frac = survivors / n_traj
    rho = np.zeros((times.size, 3, 3), dtype=complex)
    with np.errstate(all="ignore"):
        psi = np.stack([np.zeros_like(ce), ce, cg], axis=1) / np.sqrt(n)[:, None]
    psi[~alive] = 0.0
    rho += frac[:, None, None] * psi[:, :, None] * psi[:, None, :].conj()
    rho[:, 0, 0] += 1.0 - frac
    return EnsembleStats(
        n_traj=n_traj,
        times=times,
        survivors=survivors,
        conditioned_p_e=cond_e,
        conditioned_p_g1=cond_g1,
        rho_mean=rho,
        jump_times=jump_times,
        jump_channels=channels,
    )


def postselect_no_jump(stats: EnsembleStats, t: float) -> tuple[float, float, float]:
    """Conditioned (p_e, p_g1) and survival fraction at the grid point nearest ``t``."""
    k = int(np.argmin(np.abs(stats.times - t)))
    if stats.survivors[k] == 0:
        raise NoSurvivors(f"no trajectory survives to t = {stats.times[k]:.6g}")
    return (
        float(stats.conditioned_p_e[k]),
        float(stats.conditioned_p_g1[k]),
        float(stats.survival_fraction[k]),
    )


def binomial_sigma(p: np.ndarray, n: int) -> np.ndarray:
    return np.sqrt(np.clip(p * (1.0 - p), 0.0, None) / n)
