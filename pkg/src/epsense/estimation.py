"""Synthetic post-selected measurements, eigenenergy extraction and scaling fits."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import optimize, stats

from . import _kernels
from .dynamics import TimeGrid, integrate_master, no_jump_amplitudes
from .model import (
    DEFAULT_KAPPA_P,
    DEFAULT_KAPPA_Q,
    ComplexEnergy,
    Density3,
    EpsenseError,
    PureState2,
    SystemParams,
    canonicalize,
)
from .nh_core import AtExceptionalPoint

MIN_KEPT = 25
# Relative offsets |delta_omega| / omega_ep of the default campaign, per side.
DEFAULT_OFFSETS = (0.02, 0.04, 0.07, 0.12, 0.18, 0.25, 0.35, 0.5)
DEFAULT_SHOTS = 3000

SIMPLEX_XATOL = 1e-9
SIMPLEX_FATOL = 1e-12
GRAD_TOL = 1e-6


class InsufficientSurvivors(EpsenseError):
    pass


class NotConverged(EpsenseError):
    pass


class DegenerateData(EpsenseError):
    pass


class InsufficientPoints(EpsenseError):
    pass


class NonPositiveS(EpsenseError):
    def __init__(self, index: int, value: float):
        super().__init__(f"point {index} has non-positive sensitivity S = {value}")
        self.index = index
        self.value = value


class Side(enum.Enum):
    AboveEP = "above"
    BelowEP = "below"

    def matches(self, delta_omega: float) -> bool:
        return delta_omega > 0 if self is Side.AboveEP else delta_omega < 0


@dataclass(frozen=True)
class MeasurementRecord:
    t: float
    shots: int
    counts_e0: int
    counts_g1: int
    counts_g0: int

    def __post_init__(self):
        counts = (self.counts_e0, self.counts_g1, self.counts_g0)
        if min(counts) < 0:
            raise EpsenseError(f"negative counts in {counts}")
        if sum(counts) != self.shots:
            raise EpsenseError(f"counts {counts} do not sum to shots = {self.shots}")


class ConditionedPoint(NamedTuple):
    t: float
    p_e: float
    n_kept: float


@dataclass(frozen=True)
class FitResult:
    energy: ComplexEnergy
    residual_rss: float
    n_points_used: int
    converged: bool


@dataclass(frozen=True)
class SensitivityPoint:
    omega_true: float
    delta_omega: float
    S: float

    def __post_init__(self):
        if self.delta_omega == 0:
            raise AtExceptionalPoint("delta_omega must be nonzero")

    @property
    def omega_ep(self) -> float:
        return self.omega_true - self.delta_omega


@dataclass(frozen=True)
class PowerLawFit:
    A: float
    B: float
    stderr_A: float
    stderr_B: float
    side: Side
    n_points: int


def simulate_measurements(
    p: SystemParams,
    grid: TimeGrid,
    shots: int,
    seed: int,
    *,
    psi0: PureState2 | None = None,
    use_master: bool = False,
) -> list[MeasurementRecord]:
    """Multinomial readout of (|e,0>, |g,1>, |g,0>) at every grid time.

    Outcome probabilities come from the exact pure-part decomposition of the
    master-equation solution, or from the RK4 integrator with ``use_master``.
    """
    if shots < 1:
        raise EpsenseError(f"shots must be >= 1, got {shots}")
    times = grid.times
    if use_master:
        rho0 = Density3.from_pure(psi0 or PureState2.excited())
        pops = np.array([r.populations for r in integrate_master(p, rho0, grid)])
        probs = pops[:, [1, 2, 0]]
    else:
        ce, cg = no_jump_amplitudes(p, times, psi0)
        pe, pg1 = np.abs(ce) ** 2, np.abs(cg) ** 2
        probs = np.stack([pe, pg1, 1.0 - pe - pg1], axis=1)
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum(axis=1, keepdims=True)
    rng = np.random.default_rng(_kernels.to_u64(seed))
    counts = rng.multinomial(shots, probs)
    return [
        MeasurementRecord(float(t), int(shots), int(c[0]), int(c[1]), int(c[2]))
        for t, c in zip(times, counts)
    ]


def condition_record(r: MeasurementRecord, min_kept: int = MIN_KEPT) -> ConditionedPoint:
    """Drop |g,0> outcomes and renormalise the single-excitation counts."""
    kept = r.counts_e0 + r.counts_g1
    if kept < max(min_kept, 1):
        raise InsufficientSurvivors(f"{kept} survivors at t = {r.t:g} (need {min_kept})")
    return ConditionedPoint(r.t, r.counts_e0 / kept, kept)


def condition_records(
    records: Iterable[MeasurementRecord], min_kept: int = MIN_KEPT
) -> list[ConditionedPoint]:
    """Condition every record, silently skipping those with too few survivors."""
    out = []
    for r in records:
        try:
            out.append(condition_record(r, min_kept))
        except InsufficientSurvivors:
            continue
    return out


def noiseless_data(
    p: SystemParams, grid: TimeGrid, shots: float = 1.0
) -> list[ConditionedPoint]:
    """Exact conditioned populations weighted by the expected survivor count."""
    ce, cg = no_jump_amplitudes(p, grid.times)
    n = np.abs(ce) ** 2 + np.abs(cg) ** 2
    return [
        ConditionedPoint(float(t), float(abs(a) ** 2 / m), float(shots * m))
        for t, a, m in zip(grid.times, ce, n)
    ]


def model_conditioned_pe(energy: ComplexEnergy, kappa: float, times) -> np.ndarray:
    """Conditioned excited population predicted by a complex half splitting."""
    times = np.ascontiguousarray(np.asarray(times, dtype=float))
    return _kernels.model_pe(float(energy.re), float(energy.im), float(kappa), times)


def _fft_guess(t: np.ndarray, y: np.ndarray) -> float:
    # conditioned population oscillates at angular frequency 2E
    tu = np.linspace(t[0], t[-1], t.size)
    yu = np.interp(tu, t, y)
    yu = yu - yu.mean()
    n_fft = 16 * t.size
    spec = np.abs(np.fft.rfft(yu, n_fft))
    freqs = np.fft.rfftfreq(n_fft, tu[1] - tu[0])
    k = int(np.argmax(spec[1:])) + 1
    return math.pi * freqs[k]


def _decay_guess(t: np.ndarray, y: np.ndarray) -> float:
    # overdamped: approach to the slow eigenvector goes like exp(-2|E| t)
    tail = max(1, t.size // 10)
    y_inf = float(np.mean(y[-tail:]))
    dev = np.abs(y - y_inf)
    if dev[0] == 0:
        return 1.0 / (t[-1] - t[0])
    below = np.flatnonzero(dev <= 0.5 * dev[0])
    t_half = t[below[0]] - t[0] if below.size else t[-1] - t[0]
    t_half = max(t_half, t[1] - t[0])
    return math.log(2.0) / (2.0 * t_half)


def _initial_guesses(t, y, kappa, omega_nominal):
    e_fft = ComplexEnergy(_fft_guess(t, y), 0.0)
    e_decay = ComplexEnergy(0.0, -_decay_guess(t, y))
    if omega_nominal is not None:
        w0 = abs(kappa) / 4.0
        e2 = (omega_nominal - w0) * (omega_nominal + w0)
        e_nom = ComplexEnergy(math.sqrt(e2), 0.0) if e2 >= 0 else ComplexEnergy(0.0, -math.sqrt(-e2))
    else:
        e_nom = ComplexEnergy(abs(kappa) / 8.0, -abs(kappa) / 8.0)
    e_mid = ComplexEnergy(0.5 * (e_fft.re + e_decay.re), 0.5 * (e_fft.im + e_decay.im))
    return [e_fft, e_decay, e_nom, e_mid]


def _gradient(fun, x, h=1e-6):
    g = np.empty(2)
    for i in range(2):
        step = np.zeros(2)
        step[i] = h * max(1.0, abs(x[i]))
        g[i] = (fun(x + step) - fun(x - step)) / (2 * step[i])
    return g


def fit_eigenenergy(
    data: Sequence[ConditionedPoint],
    p_known: tuple[float, float] = (DEFAULT_KAPPA_Q, DEFAULT_KAPPA_P),
    *,
    omega_nominal: float | None = None,
    require_convergence: bool = True,
) -> FitResult:
    """Weighted least-squares estimate of the complex half splitting.

    The model is the conditioned population of the closed-form no-jump
    state, with the coupling tied to the energy through
    ``omega(E) = sqrt(E**2 + kappa**2/16)``. A Nelder-Mead simplex over
    (Re E, Im E) is restarted from four deterministic guesses and the best
    minimum is kept.

    The model depends on E only through ``E**2`` and is invariant under
    complex conjugation, so the result is folded to ``Re E >= 0``,
    ``Im E <= 0``.
    """
    kappa_q, kappa_p = p_known
    kappa = kappa_p - kappa_q
    gamma = (kappa_q + kappa_p) / 4.0
    if len(data) == 0:
        raise InsufficientPoints("no data points")
    arr = np.array([(d[0], d[1], d[2]) for d in data], dtype=float)
    arr = arr[np.argsort(arr[:, 0], kind="stable")]
    t = np.ascontiguousarray(arr[:, 0])
    y = np.ascontiguousarray(arr[:, 1])
    w = arr[:, 2]
    if len(t) < 5:
        raise InsufficientPoints(f"need at least 5 usable points, got {len(t)}")
    if gamma > 0 and t[-1] - t[0] < 1.0 / gamma:
        raise InsufficientPoints(
            f"data span {t[-1] - t[0]:.3g} us is shorter than 1/Gamma = {1 / gamma:.3g} us"
        )
    if np.ptp(y) <= 1e-15:
        raise DegenerateData("conditioned populations are constant")
    if np.any(w < 0) or w.sum() <= 0:
        raise EpsenseError("weights must be non-negative with positive sum")
    w = np.ascontiguousarray(w / w.sum())

    def rss(x):
        return _kernels.weighted_rss(float(x[0]), float(x[1]), kappa, t, y, w)

    best = None
    for guess in _initial_guesses(t, y, kappa, omega_nominal):
        x0 = np.array([guess.re, guess.im])
        scale = max(0.1 * float(np.max(np.abs(x0))), 0.05)
        simplex = np.array([x0, x0 + [scale, 0.0], x0 + [0.0, -scale]])
        res = optimize.minimize(
            rss,
            x0,
            method="Nelder-Mead",
            options={
                "xatol": SIMPLEX_XATOL,
                "fatol": SIMPLEX_FATOL,
                "initial_simplex": simplex,
                "maxiter": 20000,
                "maxfev": 40000,
            },
        )
        if best is None or res.fun < best.fun:
            best = res

    x = best.x
    grad_norm = float(np.linalg.norm(_gradient(rss, x)))
    converged = bool(best.success and math.isfinite(best.fun) and grad_norm <= GRAD_TOL)
    if require_convergence and not converged:
        raise NotConverged(
            f"simplex stopped with rss={best.fun:.3e}, |grad|={grad_norm:.2e}: {best.message}"
        )
    energy = ComplexEnergy(abs(float(x[0])) + 0.0, -abs(float(x[1])) + 0.0)
    return FitResult(canonicalize(energy), float(best.fun), int(len(t)), converged)


def sensitivity_from_fit(
    e: ComplexEnergy, delta_omega: float, omega_true: float | None = None
) -> SensitivityPoint:
    """Secant sensitivity ``(Re E - Im E) / |delta_omega|``.

    With ``Re E >= 0`` and ``Im E <= 0`` this is the measured splitting over
    the coupling offset and is positive on both sides of the EP.
    """
    if delta_omega == 0:
        raise AtExceptionalPoint("delta_omega must be nonzero")
    s = (e.re - e.im) / abs(delta_omega)
    omega_true = float("nan") if omega_true is None else float(omega_true)
    return SensitivityPoint(omega_true, float(delta_omega), float(s))


def fit_power_law(
    points: Sequence[SensitivityPoint],
    side: Side,
    omega_ep: float | None = None,
) -> PowerLawFit:
    """Least-squares line through ``ln S`` versus ``ln |delta_omega / omega_ep|``.

    Only points on ``side`` of the exceptional point are used. ``omega_ep``
    defaults to the value implied by the points themselves.
    """
    chosen = [(i, pt) for i, pt in enumerate(points) if side.matches(pt.delta_omega)]
    if len(chosen) < 3:
        raise InsufficientPoints(
            f"{len(chosen)} points on the {side.value}-EP side, need at least 3"
        )
    for i, pt in chosen:
        if not pt.S > 0:
            raise NonPositiveS(i, pt.S)
    if omega_ep is None:
        omega_ep = chosen[0][1].omega_ep
    if not omega_ep > 0:
        raise EpsenseError(f"omega_ep must be positive, got {omega_ep}")
    x = np.log([abs(pt.delta_omega / omega_ep) for _, pt in chosen])
    y = np.log([pt.S for _, pt in chosen])
    reg = stats.linregress(x, y)
    a = math.exp(reg.intercept)
    return PowerLawFit(
        A=a,
        B=float(reg.slope),
        stderr_A=a * float(reg.intercept_stderr),
        stderr_B=float(reg.stderr),
        side=side,
        n_points=len(chosen),
    )


def default_campaign_omegas(p_base: SystemParams, offsets=DEFAULT_OFFSETS) -> list[float]:
    w0 = p_base.omega_ep
    below = [w0 * (1.0 - x) for x in reversed(offsets)]
    above = [w0 * (1.0 + x) for x in offsets]
    return below + above


@dataclass
class CampaignPoint:
    omega: float
    delta_omega: float
    fit: FitResult | None
    sensitivity: SensitivityPoint | None
    error: str | None = None

    @property
    def converged(self) -> bool:
        return self.fit is not None and self.fit.converged


@dataclass
class CampaignReport:
    params: SystemParams
    grid: TimeGrid
    shots: int
    seed: int
    points: list[CampaignPoint]
    power_laws: dict[Side, PowerLawFit | None] = field(default_factory=dict)
    power_law_errors: dict[Side, str] = field(default_factory=dict)

    @property
    def all_converged(self) -> bool:
        return all(pt.converged for pt in self.points)

    @property
    def ok(self) -> bool:
        return self.all_converged and not self.power_law_errors


def run_sensing_campaign(
    omega_list: Sequence[float],
    p_base: SystemParams,
    grid: TimeGrid,
    shots: int,
    seed: int,
    *,
    min_kept: int = MIN_KEPT,
) -> CampaignReport:
    """Simulate, condition and fit every coupling, then fit both scaling laws.

    Point ``i`` draws its readout noise from ``trajectory_seeds(seed, i)``,
    so each point is reproducible on its own. A side of the EP without any
    coupling gets no power-law entry; a side with too few usable points gets
    an error message instead.
    """
    w0 = p_base.omega_ep
    seeds = _kernels.trajectory_seeds(seed, 0, len(omega_list))
    points = []
    for omega, point_seed in zip(omega_list, seeds):
        p = p_base.with_omega(omega)
        delta = p.omega - w0
        if delta == 0:
            raise AtExceptionalPoint(f"omega = {omega} sits on the exceptional point")
        records = simulate_measurements(p, grid, shots, int(point_seed))
        data = condition_records(records, min_kept)
        try:
            fit = fit_eigenenergy(
                data, (p.kappa_q, p.kappa_p), omega_nominal=p.omega, require_convergence=False
            )
        except (DegenerateData, InsufficientPoints) as exc:
            points.append(CampaignPoint(p.omega, delta, None, None, str(exc)))
            continue
        sens = sensitivity_from_fit(fit.energy, delta, p.omega) if fit.converged else None
        err = None if fit.converged else "fit did not converge"
        points.append(CampaignPoint(p.omega, delta, fit, sens, err))

    report = CampaignReport(p_base, grid, shots, _kernels.to_u64(seed), points)
    usable = [pt.sensitivity for pt in points if pt.sensitivity is not None]
    for side in Side:
        if not any(side.matches(pt.delta_omega) for pt in points):
            continue
        try:
            report.power_laws[side] = fit_power_law(usable, side, w0)
        except (InsufficientPoints, NonPositiveS) as exc:
            report.power_laws[side] = None
            report.power_law_errors[side] = str(exc)
    return report
