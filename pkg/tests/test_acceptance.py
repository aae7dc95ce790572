"""Acceptance gate: one check per criterion, each at its stated tolerance.

Run ``pytest tests/test_acceptance.py -v`` for the gate; a PASS/FAIL line per
criterion is printed in the terminal summary. ``python -m tests.test_acceptance``
prints the same lines without pytest.
"""

import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from epsense.dynamics import TimeGrid, integrate_master, no_jump_amplitudes, no_jump_decomposition
from epsense.estimation import (
    SensitivityPoint,
    Side,
    default_campaign_omegas,
    fit_eigenenergy,
    fit_power_law,
    noiseless_data,
    run_sensing_campaign,
)
from epsense.model import E0, Density3, DEFAULT_KAPPA_P, DEFAULT_KAPPA_Q, PureState2, make_params
from epsense.nh_core import half_splitting, sensitivity_theory
from epsense.trajectories import binomial_sigma, run_ensemble

RESULTS: dict[int, tuple[bool, str]] = {}
SEED = 0


def rates(omega):
    return make_params(omega, DEFAULT_KAPPA_Q, DEFAULT_KAPPA_P)


def _budget(t_start, limit):
    dt = time.perf_counter() - t_start
    return dt <= limit, f"{dt:.2f}s/{limit:g}s"


def criterion_1():
    w0 = rates(1.0).omega_ep
    e = abs(half_splitting(rates(w0)))
    ok = w0 == 1.2325 and e <= 1e-12
    return ok, f"omega_ep={w0!r}, |E(omega_ep)|={e:.1e}"


def criterion_2():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst = 0.0
    n = 0
    while n < 1000:
        kq, kp = rng.uniform(0, 10, 2)
        w0 = abs(kp - kq) / 4
        x = rng.choice([-1.0, 1.0]) * 10 ** rng.uniform(-3, 0.5)
        omega = w0 * (1 + x)
        if w0 == 0 or omega <= 0:
            continue
        h = 1e-7 * w0
        f = lambda o: abs(complex(half_splitting(make_params(o, kq, kp))))  # noqa: E731
        fd = abs(f(omega + h) - f(omega - h)) / (2 * h)
        s = sensitivity_theory(make_params(omega, kq, kp))
        worst = max(worst, abs(s - fd) / s)
        n += 1
    fast, timing = _budget(t0, 1.0)
    return worst <= 1e-6 and fast, f"max rel err {worst:.1e} over {n} points, {timing}"


def _theory_power_law(side):
    sign = 1.0 if side is Side.AboveEP else -1.0
    w0 = rates(1.0).omega_ep
    pts = []
    for x in np.geomspace(0.02, 0.3, 8):
        p = rates(w0 * (1 + sign * x))
        pts.append(SensitivityPoint(p.omega, p.omega - w0, sensitivity_theory(p)))
    return fit_power_law(pts, side, w0)


def criterion_3():
    t0 = time.perf_counter()
    parts, ok = [], True
    for side in Side:
        fit = _theory_power_law(side)
        good = 1.35 <= fit.A <= 1.48 and -0.56 <= fit.B <= -0.45
        ok &= good
        parts.append(f"{side.value}: A={fit.A:.3f} B={fit.B:.3f}")
    fast, timing = _budget(t0, 1.0)
    return ok and fast, ", ".join(parts) + f"; want A in [1.35, 1.48], B in [-0.56, -0.45], {timing}"


def criterion_4():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    grid = TimeGrid(0.0, 2.0, 41)
    worst = 0.0
    for _ in range(50):
        omega, kq, kp = rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(0, 10)
        p = make_params(omega, kq, kp)
        psi = rng.normal(size=2) + 1j * rng.normal(size=2)
        psi /= np.linalg.norm(psi)
        psi0 = PureState2(complex(psi[0]), complex(psi[1]))
        num = integrate_master(p, Density3.from_pure(psi0), grid)
        exact = no_jump_decomposition(p, psi0, grid.times)
        worst = max(worst, max(float(np.max(np.abs(a.matrix - b.matrix))) for a, b in zip(num, exact)))
    fast, timing = _budget(t0, 10.0)
    return worst <= 1e-7 and fast, f"max-norm diff {worst:.1e} over 50 sets, {timing}"


def criterion_5():
    t0 = time.perf_counter()
    p = rates(rates(1.0).omega_ep)
    grid = TimeGrid()
    n = 100_000
    stats = run_ensemble(p, grid, n, SEED)
    ce, cg = no_jump_amplitudes(p, grid.times)
    norm = np.abs(ce) ** 2 + np.abs(cg) ** 2
    ref = integrate_master(p, Density3.basis(E0), grid)
    checks = np.linspace(0, grid.n_points - 1, 11).astype(int)[1:]
    za = zb = zc = 0.0
    for k in checks:
        sig = max(float(binomial_sigma(norm[k], n)), 1.0 / n)
        za = max(za, abs(stats.survival_fraction[k] - norm[k]) / sig)
        pe = abs(ce[k]) ** 2 / norm[k]
        kept = max(int(stats.survivors[k]), 1)
        sig = max(float(binomial_sigma(pe, kept)), 1.0 / kept)
        zb = max(zb, abs(stats.conditioned_p_e[k] - pe) / sig)
        exact = ref[k].matrix
        diff = np.abs(stats.rho_mean[k] - exact)
        mag = np.clip(np.abs(exact), 0.0, 1.0)
        sig = np.maximum(np.sqrt(mag * (1 - mag) / n), 1.0 / n)
        zc = max(zc, float(np.max(diff / sig)))
    fast, timing = _budget(t0, 30.0)
    ok = za <= 3 and zb <= 3 and zc <= 5 and fast
    return ok, f"max z: survival {za:.2f}, conditioned {zb:.2f}, rho {zc:.2f}; {timing}"


def criterion_6():
    t0 = time.perf_counter()
    w0 = rates(1.0).omega_ep
    worst, transition = 0.0, True
    for r in (0.5, 0.8, 0.95, 1.05, 1.2, 1.6, 2.0):
        p = rates(w0 * r)
        fit = fit_eigenenergy(noiseless_data(p, TimeGrid()), omega_nominal=p.omega)
        e = complex(half_splitting(p))
        worst = max(worst, abs(complex(fit.energy) - e) / abs(e))
        e_fit = fit.energy
        if r > 1:
            transition &= abs(e_fit.im) <= 0.02 * abs(e_fit)
        else:
            transition &= abs(e_fit.re) <= 0.02 * abs(e_fit)
    fast, timing = _budget(t0, 10.0)
    return worst <= 1e-4 and transition and fast, f"max rel err {worst:.1e}, transition={transition}, {timing}"


def criterion_7():
    t0 = time.perf_counter()
    p = rates(rates(1.0).omega_ep)
    rep = run_sensing_campaign(default_campaign_omegas(p), p, TimeGrid(), 3000, SEED)
    parts, ok = [], rep.all_converged
    for side in Side:
        law = rep.power_laws.get(side)
        s = [pt.sensitivity for pt in rep.points if pt.sensitivity and side.matches(pt.delta_omega)]
        s.sort(key=lambda v: -abs(v.delta_omega))
        mono = all(b.S > a.S for a, b in zip(s, s[1:]))
        b_ok = law is not None and -0.65 <= law.B <= -0.40
        ok &= mono and b_ok
        b_txt = f"{law.B:.3f}" if law else "n/a"
        parts.append(f"{side.value}: B={b_txt} monotone={mono}")
    fast, timing = _budget(t0, 120.0)
    return ok and fast, ", ".join(parts) + f"; seed {SEED}, {timing}"


def criterion_8():
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for name in ("a.json", "b.json"):
            out = Path(tmp) / name
            subprocess.run(
                [sys.executable, "-m", "epsense", "sense", "--seed", "7", "--out", str(out)],
                capture_output=True, check=False,
            )
            outs.append(out.read_bytes())
    same_json = outs[0] == outs[1] and len(outs[0]) > 0
    p = rates(rates(1.0).omega_ep)
    runs = [run_ensemble(p, TimeGrid(), 100_000, SEED, workers=w) for w in (1, 2, 4)]
    same_ens = all(
        np.array_equal(runs[0].survivors, r.survivors)
        and np.array_equal(runs[0].jump_times, r.jump_times)
        and np.array_equal(runs[0].rho_mean, r.rho_mean)
        for r in runs[1:]
    )
    fast, timing = _budget(t0, 120.0)
    return same_json and same_ens and fast, f"sense JSON identical={same_json}, workers 1/2/4 identical={same_ens}, {timing}"


CRITERIA = {
    1: ("EP location", criterion_1),
    2: ("sensitivity vs finite differences", criterion_2),
    3: ("near-EP scaling of theoretical S", criterion_3),
    4: ("no-jump decomposition of the master equation", criterion_4),
    5: ("trajectory unravelling", criterion_5),
    6: ("noiseless estimator recovery", criterion_6),
    7: ("full synthetic campaign", criterion_7),
    8: ("determinism", criterion_8),
}


def _line(num, ok, detail):
    return f"[{'PASS' if ok else 'FAIL'}] criterion {num} ({CRITERIA[num][0]}): {detail}"


@pytest.mark.parametrize("num", sorted(CRITERIA))
def test_criterion(num):
    ok, detail = CRITERIA[num][1]()
    RESULTS[num] = (ok, detail)
    print(_line(num, ok, detail))
    assert ok, detail


def summary_lines():
    return [_line(num, *RESULTS[num]) for num in sorted(RESULTS)]


if __name__ == "__main__":
    failed = 0
    for num, (_, fn) in sorted(CRITERIA.items()):
        ok, detail = fn()
        failed += not ok
        print(_line(num, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
