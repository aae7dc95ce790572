"""Hot numeric kernels, each in a numba flavour and a vectorised numpy flavour.

The public names at the bottom of the module point at whichever flavour the
backend selection in :mod:`epsense._accel` picked. Both flavours stay
importable (``*_nb`` / ``*_np``) so tests and the benchmark can compare them.

All propagator kernels work with the complex squared half-splitting
``z = E**2``; ``cos(E t)`` and ``sin(E t)/E`` are even in ``E`` so no branch
choice is needed, and the same code covers oscillating (z > 0), overdamped
(z < 0) and generic complex ``E`` used by the fitter.
"""

import cmath
import math

import numpy as np

from ._accel import NUMBA_AVAILABLE, njit

# |E t|**2 below which cos/sinc switch to their 4-term Taylor series (|E t| < 1e-4).
SERIES_CUTOFF2 = 1e-8

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0**-53

QUBIT_DECAY = 0
PHOTON_LOSS = 1


def bisection_iterations(t_max, tol):
    """Number of halvings that shrink ``[0, t_max]`` below ``tol``."""
    if t_max <= tol:
        return 0
    return int(math.ceil(math.log2(t_max / tol)))


# ---------------------------------------------------------------------------
# numba flavour
# ---------------------------------------------------------------------------


@njit(cache=True)
def _cos_sinc_nb(z, t):
    x2 = z * t * t
    if abs(x2) < SERIES_CUTOFF2:
        c = 1.0 - x2 / 2.0 + x2 * x2 / 24.0 - x2 * x2 * x2 / 720.0
        s = t * (1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0)
    else:
        w = cmath.sqrt(z)
        c = cmath.cos(w * t)
        s = cmath.sin(w * t) / w
    return c, s


@njit(cache=True)
def _amp_nb(omega, k4, gamma, a, b, z, t):
    c, s = _cos_sinc_nb(z, t)
    damp = math.exp(-gamma * t)
    ce = damp * ((c + k4 * s) * a - 1j * omega * s * b)
    cg = damp * (-1j * omega * s * a + (c - k4 * s) * b)
    return ce, cg


@njit(cache=True)
def amplitudes_nb(omega, kappa_q, kappa_p, a, b, times):
    k4 = (kappa_p - kappa_q) / 4.0
    gamma = (kappa_q + kappa_p) / 4.0
    z = complex((omega - abs(k4)) * (omega + abs(k4)))
    n = times.shape[0]
    ce = np.empty(n, dtype=np.complex128)
    cg = np.empty(n, dtype=np.complex128)
    for i in range(n):
        ce[i], cg[i] = _amp_nb(omega, k4, gamma, a, b, z, times[i])
    return ce, cg


@njit(cache=True)
def model_pe_nb(e_re, e_im, kappa, times):
    k4 = kappa / 4.0
    e = complex(e_re, e_im)
    z = e * e
    om = cmath.sqrt(z + k4 * k4)
    n = times.shape[0]
    out = np.empty(n)
    for i in range(n):
        c, s = _cos_sinc_nb(z, times[i])
        f = c + k4 * s
        g = -1j * om * s
        scale = max(abs(f), abs(g))
        if scale == 0.0 or not math.isfinite(scale):
            out[i] = np.nan
        else:
            fa = abs(f) / scale
            ga = abs(g) / scale
            out[i] = fa * fa / (fa * fa + ga * ga)
    return out


@njit(cache=True)
def weighted_rss_nb(e_re, e_im, kappa, times, data, weights):
    m = model_pe_nb(e_re, e_im, kappa, times)
    acc = 0.0
    for i in range(times.shape[0]):
        r = data[i] - m[i]
        acc += weights[i] * r * r
    if not math.isfinite(acc):
        return np.inf
    return acc


@njit(cache=True)
def _splitmix64_nb(x):
    z = x + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _unit_nb(key, j):
    x = _splitmix64_nb(key + np.uint64(j))
    return (float(x >> np.uint64(11)) + 0.5) * _TWO_M53


@njit(cache=True)
def uniforms_nb(seeds, n_streams):
    n = seeds.shape[0]
    out = np.empty((n, n_streams))
    for i in range(n):
        key = _splitmix64_nb(seeds[i])
        for j in range(n_streams):
            out[i, j] = _unit_nb(key, j)
    return out


@njit(cache=True, nogil=True)
def first_jumps_nb(omega, kappa_q, kappa_p, a, b, t_max, n_iter, uniforms):
    k4 = (kappa_p - kappa_q) / 4.0
    gamma = (kappa_q + kappa_p) / 4.0
    z = complex((omega - abs(k4)) * (omega + abs(k4)))
    n = uniforms.shape[0]
    jump_t = np.full(n, np.inf)
    channel = np.full(n, -1, dtype=np.int8)
    ce, cg = _amp_nb(omega, k4, gamma, a, b, z, t_max)
    n_end = abs(ce) ** 2 + abs(cg) ** 2
    for i in range(n):
        r = uniforms[i, 0]
        if n_end >= r:
            continue
        lo = 0.0
        hi = t_max
        for _ in range(n_iter):
            mid = 0.5 * (lo + hi)
            ce, cg = _amp_nb(omega, k4, gamma, a, b, z, mid)
            if abs(ce) ** 2 + abs(cg) ** 2 < r:
                hi = mid
            else:
                lo = mid
        jump_t[i] = hi
        ce, cg = _amp_nb(omega, k4, gamma, a, b, z, hi)
        q = kappa_q * abs(ce) ** 2
        p = kappa_p * abs(cg) ** 2
        channel[i] = QUBIT_DECAY if uniforms[i, 1] * (q + p) < q else PHOTON_LOSS
    return jump_t, channel


@njit(cache=True)
def rk4_linear_nb(gen, x0, h, n_sub, n_intervals):
    dim = x0.shape[0]
    out = np.empty((n_intervals + 1, dim), dtype=np.complex128)
    x = x0.copy()
    out[0] = x
    k1 = np.empty(dim, dtype=np.complex128)
    k2 = np.empty(dim, dtype=np.complex128)
    k3 = np.empty(dim, dtype=np.complex128)
    k4 = np.empty(dim, dtype=np.complex128)
    tmp = np.empty(dim, dtype=np.complex128)
    for k in range(n_intervals):
        for _ in range(n_sub):
            for i in range(dim):
                acc = 0j
                for j in range(dim):
                    acc += gen[i, j] * x[j]
                k1[i] = acc
            for i in range(dim):
                tmp[i] = x[i] + 0.5 * h * k1[i]
            for i in range(dim):
                acc = 0j
                for j in range(dim):
                    acc += gen[i, j] * tmp[j]
                k2[i] = acc
            for i in range(dim):
                tmp[i] = x[i] + 0.5 * h * k2[i]
            for i in range(dim):
                acc = 0j
                for j in range(dim):
                    acc += gen[i, j] * tmp[j]
                k3[i] = acc
            for i in range(dim):
                tmp[i] = x[i] + h * k3[i]
            for i in range(dim):
                acc = 0j
                for j in range(dim):
                    acc += gen[i, j] * tmp[j]
                k4[i] = acc
            for i in range(dim):
                x[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        out[k + 1] = x
    return out


# ---------------------------------------------------------------------------
# numpy flavour
# ---------------------------------------------------------------------------


def _cos_sinc_np(z, t):
    z = np.asarray(z, dtype=complex)
    t = np.asarray(t, dtype=float)
    x2 = z * t * t
    small = np.abs(x2) < SERIES_CUTOFF2
    w = np.sqrt(z)
    with np.errstate(all="ignore"):
        c = np.cos(w * t)
        s = np.sin(w * t) / w
    c_ser = 1.0 - x2 / 2.0 + x2 * x2 / 24.0 - x2 * x2 * x2 / 720.0
    s_ser = t * (1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0)
    return np.where(small, c_ser, c), np.where(small, s_ser, s)


def amplitudes_np(omega, kappa_q, kappa_p, a, b, times):
    times = np.asarray(times, dtype=float)
    k4 = (kappa_p - kappa_q) / 4.0
    gamma = (kappa_q + kappa_p) / 4.0
    c, s = _cos_sinc_np(complex((omega - abs(k4)) * (omega + abs(k4))), times)
    damp = np.exp(-gamma * times)
    ce = damp * ((c + k4 * s) * a - 1j * omega * s * b)
    cg = damp * (-1j * omega * s * a + (c - k4 * s) * b)
    return ce, cg


def model_pe_np(e_re, e_im, kappa, times):
    k4 = kappa / 4.0
    z = complex(e_re, e_im) ** 2
    om = np.sqrt(z + k4 * k4)
    c, s = _cos_sinc_np(z, times)
    fa = np.abs(c + k4 * s)
    ga = np.abs(-1j * om * s)
    scale = np.maximum(fa, ga)
    with np.errstate(all="ignore"):
        fa = fa / scale
        ga = ga / scale
        out = fa * fa / (fa * fa + ga * ga)
    out[(scale == 0) | ~np.isfinite(scale)] = np.nan
    return out


def weighted_rss_np(e_re, e_im, kappa, times, data, weights):
    r = data - model_pe_np(e_re, e_im, kappa, times)
    acc = float(np.sum(weights * r * r))
    return acc if math.isfinite(acc) else math.inf


def _splitmix64_np(x):
    with np.errstate(over="ignore"):
        z = x + np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def uniforms_np(seeds, n_streams):
    keys = _splitmix64_np(np.asarray(seeds, dtype=np.uint64))
    j = np.arange(n_streams, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = _splitmix64_np(keys[:, None] + j[None, :])
    return ((x >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def first_jumps_np(omega, kappa_q, kappa_p, a, b, t_max, n_iter, uniforms):
    r = uniforms[:, 0]
    ce, cg = amplitudes_np(omega, kappa_q, kappa_p, a, b, np.array([t_max]))
    n_end = abs(ce[0]) ** 2 + abs(cg[0]) ** 2
    jumped = n_end < r
    rj = r[jumped]
    lo = np.zeros_like(rj)
    hi = np.full_like(rj, t_max)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        ce, cg = amplitudes_np(omega, kappa_q, kappa_p, a, b, mid)
        below = np.abs(ce) ** 2 + np.abs(cg) ** 2 < rj
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
    ce, cg = amplitudes_np(omega, kappa_q, kappa_p, a, b, hi)
    q = kappa_q * np.abs(ce) ** 2
    p = kappa_p * np.abs(cg) ** 2
    jump_t = np.full(r.shape[0], np.inf)
    channel = np.full(r.shape[0], -1, dtype=np.int8)
    jump_t[jumped] = hi
    channel[jumped] = np.where(uniforms[jumped, 1] * (q + p) < q, QUBIT_DECAY, PHOTON_LOSS)
    return jump_t, channel


def rk4_linear_np(gen, x0, h, n_sub, n_intervals):
    # For a constant linear generator the four RK4 stages collapse into one
    # amplification matrix; same scheme, one matvec per substep.
    hl = h * gen
    eye = np.eye(gen.shape[0], dtype=complex)
    step = eye + hl @ (eye + hl @ (eye + hl @ (eye + hl / 4.0) / 3.0) / 2.0)
    out = np.empty((n_intervals + 1, x0.shape[0]), dtype=complex)
    x = np.array(x0, dtype=complex)
    out[0] = x
    for k in range(n_intervals):
        for _ in range(n_sub):
            x = step @ x
        out[k + 1] = x
    return out


def to_u64(seed):
    """Map any Python integer onto the unsigned 64-bit seed space."""
    return int(seed) & _MASK64


def trajectory_seeds(seed, start, stop):
    """Per-trajectory seeds ``seed XOR splitmix64(index)`` for a range of indices."""
    idx = np.arange(start, stop, dtype=np.uint64)
    return np.uint64(to_u64(seed)) ^ _splitmix64_np(idx)


if NUMBA_AVAILABLE:
    amplitudes = amplitudes_nb
    model_pe = model_pe_nb
    weighted_rss = weighted_rss_nb
    uniforms = uniforms_nb
    first_jumps = first_jumps_nb
    rk4_linear = rk4_linear_nb
else:
    amplitudes = amplitudes_np
    model_pe = model_pe_np
    weighted_rss = weighted_rss_np
    uniforms = uniforms_np
    first_jumps = first_jumps_np
    rk4_linear = rk4_linear_np

    # The *_nb helpers then run as plain Python on numpy scalars, where the
    # intended uint64 wraparound raises overflow warnings.
    _splitmix64_nb = _splitmix64_np

    def _unit_nb(key, j):
        with np.errstate(over="ignore"):
            x = _splitmix64_np(key + np.uint64(j))
        return (float(x >> np.uint64(11)) + 0.5) * _TWO_M53
