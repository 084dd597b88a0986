"""Inner loops with numba and numpy implementations.

Each public name is bound to the numba version when acceleration is enabled
and to the numpy version otherwise; both variants stay importable under the
``*_nb`` / ``*_np`` names so tests and benchmarks can compare them.
"""

import numpy as np

from ._accel import USE_NUMBA, njit, prange


# --------------------------------------------------------------------------
# zero-phase FIR filter + decimation
# --------------------------------------------------------------------------

def fir_decimate_np(x, taps, factor):
    """Filter rows of ``x`` with ``taps`` centred on each sample, keep every
    ``factor``-th output.  Zero padding outside the record."""
    x = np.atleast_2d(x)
    rows, length = x.shape
    ntaps = taps.size
    centre = (ntaps - 1) // 2
    nout = (length + factor - 1) // factor
    xp = np.zeros((rows, length + ntaps - 1), dtype=x.dtype)
    xp[:, centre:centre + length] = x
    out = np.zeros((rows, nout), dtype=np.result_type(x.dtype, taps.dtype))
    hr = taps[::-1]
    stop = factor * (nout - 1) + 1
    for j in range(ntaps):
        out += hr[j] * xp[:, j:j + stop:factor]
    return out


@njit(parallel=True, cache=True)
def _fir_decimate_rows(x, taps, factor, out):
    rows, length = x.shape
    ntaps = taps.size
    centre = (ntaps - 1) // 2
    nout = out.shape[1]
    for r in prange(rows):
        for m in range(nout):
            n = m * factor + centre
            k0 = max(0, n - length + 1)
            k1 = min(ntaps, n + 1)
            acc = out[r, m] * 0
            for k in range(k0, k1):
                acc += taps[k] * x[r, n - k]
            out[r, m] = acc


def fir_decimate_nb(x, taps, factor):
    x = np.ascontiguousarray(np.atleast_2d(x))
    taps = np.ascontiguousarray(taps, dtype=np.float64)
    rows, length = x.shape
    nout = (length + factor - 1) // factor
    out = np.zeros((rows, nout), dtype=np.result_type(x.dtype, taps.dtype))
    _fir_decimate_rows(x, taps, int(factor), out)
    return out


# --------------------------------------------------------------------------
# linear cavity ODE, fixed-step RK4
# --------------------------------------------------------------------------

def cavity_rk4_np(drive_half, rate, dt):
    """Integrate ``da/dt = rate*a + drive(t)`` from ``a(0)=0``.

    ``drive_half`` holds the drive sampled every ``dt/2`` (length 2n+1); the
    result has n+1 samples at multiples of ``dt``.
    """
    nsteps = (drive_half.size - 1) // 2
    alpha = np.zeros(nsteps + 1, dtype=np.complex128)
    a = 0j
    for i in range(nsteps):
        e0 = drive_half[2 * i]
        e1 = drive_half[2 * i + 1]
        e2 = drive_half[2 * i + 2]
        k1 = rate * a + e0
        k2 = rate * (a + 0.5 * dt * k1) + e1
        k3 = rate * (a + 0.5 * dt * k2) + e1
        k4 = rate * (a + dt * k3) + e2
        a = a + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        alpha[i + 1] = a
    return alpha


cavity_rk4_nb = njit(cache=True)(cavity_rk4_np)


# --------------------------------------------------------------------------
# empirical CDF separation for every integration window
# --------------------------------------------------------------------------

def _separation_sorted(a, b):
    values = np.concatenate([a, b])
    fa = np.searchsorted(a, values, side="right") / a.size
    fb = np.searchsorted(b, values, side="right") / b.size
    return np.max(np.abs(fa - fb))


def window_separation_np(s0, s1):
    """Kolmogorov separation between columns of ``s0`` and ``s1``.

    ``s0`` and ``s1`` are (shots, windows) arrays of filtered values; returns
    one separation per window.
    """
    a = np.sort(s0, axis=0)
    b = np.sort(s1, axis=0)
    return np.array([_separation_sorted(a[:, w], b[:, w]) for w in range(a.shape[1])])


@njit(cache=True)
def _separation_merge(a, b):
    na = a.size
    nb = b.size
    i = 0
    j = 0
    best = 0.0
    while i < na or j < nb:
        if j >= nb or (i < na and a[i] <= b[j]):
            v = a[i]
        else:
            v = b[j]
        while i < na and a[i] <= v:
            i += 1
        while j < nb and b[j] <= v:
            j += 1
        d = abs(i / na - j / nb)
        if d > best:
            best = d
    return best


@njit(parallel=True, cache=True)
def _window_separation(a, b, out):
    for w in prange(a.shape[0]):
        out[w] = _separation_merge(a[w], b[w])


def window_separation_nb(s0, s1):
    # numpy's sort beats numba's; only the merge walk is compiled
    a = np.sort(np.asarray(s0, dtype=np.float64).T, axis=1)
    b = np.sort(np.asarray(s1, dtype=np.float64).T, axis=1)
    out = np.empty(a.shape[0])
    _window_separation(a, b, out)
    return out


if USE_NUMBA:
    fir_decimate = fir_decimate_nb
    cavity_rk4 = cavity_rk4_nb
    window_separation = window_separation_nb
else:
    fir_decimate = fir_decimate_np
    cavity_rk4 = cavity_rk4_np
    window_separation = window_separation_np
