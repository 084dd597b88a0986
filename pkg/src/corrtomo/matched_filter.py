"""Matched-filter kernel estimated from calibration records.

Weights are ``K_j = conj(D_j) / nu_j**2`` where ``D`` is the difference of the
mean ground and excited responses and ``nu_j**2`` the pooled per-sample
residual variance.  Filtered values are ``scale * Re[sum_j K_j (psi_j - mu_j)]
+ offset`` with ``mu`` the midpoint of the two mean responses, anchored so the
calibration means land on +1 (ground) and -1 (excited).
"""

from dataclasses import dataclass, replace

import numpy as np

from . import kernels

MIN_CAL_SHOTS = 100


@dataclass
class CalibrationSet:
    ground: np.ndarray
    excited: np.ndarray

    def __post_init__(self):
        self.ground = np.atleast_2d(np.asarray(self.ground, dtype=complex))
        self.excited = np.atleast_2d(np.asarray(self.excited, dtype=complex))
        if self.ground.shape[1] != self.excited.shape[1]:
            raise ValueError("ground and excited records differ in length")
        if min(len(self.ground), len(self.excited)) < MIN_CAL_SHOTS:
            raise ValueError(f"need at least {MIN_CAL_SHOTS} calibration shots per state")

    @property
    def length(self):
        return self.ground.shape[1]


@dataclass(frozen=True)
class Kernel:
    weights: np.ndarray
    baseline: np.ndarray
    window_end: int
    scale: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("kernel weights must be finite")
        if not 0 < self.window_end <= self.weights.size:
            raise ValueError("window_end out of range")
        if self.scale == 0:
            raise ValueError("scale must be nonzero")

    def raw(self, shots):
        """Complex filter output before scaling, over the current window."""
        shots = np.asarray(shots)
        w = self.window_end
        if shots.shape[-1] < w:
            raise ValueError(f"record of length {shots.shape[-1]} shorter than window {w}")
        return (shots[..., :w] - self.baseline[:w]) @ self.weights[:w]

    def to_dict(self):
        return {
            "weights": [[z.real, z.imag] for z in self.weights.tolist()],
            "baseline": [[z.real, z.imag] for z in self.baseline.tolist()],
            "window_end": int(self.window_end),
            "scale": float(self.scale),
            "offset": float(self.offset),
        }

    @classmethod
    def from_dict(cls, d):
        def cplx(pairs):
            a = np.asarray(pairs, dtype=float)
            return a[:, 0] + 1j * a[:, 1]
        return cls(cplx(d["weights"]), cplx(d["baseline"]), int(d["window_end"]),
                   float(d["scale"]), float(d["offset"]))


def _anchor(kernel, cal):
    """Set scale/offset so the calibration means map to +1 and -1."""
    m0 = np.mean(kernel.raw(cal.ground).real)
    m1 = np.mean(kernel.raw(cal.excited).real)
    if m0 == m1:
        raise ValueError("calibration means coincide; cannot anchor the kernel")
    scale = 2.0 / (m0 - m1)
    return replace(kernel, scale=float(scale), offset=float(-scale * (m0 + m1) / 2))


def estimate_kernel(cal, window_end=None):
    mean0 = cal.ground.mean(axis=0)
    mean1 = cal.excited.mean(axis=0)
    diff = mean0 - mean1
    resid = np.concatenate([cal.ground - mean0, cal.excited - mean1])
    nu2 = np.mean(np.abs(resid) ** 2, axis=0) * len(resid) / (len(resid) - 2)

    # variance at the level of rounding error in the means counts as zero
    scale = max(np.max(np.abs(mean0)), np.max(np.abs(mean1)), 1e-300)
    tiny = (16 * np.finfo(float).eps * scale) ** 2
    informative = np.abs(diff) > 0
    zero = nu2 <= tiny
    if not np.any(informative & ~zero):
        # degenerate (noiseless) calibration: plain conj(D) weighting
        weights = diff.conj()
    else:
        # isolated noiseless samples (e.g. before any T1 jump can occur) are
        # floored at the smallest observed variance rather than given infinite weight
        floor = np.min(nu2[informative & ~zero])
        nu2 = np.where(zero & informative, floor, nu2)
        weights = np.where(informative, diff.conj() / np.where(zero & ~informative, 1, nu2), 0)
    kernel = Kernel(weights, (mean0 + mean1) / 2, window_end or cal.length)
    return _anchor(kernel, cal)


def apply_kernel(shots, kernel):
    """Calibrated real filter output, one value per shot."""
    return kernel.scale * kernel.raw(shots).real + kernel.offset


def single_shot_fidelity(values0, values1):
    """``max_t |CDF_0(t) - CDF_1(t)|`` of the two empirical distributions."""
    a = np.sort(np.asarray(values0, dtype=float).ravel())
    b = np.sort(np.asarray(values1, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("need at least one value per state")
    return float(kernels.window_separation(a[:, None], b[:, None])[0])


def _window_sums(cal, kernel, stride):
    contrib0 = ((cal.ground - kernel.baseline) * kernel.weights).real
    contrib1 = ((cal.excited - kernel.baseline) * kernel.weights).real
    ends = np.arange(stride, cal.length + 1, stride)
    if ends[-1] != cal.length:
        ends = np.append(ends, cal.length)
    return ends, np.cumsum(contrib0, axis=1)[:, ends - 1], np.cumsum(contrib1, axis=1)[:, ends - 1]


def window_fidelities(cal, kernel, stride=1):
    """Single-shot fidelity for every candidate window end.

    Returns ``(ends, fidelities)``; window ``e`` integrates samples ``< e``.
    """
    ends, s0, s1 = _window_sums(cal, kernel, stride)
    return ends, kernels.window_separation(s0, s1)


def optimize_window(cal, kernel, stride=1):
    """Window end maximizing single-shot fidelity.

    The empirical fidelity saturates at 1 once the calibration sets separate
    completely, so ties go to the window with the highest output SNR and then
    to the earliest one.
    """
    ends, s0, s1 = _window_sums(cal, kernel, stride)
    fid = kernels.window_separation(s0, s1)
    tied = np.flatnonzero(fid == fid.max())
    if tied.size > 1:
        gap = (s0[:, tied].mean(axis=0) - s1[:, tied].mean(axis=0)) ** 2
        var = s0[:, tied].var(axis=0) + s1[:, tied].var(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            snr = np.where(var > 0, gap / np.where(var > 0, var, 1), np.inf)
        tied = tied[[int(np.argmax(snr))]]
    return int(ends[tied[0]])


def with_window(kernel, cal, window_end):
    return _anchor(replace(kernel, window_end=int(window_end)), cal)


def calibrate(cal, optimize=True, stride=1):
    """Estimate the kernel, pick the integration window, re-anchor."""
    kernel = estimate_kernel(cal)
    if optimize:
        kernel = with_window(kernel, cal, optimize_window(cal, kernel, stride))
    return kernel


def output_snr(raw0, raw1):
    """``|mean0 - mean1|**2`` over the pooled variance of complex filter outputs.

    For the matched kernel and circular noise this approaches
    ``sum_j |D_j|**2 / nu_j**2``.
    """
    raw0 = np.asarray(raw0)
    raw1 = np.asarray(raw1)
    sep = abs(raw0.mean() - raw1.mean()) ** 2
    var = (np.sum(np.abs(raw0 - raw0.mean()) ** 2) + np.sum(np.abs(raw1 - raw1.mean()) ** 2)) / (raw0.size + raw1.size - 2)
    return float(sep / var)


def analytic_snr(diff, nu2):
    return float(np.sum(np.abs(diff) ** 2 / nu2))
