"""Expectation-value estimators for filtered single-shot values.

Soft averaging takes the plain mean of calibrated continuous values.
Thresholding counts signs and divides by the single-shot fidelity ``F`` to
undo the bias.  For equal-width Gaussians at +-1 with standard deviation
``nu`` the fidelity is ``F(nu) = 2 Phi(1/nu) - 1 = erf(1 / (nu sqrt 2))``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import erf


@dataclass(frozen=True)
class EstimatorConfig:
    mode: str = "soft"
    threshold: float = 0.0
    bias_factor: float = 1.0

    def __post_init__(self):
        if self.mode not in ("soft", "threshold"):
            raise ValueError(f"unknown estimator mode {self.mode!r}")
        if not 0 < self.bias_factor <= 1:
            raise ValueError("bias_factor must lie in (0, 1]")


@dataclass(frozen=True)
class EstimateResult:
    mean: float
    variance: float
    shots_used: int

    @property
    def stderr(self):
        return float(np.sqrt(self.variance))


def _values(values):
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("no values to average")
    return v


def soft_average(values):
    v = _values(values)
    var = v.var(ddof=1) / v.size if v.size > 1 else 0.0
    return EstimateResult(float(v.mean()), float(var), int(v.size))


def threshold_estimate(values, cfg=EstimatorConfig(mode="threshold")):
    v = _values(values)
    f = cfg.bias_factor
    if not f > 0:
        raise ValueError("bias factor must be positive")
    raw = (np.count_nonzero(v > cfg.threshold) - np.count_nonzero(v < cfg.threshold)) / v.size
    return EstimateResult(float(raw / f), float((1 - raw ** 2) / (f ** 2 * v.size)), int(v.size))


def estimate(values, cfg=EstimatorConfig()):
    return soft_average(values) if cfg.mode == "soft" else threshold_estimate(values, cfg)


# -- analytic variance models ------------------------------------------------

def gaussian_fidelity(nu):
    """Single-shot fidelity of two Gaussians at +-1 with std ``nu``."""
    nu = np.asarray(nu, dtype=float)
    with np.errstate(divide="ignore"):
        return erf(1.0 / (nu * np.sqrt(2)))


def predicted_soft_variance(mean_sz, nu2, r=1):
    if abs(mean_sz) > 1:
        raise ValueError("|<sigma_z>| must be <= 1")
    return (nu2 + 1 - mean_sz ** 2) / r


def predicted_threshold_variance(mean_sz, nu, r=1):
    if not np.all(np.asarray(nu) > 0):
        raise ValueError("nu must be positive")
    return 1 / (r * gaussian_fidelity(nu) ** 2) - mean_sz ** 2 / r


def threshold_bias(mean_sz, nu):
    """Bias of the uncorrected thresholded mean, independent of R."""
    return mean_sz * (gaussian_fidelity(nu) - 1)


def crossover_snr(tol=1e-12):
    """Solve ``1/F(nu)**2 = nu**2 + 1`` by bisection.

    Returns ``(snr, fidelity)`` with ``snr = 1/nu**2``.
    """
    def gap(nu):
        return 1 / gaussian_fidelity(nu) ** 2 - (nu ** 2 + 1)

    # gap < 0 for small nu (threshold wins), > 0 for large nu
    lo, hi = 0.1, 10.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) < 0:
            lo = mid
        else:
            hi = mid
    nu = 0.5 * (lo + hi)
    return 1 / nu ** 2, float(gaussian_fidelity(nu))


# -- correlations ------------------------------------------------------------

def correlate(channels):
    """Shot-by-shot product across channels and its soft average.

    ``channels`` is a sequence of equal-length value arrays aligned by shot.
    """
    arrays = [np.asarray(c, dtype=float).ravel() for c in channels]
    if not arrays:
        raise ValueError("no channels to correlate")
    n = arrays[0].size
    for i, a in enumerate(arrays):
        if a.size != n:
            raise ValueError(f"channel {i} has {a.size} shots, expected {n}")
    products = np.prod(np.vstack(arrays), axis=0)
    return products, soft_average(products)


def goodman_variance(nu2s, means):
    """Variance of a product of independent records,
    ``prod(nu_k**2 + 1) - prod(<sigma_z,k>**2)``."""
    nu2s = np.asarray(nu2s, dtype=float)
    means = np.asarray(means, dtype=float)
    if nu2s.shape != means.shape or nu2s.ndim != 1 or nu2s.size == 0:
        raise ValueError("need equal-length, non-empty nu2s and means")
    return float(np.prod(nu2s + 1) - np.prod(means ** 2))


def goodman_approx(n, snr):
    """High-SNR approximation ``N / SNR``."""
    if not snr > 0:
        raise ValueError("snr must be positive")
    return n / snr
