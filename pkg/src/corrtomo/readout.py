"""Synthetic dispersive readout records.

A driven linear cavity whose frequency depends on the qubit state produces a
complex baseband response ``alpha_s(t)``.  Single shots follow ``alpha_1``
until a T1 jump (if the qubit started excited) and ``alpha_0`` afterwards,
plus white complex Gaussian noise.  Several channels can then be placed on
intermediate frequencies and summed into one quantized real digitizer
stream.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import signal as sp_signal

from . import kernels

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi


class ClippingError(ValueError):
    """Digitizer input exceeded the configured full-scale range."""


def rectangular_envelope(amplitude):
    amplitude = complex(amplitude)
    return lambda t: np.full(np.shape(t), amplitude, dtype=complex)


@dataclass(frozen=True)
class CavityParams:
    """Readout cavity; rates in rad/s, times in s.

    The default drive is rectangular with amplitude chosen so that the
    steady-state response on resonance (``detuning=0``) has unit magnitude.
    """
    kappa: float = TWO_PI * 1e6
    chi: float = TWO_PI * 1e6
    detuning: float = 0.0
    drive_envelope: Optional[Callable] = None
    sample_period: float = 2e-9

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")

    def envelope(self):
        if self.drive_envelope is not None:
            return self.drive_envelope
        return rectangular_envelope(abs(complex(self.kappa / 2, self.chi)))

    @property
    def bandwidth_hz(self):
        """Per-channel bandwidth ``(2 chi + kappa) / 2 pi``."""
        return (2 * abs(self.chi) + self.kappa) / TWO_PI

    def rate(self, qubit_state):
        sign = 1 if qubit_state == 0 else -1
        return complex(-self.kappa / 2, -(self.detuning + sign * self.chi))

    def steady_state(self, qubit_state, drive):
        return drive / -self.rate(qubit_state)


@dataclass(frozen=True)
class NoiseParams:
    sigma_per_sample: float = 0.0
    t1: float = np.inf

    def __post_init__(self):
        if self.sigma_per_sample < 0:
            raise ValueError("sigma_per_sample must be >= 0")
        if not self.t1 > 0:
            raise ValueError("t1 must be positive")


@dataclass
class ShotRecord:
    samples: np.ndarray
    sample_period: float
    channel_id: int = 0

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.size == 0:
            raise ValueError("empty record")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("record contains non-finite samples")

    def __len__(self):
        return self.samples.shape[-1]

    @property
    def times(self):
        return np.arange(len(self)) * self.sample_period


@dataclass
class MultiplexedStream:
    """Real digitizer samples, one row per shot."""
    samples: np.ndarray
    sample_rate: float
    quantization_bits: int
    if_freqs: Sequence[float]
    full_scale: float = 1.0
    clipped: int = 0

    @property
    def times(self):
        return np.arange(self.samples.shape[-1]) / self.sample_rate


def cavity_response(params, qubit_state, duration):
    """Integrate the cavity ODE at the sample period (RK4).

    Returns ``floor(duration / dt)`` samples starting at ``t = 0`` with the
    cavity initially empty.
    """
    if qubit_state not in (0, 1):
        raise ValueError("qubit_state must be 0 or 1")
    dt = params.sample_period
    nsamp = int(np.floor(duration / dt + 1e-9))
    if nsamp < 1:
        raise ValueError("duration shorter than one sample period")
    t_half = np.arange(2 * nsamp - 1) * (dt / 2)
    drive = np.asarray(params.envelope()(t_half), dtype=complex)
    if drive.shape != t_half.shape or not np.all(np.isfinite(drive)):
        raise ValueError("drive envelope must return finite values for an array of times")
    return kernels.cavity_rk4(drive, params.rate(qubit_state), dt)


def _check_pair(alpha0, alpha1):
    alpha0 = np.asarray(alpha0, dtype=complex)
    alpha1 = np.asarray(alpha1, dtype=complex)
    if alpha0.shape != alpha1.shape or alpha0.ndim != 1:
        raise ValueError(f"trace shapes differ: {alpha0.shape} vs {alpha1.shape}")
    return alpha0, alpha1


def jump_times(states, t1, rng):
    """Time each shot leaves the excited trace: 0 for ground preparations,
    exponential with mean T1 (or never) for excited ones."""
    states = np.asarray(states)
    tau = np.zeros(states.shape)
    excited = states == 1
    if np.isfinite(t1):
        tau[excited] = rng.exponential(t1, size=int(excited.sum()))
    else:
        tau[excited] = np.inf
    return tau


def generate_shots(alpha0, alpha1, states, noise, rng, sample_period=2e-9):
    """Noisy records for an array of prepared qubit states, shape (shots, L)."""
    alpha0, alpha1 = _check_pair(alpha0, alpha1)
    states = np.atleast_1d(np.asarray(states))
    tau = jump_times(states, noise.t1, rng)
    t = np.arange(alpha0.size) * sample_period
    out = np.where(t[None, :] < tau[:, None], alpha1[None, :], alpha0[None, :])
    if noise.sigma_per_sample > 0:
        shape = out.shape
        out = out + noise.sigma_per_sample * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return out


def generate_shot(alpha0, alpha1, prepared_state, noise, rng_seed, sample_period=2e-9, channel_id=0):
    """One record; deterministic given ``rng_seed`` (int or SeedSequence)."""
    if prepared_state not in (0, 1):
        raise ValueError("prepared_state must be 0 or 1")
    rng = np.random.default_rng(rng_seed)
    samples = generate_shots(alpha0, alpha1, [prepared_state], noise, rng, sample_period)[0]
    return ShotRecord(samples, sample_period, channel_id)


# -- multiplexing ----------------------------------------------------------

@dataclass
class StreamConfig:
    sample_rate: float = 500e6
    quantization_bits: int = 8
    full_scale: float = 1.0
    on_clip: str = "raise"     # "raise" | "count"

    def __post_init__(self):
        if not 8 <= int(self.quantization_bits) <= 16:
            raise ValueError("quantization_bits must be in 8..16")
        if self.on_clip not in ("raise", "count"):
            raise ValueError("on_clip must be 'raise' or 'count'")
        if not self.full_scale > 0:
            raise ValueError("full_scale must be positive")


def quantize(x, bits, full_scale):
    """Uniform mid-tread quantizer over ``[-full_scale, full_scale)``.

    Returns the quantized samples and the number of clipped samples.
    """
    step = 2 * full_scale / 2 ** bits
    codes = np.round(x / step)
    lo, hi = -(2 ** (bits - 1)), 2 ** (bits - 1) - 1
    clipped = int(np.count_nonzero((codes < lo) | (codes > hi)))
    return np.clip(codes, lo, hi) * step, clipped


def check_bands(ifs, bandwidths):
    ifs = np.asarray(ifs, dtype=float)
    bws = np.broadcast_to(np.asarray(bandwidths, dtype=float), ifs.shape)
    for a in range(ifs.size):
        for b in range(a + 1, ifs.size):
            if abs(ifs[a] - ifs[b]) <= (bws[a] + bws[b]) / 2:
                raise ValueError(f"channel bands overlap: IF {ifs[a]:g} Hz and {ifs[b]:g} Hz")


def synthesize_multiplexed(records, ifs, config, bandwidths=3e6, record_rate=None):
    """Sum ``Re[x_c(t) exp(i 2 pi IF_c t)]`` over channels and quantize.

    ``records`` is a sequence (one per channel) of complex arrays of shape
    (shots, L) or (L,).  Records sampled below the digitizer rate are
    upsampled by an integer factor with a polyphase FIR.
    """
    if len(records) != len(ifs):
        raise ValueError("need one IF per channel")
    check_bands(ifs, bandwidths)
    max_if = max(abs(f) for f in ifs) + np.max(bandwidths) / 2
    if config.sample_rate <= 2 * max_if:
        raise ValueError("sample rate too low for the highest channel band")
    record_rate = config.sample_rate if record_rate is None else record_rate
    up = config.sample_rate / record_rate
    if abs(up - round(up)) > 1e-9 or round(up) < 1:
        raise ValueError("digitizer rate must be an integer multiple of the record rate")
    up = int(round(up))

    total = None
    for rec, f_if in zip(records, ifs):
        x = np.atleast_2d(np.asarray(rec, dtype=complex))
        if up > 1:
            x = sp_signal.resample_poly(x, up, 1, axis=-1)
        n = np.arange(x.shape[-1])
        carrier = np.exp(1j * TWO_PI * f_if * n / config.sample_rate)
        term = (x * carrier).real
        if total is None:
            total = term
        elif term.shape != total.shape:
            raise ValueError("channel records have different shapes")
        else:
            total += term

    samples, clipped = quantize(total, config.quantization_bits, config.full_scale)
    if clipped:
        msg = f"{clipped} samples beyond full scale {config.full_scale:g}"
        if config.on_clip == "raise":
            raise ClippingError(msg)
        log.warning(msg)
    return MultiplexedStream(samples, config.sample_rate, int(config.quantization_bits),
                             list(ifs), config.full_scale, clipped)
