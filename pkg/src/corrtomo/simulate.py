"""Simulated tomography experiments.

Two interchangeable samplers turn computational-basis outcome probabilities
into calibrated filtered values, shape (shots, channels):

``ValueModel``
    draws each channel's filtered value directly from a Gaussian whose mean
    follows an injected diagonal measurement operator and whose variance is
    set per basis state.  Fast; used for measurement-operator recovery and
    process tomography at large shot budgets.

``ReadoutChain``
    synthesizes cavity records with T1 jumps and noise, multiplexes them
    onto one quantized digitizer stream, channelizes, and applies per-channel
    matched-filter kernels.
"""

import itertools
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from . import quantum as qc
from .channelizer import ChannelConfig, Channelizer
from .estimation import correlate
from .matched_filter import CalibrationSet, Kernel, apply_kernel, calibrate
from .readout import (CavityParams, NoiseParams, StreamConfig, cavity_response, generate_shots,
                      rectangular_envelope, synthesize_multiplexed)
from .tomography import MeasurementOperator, default_settings, measurement_tomography

# reference single-shot variances, basis order |00>, |01>, |10>, |11>
DEFAULT_NU2 = np.array([[0.42, 0.44, 0.85, 0.77],
                        [1.36, 1.67, 1.37, 1.84]])
DEFAULT_M1 = {"ZI": 1.0110, "IZ": 0.0164, "ZZ": -0.0106}
DEFAULT_M2 = {"ZI": 0.00, "IZ": 0.98, "ZZ": 0.02}


def derived_rng(seed, *key):
    """Independent generator for a (seed, key...) pair; keys are small ints."""
    flat = [int(seed)]
    for k in key:
        flat.extend(int(v) for v in np.ravel(k))
    return np.random.default_rng(np.random.SeedSequence(flat))


def outcome_probabilities(rho, setting, rotations=None):
    """Basis-state probabilities after the setting's pre-measurement pulses."""
    u = qc.product_unitary(setting, rotations)
    p = np.real(np.diag(u @ rho @ u.conj().T))
    p = np.clip(p, 0, None)
    return p / p.sum()


def outcome_bits(outcomes, n_qubits):
    """(shots, n_qubits) array of 0/1, first qubit most significant."""
    outcomes = np.asarray(outcomes)
    shifts = np.arange(n_qubits - 1, -1, -1)
    return (outcomes[:, None] >> shifts) & 1


def correlator_channels(n_channels):
    """Every non-empty channel subset, singles first: (0,), (1,), (0, 1), ..."""
    out = []
    for k in range(1, n_channels + 1):
        out.extend(itertools.combinations(range(n_channels), k))
    return out


@dataclass
class ValueModel:
    """Gaussian filtered-value model with injected cross-coupling."""
    channel_ops: List[MeasurementOperator]
    nu2: np.ndarray

    def __post_init__(self):
        self.nu2 = np.asarray(self.nu2, dtype=float)
        n = self.channel_ops[0].n_qubits
        if self.nu2.shape != (len(self.channel_ops), 2 ** n):
            raise ValueError("nu2 must be (channels, 2**n_qubits)")
        self._means = np.array([op.diagonal() for op in self.channel_ops])

    @classmethod
    def defaults(cls):
        return cls([MeasurementOperator.from_terms(DEFAULT_M1, 2, (0,)),
                    MeasurementOperator.from_terms(DEFAULT_M2, 2, (1,))], DEFAULT_NU2)

    @property
    def n_qubits(self):
        return self.channel_ops[0].n_qubits

    @property
    def n_channels(self):
        return len(self.channel_ops)

    def true_operator(self, channels):
        """Correlator observable implied by the model (noise independent per channel)."""
        diag = np.prod(self._means[list(channels)], axis=0)
        return measurement_tomography(diag, channels)

    def sample(self, probs, shots, rng):
        b = rng.choice(probs.size, size=shots, p=probs)
        noise = rng.standard_normal((shots, self.n_channels))
        return self._means[:, b].T + np.sqrt(self.nu2[:, b]).T * noise


@dataclass
class ReadoutChannel:
    cavity: CavityParams = field(default_factory=CavityParams)
    noise: NoiseParams = field(default_factory=NoiseParams)
    if_freq: float = 10e6
    drive_scale: float = 1.0


@dataclass
class ReadoutChain:
    """Full record-level readout of several qubits on one digitizer."""
    channels: List[ReadoutChannel]
    duration: float = 2e-6
    stream: StreamConfig = field(default_factory=StreamConfig)
    stage1_factor: int = 5
    stage2_factor: int = 4
    num_taps: int = 127
    chunk: int = 2048
    kernels: Optional[List[Kernel]] = None

    def __post_init__(self):
        period = self.channels[0].cavity.sample_period
        if any(abs(ch.cavity.sample_period - period) > 1e-15 for ch in self.channels):
            raise ValueError("all channels must share one record sample period")
        self.record_rate = 1 / period
        self.channelizer = Channelizer(
            self.stream.sample_rate,
            [ChannelConfig(ch.if_freq, ch.cavity.bandwidth_hz, self.stage2_factor) for ch in self.channels],
            stage1_factor=self.stage1_factor, num_taps=self.num_taps)
        self._traces = None

    @property
    def n_channels(self):
        return len(self.channels)

    @property
    def n_qubits(self):
        return len(self.channels)

    def traces(self):
        if self._traces is None:
            out = []
            for ch in self.channels:
                a0 = cavity_response(ch.cavity, 0, self.duration) * ch.drive_scale
                a1 = cavity_response(ch.cavity, 1, self.duration) * ch.drive_scale
                out.append((a0, a1))
            self._traces = out
        return self._traces

    def set_drive_scale(self, index, scale):
        self.channels[index] = replace(self.channels[index], drive_scale=float(scale))
        self._traces = None
        self.kernels = None

    def _baseband(self, records):
        stream = synthesize_multiplexed(records, [ch.if_freq for ch in self.channels], self.stream,
                                        [ch.cavity.bandwidth_hz for ch in self.channels],
                                        record_rate=self.record_rate)
        return [r.samples for r in self.channelizer(stream)], stream.clipped

    def records(self, bits, rng):
        """Per-channel baseband records after channelization for (shots, channels) bits."""
        bits = np.atleast_2d(bits)
        period = 1 / self.record_rate
        outs = [[] for _ in self.channels]
        self.clipped = 0
        for start in range(0, len(bits), self.chunk):
            blk = bits[start:start + self.chunk]
            recs = [generate_shots(a0, a1, blk[:, c], ch.noise, rng, period)
                    for c, (ch, (a0, a1)) in enumerate(zip(self.channels, self.traces()))]
            base, clipped = self._baseband(recs)
            self.clipped += clipped
            for c, b in enumerate(base):
                outs[c].append(b)
        return [np.concatenate(o) for o in outs]

    def noiseless_baseband(self):
        """Channelized mean responses per channel: list of (ground, excited)."""
        peak = max(np.max(np.abs(a)) for pair in self.traces() for a in pair)
        saved = self.stream
        self.stream = replace(saved, quantization_bits=16, full_scale=4 * peak, on_clip="raise")
        try:
            out = []
            for c, pair in enumerate(self.traces()):
                base = []
                for trace in pair:
                    recs = [np.zeros((1, trace.size), dtype=complex) for _ in self.channels]
                    recs[c][0] = trace
                    base.append(self._baseband(recs)[0][c][0])
                out.append(tuple(base))
        finally:
            self.stream = saved
        return out

    def noise_records(self, shots, rng):
        """Channelized noise-only records (no cavity signal, no T1)."""
        period = 1 / self.record_rate
        outs = [[] for _ in self.channels]
        for start in range(0, shots, self.chunk):
            n = min(self.chunk, shots - start)
            recs = []
            for ch, (a0, _) in zip(self.channels, self.traces()):
                zero = np.zeros_like(a0)
                recs.append(generate_shots(zero, zero, np.zeros(n, dtype=int),
                                           NoiseParams(ch.noise.sigma_per_sample), rng, period))
            base, _ = self._baseband(recs)
            for c, b in enumerate(base):
                outs[c].append(b)
        return [np.concatenate(o) for o in outs]

    def tune_drive(self, target_nu2, rng, pilot_shots=1024):
        """Rescale each channel's drive so the ground-state filtered variance
        of a full-window matched filter lands near ``target_nu2[c]``.

        The filtered noise variance is measured on noise-only pilot shots
        (channelized noise is oversampled, hence correlated between samples)
        and scales as ``1 / drive**2``.  Returns the pre-tuning variances.
        """
        noise = self.noise_records(pilot_shots, rng)
        means = self.noiseless_baseband()
        before = []
        for c, ((g, e), xi) in enumerate(zip(means, noise)):
            nu2 = np.mean(np.abs(xi) ** 2, axis=0)
            diff = g - e
            weights = diff.conj() / nu2
            scale = 2 / np.sum(np.abs(diff) ** 2 / nu2)
            current = float(np.var((xi @ weights).real) * scale ** 2)
            before.append(current)
            self.set_drive_scale(c, self.channels[c].drive_scale * np.sqrt(current / target_nu2[c]))
        return before

    def calibrate(self, shots, rng, optimize=True):
        """Fit one kernel per channel from basis-state calibration shots."""
        n = self.n_channels
        bits = np.array(list(itertools.product([0, 1], repeat=n)))
        bits = np.repeat(bits, int(np.ceil(shots / 2 ** (n - 1))), axis=0)
        recs = self.records(bits, rng)
        self.kernels = []
        for c in range(n):
            cal = CalibrationSet(recs[c][bits[:, c] == 0], recs[c][bits[:, c] == 1])
            self.kernels.append(calibrate(cal, optimize=optimize))
        return self.kernels

    def filter(self, recs):
        if self.kernels is None:
            raise RuntimeError("call calibrate() before filtering")
        return np.column_stack([apply_kernel(r, k) for r, k in zip(recs, self.kernels)])

    def sample(self, probs, shots, rng):
        b = rng.choice(probs.size, size=shots, p=probs)
        return self.filter(self.records(outcome_bits(b, self.n_qubits), rng))


def default_chain(t1=20e-6, sigma=12.0, duration=2e-6, bits=8, ifs=(10e6, 20e6), full_scale=None):
    """Two-qubit chain on the desk-scale defaults (500 MS/s, 8-bit)."""
    chans = [ReadoutChannel(CavityParams(), NoiseParams(sigma, t1), f) for f in ifs]
    if full_scale is None:
        # stream noise std is sigma*sqrt(n_channels); leave ~7 std headroom
        full_scale = 7.0 * sigma * np.sqrt(len(ifs)) + 4.0
    return ReadoutChain(chans, duration, StreamConfig(500e6, bits, full_scale, "count"))


# -- experiments -------------------------------------------------------------

def basis_state_values(sampler, shots, seed):
    """Filtered values for every computational basis preparation."""
    n = sampler.n_qubits
    out = []
    for b in range(2 ** n):
        probs = np.zeros(2 ** n)
        probs[b] = 1.0
        out.append(sampler.sample(probs, shots, derived_rng(seed, 100, b)))
    return out


def measurement_operators(basis_values, correlators=None):
    """Measurement tomography of every correlator from basis-state values."""
    n_channels = basis_values[0].shape[1]
    correlators = correlator_channels(n_channels) if correlators is None else correlators
    ops = []
    for chans in correlators:
        means, variances = [], []
        for vals in basis_values:
            _, est = correlate([vals[:, c] for c in chans])
            means.append(est.mean)
            variances.append(est.variance)
        ops.append(measurement_tomography(means, chans, variances))
    return ops


def state_tomography_data(sampler, rho, shots, seed, settings=None):
    settings = default_settings(sampler.n_qubits) if settings is None else settings
    return {tuple(s): sampler.sample(outcome_probabilities(rho, s), shots, derived_rng(seed, 200, s))
            for s in settings}


def process_tomography_data(sampler, unitary, shots, seed, preps=None, settings=None):
    n = sampler.n_qubits
    preps = default_settings(n) if preps is None else preps
    settings = default_settings(n) if settings is None else settings
    data = {}
    for a in preps:
        rho_out = unitary @ qc.prep_state(a) @ unitary.conj().T
        for s in settings:
            data[(tuple(a), tuple(s))] = sampler.sample(outcome_probabilities(rho_out, s), shots,
                                                        derived_rng(seed, 300, a, s))
    return data


def zx_input_state():
    """``(I - Y)/2 (x) (I + Z)/2`` normalised to unit trace."""
    return np.kron((qc.I2 - qc.Y) / 2, (qc.I2 + qc.Z) / 2)


def zx_output_state():
    """Pure state after ZX(-pi/2) on the ``-Y (x) |0>`` input."""
    u = qc.zx_gate(-np.pi / 2)
    rho = u @ zx_input_state() @ u.conj().T
    w, v = np.linalg.eigh(rho)
    return v[:, -1], rho
