"""Software channelizer: windowed-sinc FIR design, decimation and
frequency-shifting channel extraction.

The usual chain is two stages: a real low-pass + decimation that keeps all
IF channels, then per channel a complex down-shift by the IF followed by a
narrow low-pass + decimation to baseband.
"""

import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from . import kernels
from .readout import MultiplexedStream, ShotRecord

WINDOWS = {"hamming": np.hamming}


@dataclass(frozen=True)
class FirFilter:
    taps: np.ndarray
    cutoff: float
    sample_rate: float
    window: str = "hamming"

    @property
    def num_taps(self):
        return self.taps.size

    def response(self, freqs):
        """Complex frequency response at ``freqs`` (Hz), zero-phase."""
        n = np.arange(self.num_taps) - (self.num_taps - 1) / 2
        w = 2 * np.pi * np.asarray(freqs, dtype=float)[..., None] / self.sample_rate
        return np.exp(-1j * w * n) @ self.taps

    def to_dict(self):
        return {"taps": self.taps.tolist(), "cutoff": self.cutoff,
                "sample_rate": self.sample_rate, "window": self.window}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["taps"], dtype=float), float(d["cutoff"]),
                   float(d["sample_rate"]), d.get("window", "hamming"))


@dataclass(frozen=True)
class ChannelConfig:
    if_freq: float
    bandwidth: float
    decimation_factor: int = 1

    @classmethod
    def parse(cls, text):
        """``"<if_hz>:<bw_hz>:<decim>"`` as used on the command line."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"channel spec {text!r} is not <if_hz>:<bw_hz>:<decim>")
        return cls(float(parts[0]), float(parts[1]), int(parts[2]))


def design_lowpass(cutoff, sample_rate, num_taps=127, window="hamming"):
    """Windowed-sinc low-pass with unit DC gain."""
    if not 0 < cutoff < sample_rate / 2:
        raise ValueError(f"cutoff {cutoff:g} Hz outside (0, {sample_rate / 2:g})")
    if num_taps < 11 or num_taps % 2 == 0:
        raise ValueError("num_taps must be odd and >= 11")
    if window not in WINDOWS:
        raise ValueError(f"unknown window {window!r}")
    fc = cutoff / sample_rate
    n = np.arange(num_taps) - (num_taps - 1) / 2
    taps = 2 * fc * np.sinc(2 * fc * n) * WINDOWS[window](num_taps)
    taps /= taps.sum()
    return FirFilter(taps, float(cutoff), float(sample_rate), window)


def transient_samples(fir, factor=1):
    """Output samples at each record edge affected by zero padding."""
    return math.ceil(math.ceil(fir.num_taps / 2) / factor)


def decimate(samples, fir, factor):
    """Zero-phase FIR filter then keep every ``factor``-th sample.

    Output sample ``m`` corresponds to input sample ``m * factor``.
    """
    factor = int(factor)
    if factor < 1:
        raise ValueError("decimation factor must be >= 1")
    samples = np.asarray(samples)
    squeeze = samples.ndim == 1
    out = kernels.fir_decimate(np.atleast_2d(samples), fir.taps, factor)
    return out[0] if squeeze else out


def _as_stream_array(stream):
    if isinstance(stream, MultiplexedStream):
        return np.asarray(stream.samples), stream.sample_rate
    raise TypeError("expected a MultiplexedStream")


def extract_channel(stream, cfg, fir, channel_id=0):
    """Down-shift by ``cfg.if_freq``, low-pass with ``fir``, decimate.

    Returns a ``ShotRecord`` whose samples have shape (shots, L_out), or
    (L_out,) for a single-shot stream.
    """
    x, rate = _as_stream_array(stream)
    if abs(cfg.if_freq) + cfg.bandwidth / 2 >= rate / 2:
        raise ValueError("channel band lies outside the stream bandwidth")
    if abs(fir.sample_rate - rate) > 1e-6 * rate:
        raise ValueError("filter designed for a different sample rate")
    if cfg.bandwidth / 2 > rate / cfg.decimation_factor / 2:
        raise ValueError("channel bandwidth exceeds the output Nyquist band")
    n = np.arange(x.shape[-1])
    # real stream carries x/2 at +IF; the factor 2 restores unit gain
    shifted = 2 * x * np.exp(-2j * np.pi * cfg.if_freq * n / rate)
    out = decimate(shifted, fir, cfg.decimation_factor)
    return ShotRecord(out, cfg.decimation_factor / rate, channel_id)


def _decimated_stream(stream, fir, factor):
    x, rate = _as_stream_array(stream)
    if fir.cutoff > rate / factor / 2:
        raise ValueError("stage-1 cutoff exceeds the decimated Nyquist frequency")
    return MultiplexedStream(decimate(x, fir, factor), rate / factor, stream.quantization_bits,
                             stream.if_freqs, stream.full_scale, stream.clipped)


@dataclass
class Channelizer:
    """Two-stage extraction of several IF channels from one stream.

    Stage 1 keeps every channel; its default cutoff sits halfway between the
    highest channel band edge and the decimated Nyquist frequency so the
    whole band lies in the flat part of the response.  Stage 2 isolates each
    channel with cutoff equal to the channel bandwidth (``stage2_scale``
    times it), which keeps ``+-bandwidth/2`` flat to about 0.05 dB at 127
    taps while rejecting a neighbour two bandwidths away by > 50 dB.
    """
    sample_rate: float
    channels: List[ChannelConfig]
    stage1_factor: int = 5
    num_taps: int = 127
    stage1_cutoff: float = None
    stage2_scale: float = 1.0
    stage1: FirFilter = field(init=False)
    stage2: List[FirFilter] = field(init=False)

    def __post_init__(self):
        mid_rate = self.sample_rate / self.stage1_factor
        edge = max(abs(c.if_freq) + c.bandwidth / 2 for c in self.channels)
        if edge >= mid_rate / 2:
            raise ValueError("stage-1 decimation would alias the outer channel")
        cutoff = self.stage1_cutoff
        if cutoff is None:
            cutoff = (edge + mid_rate / 2) / 2
        if cutoff > mid_rate / 2:
            raise ValueError("stage-1 cutoff exceeds the decimated Nyquist frequency")
        self.stage1 = design_lowpass(cutoff, self.sample_rate, self.num_taps)
        self.stage2 = []
        for c in self.channels:
            fc = min(self.stage2_scale * c.bandwidth, mid_rate / c.decimation_factor / 2)
            self.stage2.append(design_lowpass(fc, mid_rate, self.num_taps))

    @property
    def total_factors(self):
        return [self.stage1_factor * c.decimation_factor for c in self.channels]

    @property
    def output_periods(self):
        return [f / self.sample_rate for f in self.total_factors]

    def __call__(self, stream):
        """List of per-channel baseband ``ShotRecord``s."""
        mid = _decimated_stream(stream, self.stage1, self.stage1_factor)
        return [extract_channel(mid, cfg, fir, channel_id=i)
                for i, (cfg, fir) in enumerate(zip(self.channels, self.stage2))]

    def edge_samples(self):
        """Conservative count of transient output samples at each edge, per channel."""
        out = []
        for cfg, fir in zip(self.channels, self.stage2):
            first = transient_samples(self.stage1, self.stage1_factor * cfg.decimation_factor)
            out.append(first + transient_samples(fir, cfg.decimation_factor))
        return out


def stopband_attenuation(fir, start, points=4096):
    """Worst-case attenuation (dB) from ``start`` Hz up to Nyquist."""
    freqs = np.linspace(start, fir.sample_rate / 2, points)
    peak = np.max(np.abs(fir.response(freqs)))
    return -20 * np.log10(max(peak, 1e-300))


def attenuation_table(sample_rate=500e6, cutoff=25e6, tap_counts=(31, 63, 127, 255), ratios=(1.5, 2.0, 3.0)):
    """Rows of (num_taps, attenuation at each cutoff ratio)."""
    rows = []
    for ntaps in tap_counts:
        fir = design_lowpass(cutoff, sample_rate, ntaps)
        rows.append((ntaps, *[stopband_attenuation(fir, r * cutoff) for r in ratios]))
    return rows
