import numpy as np
import pytest

from corrtomo import readout as ro


def params(**kw):
    return ro.CavityParams(**kw)


def test_zero_drive_gives_zero_response():
    p = params(drive_envelope=ro.rectangular_envelope(0))
    np.testing.assert_array_equal(ro.cavity_response(p, 0, 1e-6), 0)


@pytest.mark.parametrize("state", [0, 1])
def test_steady_state(state):
    p = params(detuning=2 * np.pi * 0.3e6)
    drive = abs(complex(p.kappa / 2, p.chi))
    # the amplitude transient decays as exp(-kappa t / 2); 30/kappa leaves < 1e-6
    duration = 30 / p.kappa
    alpha = ro.cavity_response(p, state, duration)
    sign = 1 if state == 0 else -1
    expected = drive / (p.kappa / 2 + 1j * (p.detuning + sign * p.chi))
    assert abs(alpha[-1] - expected) < 1e-6


def test_default_drive_gives_unit_steady_state():
    p = params()
    assert abs(p.steady_state(0, abs(complex(p.kappa / 2, p.chi)))) == pytest.approx(1.0)
    assert p.bandwidth_hz == pytest.approx(3e6)


def test_chi_zero_removes_state_information():
    p = params(chi=0.0)
    np.testing.assert_array_equal(ro.cavity_response(p, 0, 2e-6), ro.cavity_response(p, 1, 2e-6))


def test_rk4_against_analytic_transient():
    p = params()
    alpha = ro.cavity_response(p, 0, 2e-6)
    t = np.arange(alpha.size) * p.sample_period
    rate = p.rate(0)
    drive = abs(complex(p.kappa / 2, p.chi))
    exact = drive / -rate * (1 - np.exp(rate * t))
    np.testing.assert_allclose(alpha, exact, atol=1e-9)


def test_cavity_response_errors():
    p = params(drive_envelope=lambda t: np.full(np.shape(t), np.nan))
    with pytest.raises(ValueError):
        ro.cavity_response(p, 0, 1e-6)
    with pytest.raises(ValueError):
        ro.cavity_response(params(), 2, 1e-6)
    with pytest.raises(ValueError):
        ro.cavity_response(params(), 0, 1e-10)
    with pytest.raises(ValueError):
        ro.CavityParams(kappa=0)


def traces():
    p = params()
    return ro.cavity_response(p, 0, 2e-6), ro.cavity_response(p, 1, 2e-6)


def test_noiseless_shots_equal_traces():
    a0, a1 = traces()
    noise = ro.NoiseParams(0.0)
    np.testing.assert_array_equal(ro.generate_shot(a0, a1, 0, noise, 1).samples, a0)
    np.testing.assert_array_equal(ro.generate_shot(a0, a1, 1, noise, 1).samples, a1)


def test_generate_shot_deterministic():
    a0, a1 = traces()
    noise = ro.NoiseParams(0.5, 1e-6)
    s1 = ro.generate_shot(a0, a1, 1, noise, 99).samples
    s2 = ro.generate_shot(a0, a1, 1, noise, 99).samples
    np.testing.assert_array_equal(s1, s2)
    assert not np.array_equal(s1, ro.generate_shot(a0, a1, 1, noise, 100).samples)


def test_mismatched_traces_rejected():
    a0, a1 = traces()
    with pytest.raises(ValueError):
        ro.generate_shot(a0, a1[:-1], 0, ro.NoiseParams(), 0)


def test_survival_fraction_follows_exponential(rng):
    a0, a1 = traces()
    t1 = 3e-6
    n = 10_000
    shots = ro.generate_shots(a0, a1, np.ones(n, int), ro.NoiseParams(0.0, t1), rng)
    survived = np.mean(shots[:, -1] == a1[-1])
    duration = (a0.size - 1) * 2e-9
    p = np.exp(-duration / t1)
    assert abs(survived - p) < 3 * np.sqrt(p * (1 - p) / n)


def test_excited_ensemble_mean(rng):
    a0, a1 = traces()
    t1 = 2e-6
    n = 10_000
    sigma = 0.3
    shots = ro.generate_shots(a0, a1, np.ones(n, int), ro.NoiseParams(sigma, t1), rng)
    t = np.arange(a0.size) * 2e-9
    survive = np.exp(-t / t1)
    expected = a1 * survive + a0 * (1 - survive)
    # per-sample standard error: noise plus jump mixture
    se = np.sqrt(2 * sigma ** 2 + np.abs(a1 - a0) ** 2 * survive * (1 - survive)) / np.sqrt(n)
    assert np.max(np.abs(shots.mean(axis=0) - expected) / se) < 5
    assert np.mean(np.abs(shots.mean(axis=0) - expected) / se < 3) > 0.99


def test_noise_statistics(rng):
    a0, a1 = traces()
    shots = ro.generate_shots(a0, a1, np.zeros(4000, int), ro.NoiseParams(0.7), rng)
    resid = shots - a0
    assert resid.real.std() == pytest.approx(0.7, rel=0.01)
    assert resid.imag.std() == pytest.approx(0.7, rel=0.01)


def test_shot_record_invariants():
    with pytest.raises(ValueError):
        ro.ShotRecord(np.array([]), 1e-9)
    with pytest.raises(ValueError):
        ro.ShotRecord(np.array([1, np.inf]), 1e-9)
    with pytest.raises(ValueError):
        ro.NoiseParams(-1)
    with pytest.raises(ValueError):
        ro.NoiseParams(1, 0)


def test_single_channel_cosine():
    cfg = ro.StreamConfig(500e6, 12, 2.0)
    s = ro.synthesize_multiplexed([np.ones(1000)], [10e6], cfg)
    n = np.arange(1000)
    lsb = 2 * cfg.full_scale / 2 ** cfg.quantization_bits
    assert np.max(np.abs(s.samples[0] - np.cos(2 * np.pi * 10e6 * n / 500e6))) <= lsb


def test_two_channel_spectrum_peaks():
    cfg = ro.StreamConfig(500e6, 16, 4.0)
    s = ro.synthesize_multiplexed([np.ones(5000), 0.5 * np.ones(5000)], [10e6, 20e6], cfg)
    spec = np.abs(np.fft.rfft(s.samples[0]))
    freqs = np.fft.rfftfreq(5000, 1 / 500e6)
    # everything else (quantization spurs) sits > 80 dB below the tones
    peaks = freqs[spec > 1e-4 * spec.max()]
    assert set(np.round(peaks / 1e6)) == {10.0, 20.0}


def test_quantization_error_scales_with_bits(rng):
    x = rng.uniform(-0.4, 0.4, 200_000)
    errs = {}
    for bits in (8, 16):
        q, _ = ro.quantize(x, bits, 1.0)
        errs[bits] = np.sqrt(np.mean((q - x) ** 2))
    assert errs[8] / errs[16] == pytest.approx(2 ** 8, rel=0.2)


def test_clipping_reported():
    cfg = ro.StreamConfig(500e6, 8, 0.5)
    with pytest.raises(ro.ClippingError):
        ro.synthesize_multiplexed([np.ones(100)], [10e6], cfg)
    counted = ro.synthesize_multiplexed([np.ones(100)], [10e6], ro.StreamConfig(500e6, 8, 0.5, "count"))
    assert counted.clipped > 0


def test_overlapping_bands_rejected():
    with pytest.raises(ValueError):
        ro.synthesize_multiplexed([np.ones(10), np.ones(10)], [10e6, 12e6], ro.StreamConfig(), 3e6)


def test_stream_config_validation():
    with pytest.raises(ValueError):
        ro.StreamConfig(quantization_bits=4)
    with pytest.raises(ValueError):
        ro.StreamConfig(on_clip="ignore")


def test_upsampled_synthesis_matches_direct():
    t = np.arange(500) * 2e-9
    x = np.exp(1j * 2 * np.pi * 0.5e6 * t)
    cfg = ro.StreamConfig(1e9, 16, 2.0)
    s = ro.synthesize_multiplexed([x], [50e6], cfg, record_rate=500e6)
    n = np.arange(1000)
    direct = np.cos(2 * np.pi * 50e6 * n / 1e9 + 2 * np.pi * 0.5e6 * n / 1e9)
    interior = slice(100, 900)
    assert np.max(np.abs(s.samples[0][interior] - direct[interior])) < 1e-2
