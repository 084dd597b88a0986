import json
from dataclasses import replace

import numpy as np
import pytest

from corrtomo import matched_filter as mf
from corrtomo.readout import CavityParams, NoiseParams, cavity_response, generate_shots


def cal_from(a0, a1, sigma, t1, n, rng, period=2e-9):
    noise = NoiseParams(sigma, t1)
    g = generate_shots(a0, a1, np.zeros(n, int), noise, rng, period)
    e = generate_shots(a0, a1, np.ones(n, int), noise, rng, period)
    return mf.CalibrationSet(g, e)


def swinging_traces(duration=1e-6):
    p = CavityParams(detuning=2 * np.pi * 0.6e6)
    return cavity_response(p, 0, duration), cavity_response(p, 1, duration)


def test_calibration_set_validation():
    with pytest.raises(ValueError):
        mf.CalibrationSet(np.zeros((99, 5)), np.zeros((100, 5)))
    with pytest.raises(ValueError):
        mf.CalibrationSet(np.zeros((100, 5)), np.zeros((100, 6)))


def test_kernel_invariants():
    with pytest.raises(ValueError):
        mf.Kernel(np.array([np.nan]), np.zeros(1), 1)
    with pytest.raises(ValueError):
        mf.Kernel(np.ones(3), np.zeros(3), 4)
    with pytest.raises(ValueError):
        mf.Kernel(np.ones(3), np.zeros(3), 3, scale=0.0)


def test_constant_difference_gives_uniform_weights(rng):
    a0 = np.full(50, 1 + 0.5j)
    a1 = np.full(50, -1 - 0.5j)
    k = mf.estimate_kernel(cal_from(a0, a1, 1.0, np.inf, 4000, rng))
    w = k.weights / k.weights.mean()
    assert np.max(np.abs(w - 1)) < 0.1


def test_noiseless_segment_dominates_without_fallback(rng):
    n, length = 2000, 200
    a0, a1 = np.ones(length, complex), -np.ones(length, complex)
    cal = cal_from(a0, a1, 0.0, 1e-6, n, rng)
    # noise on the second half only; the first half varies only through T1 jumps
    for arr in (cal.ground, cal.excited):
        arr[:, length // 2:] += 0.8 * (rng.standard_normal((n, length // 2)) + 1j * rng.standard_normal((n, length // 2)))
    k = mf.estimate_kernel(cal)
    diff = cal.ground.mean(0) - cal.excited.mean(0)
    assert not np.allclose(k.weights, diff.conj())          # no uniform fallback
    assert np.sum(np.abs(k.weights[:length // 2])) > 10 * np.sum(np.abs(k.weights[length // 2:]))


def test_degenerate_calibration_falls_back():
    a0 = np.linspace(0, 1, 20) + 0j
    a1 = -a0
    cal = mf.CalibrationSet(np.tile(a0, (100, 1)), np.tile(a1, (100, 1)))
    k = mf.estimate_kernel(cal)
    np.testing.assert_allclose(k.weights, (a0 - a1).conj())


def test_phase_swinging_signal_rotated_to_real(rng):
    a0, a1 = swinging_traces()
    d = a0 - a1
    phase = np.unwrap(np.angle(d[5:]))
    assert np.ptp(phase) > 0.5                      # genuinely phase-swinging
    cal = cal_from(a0, a1, 2.0, np.inf, 5000, rng)
    k = mf.estimate_kernel(cal)
    sep = k.raw(cal.ground).mean() - k.raw(cal.excited).mean()
    assert abs(sep.imag) < 0.05 * abs(sep.real)


def test_anchor_points(rng):
    a0, a1 = swinging_traces()
    cal = cal_from(a0, a1, 1.0, np.inf, 2000, rng)
    k = mf.estimate_kernel(cal)
    assert mf.apply_kernel(cal.ground.mean(0), k) == pytest.approx(1.0, abs=1e-6)
    assert mf.apply_kernel(cal.excited.mean(0), k) == pytest.approx(-1.0, abs=1e-6)
    assert mf.apply_kernel(k.baseline, k) == pytest.approx(0.0, abs=1e-6)


def test_short_shot_rejected(rng):
    a0, a1 = swinging_traces()
    k = mf.estimate_kernel(cal_from(a0, a1, 1.0, np.inf, 200, rng))
    with pytest.raises(ValueError):
        mf.apply_kernel(a0[:10], k)


def test_window_full_record_for_stationary_noise(rng):
    length = 60
    a0, a1 = np.full(length, 0.2 + 0j), np.full(length, -0.2 + 0j)
    cal = cal_from(a0, a1, 1.0, np.inf, 20000, rng)
    k = mf.estimate_kernel(cal)
    ends, fid = mf.window_fidelities(cal, k)
    assert fid[-1] < 0.95
    assert mf.optimize_window(cal, k) >= length - 3
    # trend: later windows separate better
    assert np.all(np.diff(fid[::10]) > 0)


def test_window_interior_when_t1_short(rng):
    a0, a1 = swinging_traces(2e-6)
    cal = cal_from(a0, a1, 3.0, 0.4e-6, 5000, rng)
    k = mf.estimate_kernel(cal)
    end = mf.optimize_window(cal, k, stride=5)
    assert 50 < end < a0.size - 100


def test_noiseless_window_is_first_informative_sample():
    a0 = np.array([0, 0, 0, 1, 1, 1], dtype=complex)
    a1 = -a0
    cal = mf.CalibrationSet(np.tile(a0, (100, 1)), np.tile(a1, (100, 1)))
    k = mf.estimate_kernel(cal)
    ends, fid = mf.window_fidelities(cal, k)
    assert fid[ends == 4][0] == 1.0
    assert mf.optimize_window(cal, k) == 4


def test_single_shot_fidelity_examples(rng):
    a = rng.standard_normal(50_000)
    assert mf.single_shot_fidelity(a, rng.standard_normal(50_000)) < 0.02
    nu = 0.842
    f = mf.single_shot_fidelity(1 + nu * rng.standard_normal(100_000), -1 + nu * rng.standard_normal(100_000))
    assert f == pytest.approx(0.76, abs=0.01)
    assert mf.single_shot_fidelity([1, 2, 3], [-3, -2]) == 1.0
    with pytest.raises(ValueError):
        mf.single_shot_fidelity([], [1.0])


def test_matched_beats_plain_integration(rng):
    a0, a1 = swinging_traces()
    sigma = 3.0
    cal = cal_from(a0, a1, sigma, np.inf, 10_000, rng)
    k = mf.estimate_kernel(cal)
    test = cal_from(a0, a1, sigma, np.inf, 10_000, rng)
    snr_k = mf.output_snr(k.raw(test.ground), k.raw(test.excited))
    plain = mf.Kernel(np.ones(a0.size, complex), k.baseline, a0.size)
    snr_plain = mf.output_snr(plain.raw(test.ground), plain.raw(test.excited))
    optimum = mf.analytic_snr(a0 - a1, np.full(a0.size, 2 * sigma ** 2))
    assert snr_k >= snr_plain
    assert snr_k == pytest.approx(optimum, rel=0.05)


def test_scale_invariance(rng):
    a0, a1 = swinging_traces()
    cal = cal_from(a0, a1, 1.5, np.inf, 1000, rng)
    k = mf.estimate_kernel(cal)
    k3 = mf.with_window(replace(k, weights=3.7 * k.weights), cal, k.window_end)
    np.testing.assert_allclose(mf.apply_kernel(cal.ground, k3), mf.apply_kernel(cal.ground, k), atol=1e-9)


def test_equal_mixture_mean_is_zero(rng):
    a0, a1 = swinging_traces()
    cal = cal_from(a0, a1, 2.0, 2e-6, 5000, rng)
    k = mf.calibrate(cal, stride=10)
    test = cal_from(a0, a1, 2.0, 2e-6, 5000, rng)
    v = np.concatenate([mf.apply_kernel(test.ground, k), mf.apply_kernel(test.excited, k)])
    assert abs(v.mean()) < 4 * v.std() / np.sqrt(v.size)


def test_kernel_json_round_trip(rng):
    a0, a1 = swinging_traces()
    k = mf.calibrate(cal_from(a0, a1, 1.0, np.inf, 200, rng), stride=25)
    k2 = mf.Kernel.from_dict(json.loads(json.dumps(k.to_dict())))
    np.testing.assert_array_equal(k2.weights, k.weights)
    np.testing.assert_array_equal(k2.baseline, k.baseline)
    assert (k2.window_end, k2.scale, k2.offset) == (k.window_end, k.scale, k.offset)


def test_saturated_fidelity_keeps_full_window(rng):
    # separation is perfect well before the end; the window must not stop there
    a0, a1 = swinging_traces()
    cal = cal_from(a0, a1, 3.0, np.inf, 2000, rng)
    k = mf.estimate_kernel(cal)
    ends, fid = mf.window_fidelities(cal, k)
    assert fid[ends.size // 2] == 1.0
    assert mf.optimize_window(cal, k) >= a0.size - 5
