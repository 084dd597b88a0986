"""Acceptance criteria, one test (and one summary line) per criterion.

Run ``pytest tests/test_acceptance.py`` and read the "acceptance criteria"
section at the end of the output.
"""

import time

import numpy as np
import pytest

from corrtomo import estimation as est
from corrtomo import matched_filter as mf
from corrtomo import quantum as qc
from corrtomo import scenarios as sc
from corrtomo import simulate as sim
from corrtomo import tomography as tm
from corrtomo.channelizer import ChannelConfig, Channelizer
from corrtomo.readout import (CavityParams, MultiplexedStream, NoiseParams, cavity_response,
                              generate_shots)

from conftest import random_density, random_unitary

pytestmark = pytest.mark.acceptance

PUBLISHED_CORR = (2.35, 2.85, 3.39, 4.02)
IDEAL_OPS = [tm.MeasurementOperator.from_terms({"ZI": 1.0}, 2, (0,)),
             tm.MeasurementOperator.from_terms({"IZ": 1.0}, 2, (1,)),
             tm.MeasurementOperator.from_terms({"ZZ": 1.0}, 2, (0, 1))]


def config(tmp_path, scenario, **sections):
    return sc.ScenarioConfig.from_dict({"scenario": scenario, "seed": 20240607,
                                        "output_dir": str(tmp_path), **sections})


def test_c1_crossover_solver(criterion):
    t0 = time.perf_counter()
    snr, f = est.crossover_snr()
    dt = time.perf_counter() - t0
    ok = abs(snr - 1.41) <= 0.01 and abs(f - 0.76) <= 0.005 and dt < 1
    assert criterion(1, ok, f"SNR={snr:.4f} (1.41+-0.01)  F={f:.4f} (0.76+-0.005)  {dt * 1e3:.1f} ms")


def test_c2_variance_sweep(criterion):
    snrs = np.geomspace(0.25, 8, 20)
    t0 = time.perf_counter()
    table = sc.sweep_crossover(snrs, shots=10_000, reps=100, seed=2)
    dt = time.perf_counter() - t0
    nu = 1 / np.sqrt(snrs)
    err_soft = np.max(np.abs(table[:, 1] / est.predicted_soft_variance(0, nu ** 2) - 1))
    err_th = np.max(np.abs(table[:, 2] / est.predicted_threshold_variance(0, nu) - 1))
    cross = sc.curve_crossing(snrs, table[:, 1], table[:, 2])
    ok = err_soft < 0.05 and err_th < 0.05 and 1.3 <= cross <= 1.55 and dt < 120
    assert criterion(2, ok, f"max rel err soft={err_soft:.2%} thresh={err_th:.2%} (<5%)  "
                            f"crossing SNR={cross:.3f} [1.3,1.55]  {dt:.1f} s")


@pytest.mark.xfail(strict=True, reason="exact products of the tabulated variances round to "
                                       "2.84, 3.38, 4.03 in three columns")
def test_c3a_table_rounding(criterion):
    got = [round(est.goodman_variance(col, [1, 1]), 2) for col in sim.DEFAULT_NU2.T]
    ok = tuple(got) == PUBLISHED_CORR
    assert criterion("3a", ok, f"rounded {got} vs {list(PUBLISHED_CORR)}")


def test_c3b_empirical_product_variance(criterion, tmp_path):
    rep = sc.run_scenario(config(tmp_path, "corr-variance", shots={"corr": 200_000}))
    rel = [abs(rep.metrics[f"nu2_corr_empirical_{b}"] / rep.metrics[f"nu2_corr_{b}"] - 1)
           for b in sc.BASIS_LABELS]
    ok = max(rel) < 0.05
    assert criterion("3b", ok, f"empirical vs exact product variance, max rel err {max(rel):.2%} (<5%)")


def test_c4_averaging_cost(criterion, tmp_path):
    rep = sc.run_scenario(config(tmp_path, "corr-variance", shots={"corr": 200_000}))
    ratio = rep.metrics["averaging_ratio_00"]
    assert criterion(4, 4.5 <= ratio <= 6.5, f"nu_corr^2/nu_1^2 for |00> = {ratio:.3f} [4.5,6.5]")


def test_c5_matched_filter(criterion):
    rng = np.random.default_rng(5)
    p = CavityParams(detuning=2 * np.pi * 0.6e6)
    a0, a1 = cavity_response(p, 0, 1e-6), cavity_response(p, 1, 1e-6)
    sigma = 3.0
    noise = NoiseParams(sigma, np.inf)

    def shots(n):
        return (generate_shots(a0, a1, np.zeros(n, int), noise, rng, p.sample_period),
                generate_shots(a0, a1, np.ones(n, int), noise, rng, p.sample_period))

    t0 = time.perf_counter()
    kernel = mf.estimate_kernel(mf.CalibrationSet(*shots(10_000)))
    dt = time.perf_counter() - t0
    g, e = shots(10_000)
    swing = np.ptp(np.unwrap(np.angle((a0 - a1)[5:])))
    snr_k = mf.output_snr(kernel.raw(g), kernel.raw(e))
    plain = mf.Kernel(np.ones(a0.size, complex), kernel.baseline, a0.size)
    snr_plain = mf.output_snr(plain.raw(g), plain.raw(e))
    optimum = mf.analytic_snr(a0 - a1, np.full(a0.size, 2 * sigma ** 2))
    v = np.concatenate([mf.apply_kernel(g, kernel), mf.apply_kernel(e, kernel)])
    z = abs(v.mean()) / (v.std(ddof=1) / np.sqrt(v.size))
    ok = (snr_k >= snr_plain and abs(snr_k / optimum - 1) < 0.05 and z < 4 and dt < 60 and swing > 0.5)
    assert criterion(5, ok, f"phase swing {swing:.2f} rad; SNR kernel={snr_k:.2f} plain={snr_plain:.2f} "
                            f"optimum={optimum:.2f} ({snr_k / optimum - 1:+.2%}); mixture mean z={z:.2f}; "
                            f"calibration {dt:.1f} s")


def test_c6_channelizer(criterion):
    errors, _ = sc.channelizer_round_trip(bits=16, seed=6)
    again, _ = sc.channelizer_round_trip(bits=16, seed=6)
    _, xtalk = sc.channelizer_round_trip(ifs=(10e6, 16e6), bandwidth=3e6, bits=16, seed=6)
    rng = np.random.default_rng(0)
    stream = MultiplexedStream(rng.standard_normal((8, 4000)), 500e6, 16, [10e6, 20e6])
    chz = Channelizer(500e6, [ChannelConfig(10e6, 3e6, 4), ChannelConfig(20e6, 3e6, 4)])
    first = [r.samples.copy() for r in chz(stream)]
    deterministic = errors == again and all(np.array_equal(a, b.samples) for a, b in zip(first, chz(stream)))
    ok = max(errors) < 0.01 and xtalk >= 40 and deterministic
    assert criterion(6, ok, f"RMS error {max(errors):.3%} (<1%)  crosstalk at 2x bandwidth {xtalk:.1f} dB "
                            f"(>=40)  deterministic={deterministic}")


def test_c7_measurement_tomography(criterion):
    vm = sim.ValueModel.defaults()
    ops = sim.measurement_operators(sim.basis_state_values(vm, 100_000, 7))
    worst = 0.0
    for op in ops:
        truth = vm.true_operator(op.channels).pauli_coefficients
        worst = max(worst, float(np.max(np.abs(op.pauli_coefficients - truth) / op.stderr)))
    m1 = ops[0]
    detail = " ".join(f"{m1.coefficient(l):+.4f}({m1.stderr[m1.labels.index(l)] * 1e4:.0f}){l}"
                      for l in ("ZI", "IZ", "ZZ"))
    assert criterion(7, worst < 4, f"max |coef - injected|/SE = {worst:.2f} (<4)  M1 = {detail}")


@pytest.mark.slow
def test_c8_end_to_end_state_tomography(criterion, tmp_path):
    cfg = config(tmp_path, "state-tomo", shots={"per_config": 50_000, "calibration": 10_000},
                 tomography={"sampler": "records"})
    t0 = time.perf_counter()
    rep = sc.run_scenario(cfg)
    dt = time.perf_counter() - t0
    f, z = rep.metrics["fidelity"], rep.metrics["max_weight_one_z"]
    ok = f >= 0.98 and z < 4 and dt < 600
    assert criterion(8, ok, f"records pipeline F={f:.4f} (>=0.98)  max weight-one |P|/SE={z:.2f} (<4)  "
                            f"{dt:.0f} s")


def test_c9_process_tomography(criterion, tmp_path):
    rep = sc.run_scenario(config(tmp_path / "noisy", "process-tomo", shots={"per_config": 50_000}))
    ideal = sc.run_scenario(config(tmp_path / "ideal", "process-tomo", tomography={"noiseless": True}))
    f, f0 = rep.metrics["average_gate_fidelity"], ideal.metrics["average_gate_fidelity"]
    ok = f >= 0.99 and abs(f0 - 1) <= 1e-8
    assert criterion(9, ok, f"F_avg={f:.4f} (>=0.99)  noiseless |F_avg-1|={abs(f0 - 1):.1e} (<=1e-8)")


def test_c10_gls_and_predictor_oracles(criterion):
    rng = np.random.default_rng(10)
    p = tm.build_state_predictor(IDEAL_OPS)
    a = p.matrix
    m = (a @ qc.vec(random_density(rng, 4))).real + 0.01 * rng.standard_normal(a.shape[0])
    gls_err = np.max(np.abs(tm.gls_solve(a, np.full(a.shape[0], 0.25), m).x - np.linalg.pinv(a) @ m))

    state_err = 0.0
    for _ in range(100):
        rho = random_density(rng, 4)
        oracle = [np.trace(tm.rotated_observable(IDEAL_OPS[k], s) @ rho) for s, k in p.labels[:-1]]
        state_err = max(state_err, np.max(np.abs(a[:-1] @ qc.vec(rho) - oracle)))

    pp = tm.build_process_predictor(IDEAL_OPS)
    rows = [i for i, lab in enumerate(pp.labels) if lab[-1] != tm.TRACE]
    proc_err = 0.0
    for _ in range(100):
        # random mixed-unitary channel
        us = [random_unitary(rng, 4) for _ in range(3)]
        w = rng.dirichlet(np.ones(3))
        e = sum(wi * qc.liouville_of_unitary(u) for wi, u in zip(w, us))
        pred = pp.matrix[rows] @ e.reshape(-1, order="F")
        pick = rng.choice(len(rows), 64, replace=False)
        for j in pick:
            prep, s, k = pp.labels[rows[j]]
            rho = qc.prep_state(prep)
            out = sum(wi * u @ rho @ u.conj().T for wi, u in zip(w, us))
            proc_err = max(proc_err, abs(pred[j] - np.trace(tm.rotated_observable(IDEAL_OPS[k], s) @ out)))
    ok = gls_err <= 1e-10 and state_err <= 1e-12 and proc_err <= 1e-12
    assert criterion(10, ok, f"GLS vs pseudo-inverse {gls_err:.1e} (<=1e-10)  row oracle states "
                             f"{state_err:.1e} processes {proc_err:.1e} (<=1e-12)")
