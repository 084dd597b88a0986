"""Reproducible scenario runner.

A scenario is described by a JSON config (versioned schema, unknown keys
rejected) and produces files in an output directory plus a ``RunReport``
with a stable config hash and a flat metrics map.
"""

import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import estimation as est
from . import io
from . import quantum as qc
from . import simulate as sim
from . import tomography as tm
from ._accel import set_threads
from .channelizer import ChannelConfig, Channelizer
from .matched_filter import CalibrationSet, apply_kernel, calibrate, output_snr, single_shot_fidelity
from .readout import (CavityParams, NoiseParams, StreamConfig, cavity_response, generate_shots,
                      synthesize_multiplexed)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SCENARIOS = ("crossover-sweep", "corr-variance", "calibrate", "state-tomo", "process-tomo",
             "channelizer-bench", "channelize")
# fields that do not change results
NON_SEMANTIC = ("output_dir", "threads")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


# -- schema ------------------------------------------------------------------

@dataclass
class PhysicsConfig:
    kappa: float = 2 * np.pi * 1e6
    chi: float = 2 * np.pi * 1e6
    detuning: float = 0.0
    t1: float = 20e-6
    sigma: float = 12.0
    if_freqs: List[float] = field(default_factory=lambda: [10e6, 20e6])
    sample_rate: float = 500e6
    record_rate: float = 500e6
    quantization_bits: int = 8
    duration: float = 2e-6
    num_taps: int = 127
    stage1_factor: int = 5
    stage2_factor: int = 4
    # filtered variance per channel (rows) and basis state (columns)
    nu2: List[List[float]] = field(default_factory=lambda: sim.DEFAULT_NU2.tolist())


@dataclass
class EstimatorSection:
    mode: str = "soft"
    threshold: float = 0.0


@dataclass
class ShotsConfig:
    per_config: int = 50000
    basis: int = 100000
    calibration: int = 10000
    reps: int = 100
    corr: int = 100000


@dataclass
class SweepConfig:
    snr_min: float = 0.25
    snr_max: float = 8.0
    points: int = 20
    mean_sz: float = 0.0


@dataclass
class TomographyConfig:
    sampler: str = "values"        # "values" | "records"
    noiseless: bool = False
    save_values: bool = False
    manifest: Optional[str] = None


@dataclass
class ScenarioConfig:
    scenario: str = "crossover-sweep"
    seed: Optional[int] = None
    output_dir: str = "out"
    threads: int = 0
    schema_version: int = SCHEMA_VERSION
    input: Optional[str] = None
    channels: List[str] = field(default_factory=list)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    estimator: EstimatorSection = field(default_factory=EstimatorSection)
    shots: ShotsConfig = field(default_factory=ShotsConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    tomography: TomographyConfig = field(default_factory=TomographyConfig)

    # ---- construction --------------------------------------------------
    @classmethod
    def from_dict(cls, data):
        cfg = _build(cls, data, "")
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self):
        return dataclasses.asdict(self)

    def replace(self, **changes):
        d = self.to_dict()
        for key, value in changes.items():
            node = d
            parts = key.split(".")
            for p in parts[:-1]:
                node = node[p]
            node[parts[-1]] = value
        return ScenarioConfig.from_dict(d)

    def config_hash(self):
        d = self.to_dict()
        for k in NON_SEMANTIC:
            d.pop(k, None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # ---- validation ----------------------------------------------------
    def validate(self):
        def need(cond, path, msg):
            if not cond:
                raise ConfigError(path, msg)

        need(self.schema_version == SCHEMA_VERSION, "schema_version",
             f"unsupported version {self.schema_version}, expected {SCHEMA_VERSION}")
        need(self.scenario in SCENARIOS, "scenario",
             f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        need(self.seed is not None, "seed", "a seed is mandatory")
        need(isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64, "seed", "must be an unsigned 64-bit integer")
        need(self.threads >= 0, "threads", "must be >= 0")

        ph = self.physics
        need(ph.kappa > 0, "physics.kappa", "must be positive")
        need(ph.chi >= 0, "physics.chi", "must be >= 0")
        need(ph.t1 > 0, "physics.t1", "must be positive")
        need(ph.sigma >= 0, "physics.sigma", "must be >= 0")
        need(len(ph.if_freqs) >= 1, "physics.if_freqs", "need at least one IF")
        need(8 <= ph.quantization_bits <= 16, "physics.quantization_bits", "must be in 8..16")
        need(ph.duration > 0, "physics.duration", "must be positive")
        need(ph.num_taps >= 11 and ph.num_taps % 2 == 1, "physics.num_taps", "must be odd and >= 11")
        need(ph.stage1_factor >= 1, "physics.stage1_factor", "must be >= 1")
        need(ph.stage2_factor >= 1, "physics.stage2_factor", "must be >= 1")
        need(ph.record_rate > 0, "physics.record_rate", "must be positive")
        ratio = ph.sample_rate / ph.record_rate
        need(abs(ratio - round(ratio)) < 1e-9 and round(ratio) >= 1, "physics.record_rate",
             "sample_rate must be an integer multiple of record_rate")
        bw = (2 * ph.chi + ph.kappa) / (2 * np.pi)
        need(ph.sample_rate > 2 * (max(abs(f) for f in ph.if_freqs) + bw), "physics.sample_rate",
             "too low for the highest IF channel")
        nu2 = np.asarray(ph.nu2, dtype=float)
        need(nu2.ndim == 2 and np.all(nu2 > 0), "physics.nu2", "must be a 2-D array of positive variances")

        need(self.estimator.mode in ("soft", "threshold"), "estimator.mode", "must be 'soft' or 'threshold'")
        for name in ("per_config", "basis", "calibration", "corr"):
            need(getattr(self.shots, name) >= 1, f"shots.{name}", "must be >= 1")
        need(self.shots.reps >= 2, "shots.reps", "must be >= 2")
        need(self.shots.calibration >= 100 or self.scenario not in ("calibrate", "state-tomo", "process-tomo"),
             "shots.calibration", "need at least 100 calibration shots per state")

        sw = self.sweep
        need(sw.snr_min > 0, "sweep.snr_min", "must be positive")
        need(sw.snr_max > sw.snr_min, "sweep.snr_max", "must exceed snr_min")
        need(sw.points >= 2, "sweep.points", "must be >= 2")
        need(-1 <= sw.mean_sz <= 1, "sweep.mean_sz", "must lie in [-1, 1]")

        tomo = self.tomography
        need(tomo.sampler in ("values", "records"), "tomography.sampler", "must be 'values' or 'records'")
        if self.scenario in ("state-tomo", "process-tomo") and tomo.sampler == "values":
            need(nu2.shape == (2, 4), "physics.nu2", "value sampler needs a 2x4 array (two qubits)")
        if self.scenario in ("state-tomo", "process-tomo") and tomo.sampler == "records":
            need(len(ph.if_freqs) == 2, "physics.if_freqs", "two-qubit tomography needs two channels")
            need(nu2.shape[0] == 2, "physics.nu2", "need one row per channel")
        if self.scenario == "process-tomo":
            need(tomo.manifest is None, "tomography.manifest", "only supported for state-tomo")
        for i, spec in enumerate(self.channels):
            try:
                ChannelConfig.parse(spec)
            except ValueError as exc:
                raise ConfigError(f"channels[{i}]", str(exc)) from None
        if self.scenario == "channelize" and self.input is not None:
            need(len(self.channels) >= 1, "channels", "channelize needs at least one --channel spec")


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(path or "<root>", "expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(where, "unknown field")
    kwargs = {}
    for name, value in data.items():
        fpath = f"{path}.{name}" if path else name
        sub = _SECTIONS.get((cls, name))
        if sub is not None:
            kwargs[name] = _build(sub, value, fpath)
        else:
            kwargs[name] = _coerce(fields[name], value, fpath)
    return cls(**kwargs)


def _coerce(f, value, path):
    default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
    if value is None:
        if default is None:
            return None
        raise ConfigError(path, "may not be null")
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, "expected a boolean")
        return value
    if isinstance(default, int) or f.name == "seed":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, "expected an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, "expected a number")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(path, "expected a list")
        return value
    if isinstance(default, str) or default is None:
        if not isinstance(value, str):
            raise ConfigError(path, "expected a string")
        return value
    return value


_SECTIONS = {
    (ScenarioConfig, "physics"): PhysicsConfig,
    (ScenarioConfig, "estimator"): EstimatorSection,
    (ScenarioConfig, "shots"): ShotsConfig,
    (ScenarioConfig, "sweep"): SweepConfig,
    (ScenarioConfig, "tomography"): TomographyConfig,
}


# -- report ------------------------------------------------------------------

@dataclass
class RunReport:
    scenario: str
    wall_time: float
    config_hash: str
    outputs: List[str]
    metrics: dict

    def to_dict(self):
        return dataclasses.asdict(self)

    def table(self):
        """Aligned two-column metrics table."""
        rows = [("scenario", self.scenario), ("config_hash", self.config_hash[:16]),
                ("wall_time_s", f"{self.wall_time:.3f}")]
        rows += [(k, _fmt(v)) for k, v in sorted(self.metrics.items())]
        rows += [("output", o) for o in self.outputs]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


class _Outputs:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files = []

    def path(self, name):
        self.files.append(name)
        return self.root / name


def run_scenario(config):
    """Execute ``config.scenario``; returns a ``RunReport`` and writes
    ``report.json`` next to the other outputs."""
    if not isinstance(config, ScenarioConfig):
        config = ScenarioConfig.from_dict(config)
    else:
        config.validate()
    set_threads(config.threads)
    runner = _RUNNERS[config.scenario]
    out = _Outputs(config.output_dir)
    t0 = time.perf_counter()
    metrics = runner(config, out)
    wall = time.perf_counter() - t0
    report = RunReport(config.scenario, wall, config.config_hash(), list(out.files),
                       {k: _plain(v) for k, v in metrics.items()})
    io.save_json(report.to_dict(), out.root / "report.json")
    return report


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


# -- crossover sweep -----------------------------------------------------------

def sweep_crossover(snrs, shots, reps, seed, mean_sz=0.0):
    """Monte-Carlo comparison of soft averaging and corrected thresholding.

    Variances are per-shot (multiply by ``1/shots`` for the variance of one
    estimate): ``*_var`` averages each repetition's own variance estimate,
    ``*_mse`` is ``shots`` times the mean squared error over repetitions.
    """
    rows = []
    p_up = (1 + mean_sz) / 2
    for i, snr in enumerate(snrs):
        rng = sim.derived_rng(seed, 1, i)
        nu = 1 / np.sqrt(snr)
        f = float(est.gaussian_fidelity(nu))
        outcome = np.where(rng.random((reps, shots)) < p_up, 1.0, -1.0)
        values = outcome + nu * rng.standard_normal((reps, shots))
        soft_mean = values.mean(axis=1)
        soft_var = values.var(axis=1, ddof=1)
        raw = (np.count_nonzero(values > 0, axis=1) - np.count_nonzero(values < 0, axis=1)) / shots
        th_mean = raw / f
        th_var = (1 - raw ** 2) / f ** 2
        rows.append((snr, float(soft_var.mean()), float(th_var.mean()),
                     float(shots * np.mean((soft_mean - mean_sz) ** 2)),
                     float(shots * np.mean((th_mean - mean_sz) ** 2))))
    return np.array(rows)


def curve_crossing(snr, a, b):
    """SNR where ``a - b`` changes sign (log-linear interpolation), or nan."""
    g = np.asarray(a) - np.asarray(b)
    idx = np.nonzero(np.sign(g[:-1]) != np.sign(g[1:]))[0]
    if idx.size == 0:
        return float("nan")
    i = idx[0]
    x0, x1 = np.log(snr[i]), np.log(snr[i + 1])
    return float(np.exp(x0 + (x1 - x0) * g[i] / (g[i] - g[i + 1])))


def _run_crossover(cfg, out):
    sw = cfg.sweep
    snrs = np.geomspace(sw.snr_min, sw.snr_max, sw.points)
    table = sweep_crossover(snrs, cfg.shots.per_config, cfg.shots.reps, cfg.seed, sw.mean_sz)
    with open(out.path("crossover.csv"), "w") as fh:
        fh.write("snr,soft_var,thresh_var,soft_mse,thresh_mse\n")
        for row in table:
            fh.write(",".join(f"{v:.10g}" for v in row) + "\n")
    snr_x, f_x = est.crossover_snr()
    nu = 1 / np.sqrt(snrs)
    pred_soft = est.predicted_soft_variance(sw.mean_sz, nu ** 2)
    pred_th = est.predicted_threshold_variance(sw.mean_sz, nu)
    return {
        "crossover_snr_mc": curve_crossing(snrs, table[:, 1], table[:, 2]),
        "crossover_snr_analytic": snr_x,
        "crossover_fidelity": f_x,
        "max_rel_err_soft": float(np.max(np.abs(table[:, 1] / pred_soft - 1))),
        "max_rel_err_thresh": float(np.max(np.abs(table[:, 2] / pred_th - 1))),
    }


# -- correlation variance ------------------------------------------------------

BASIS_LABELS = ("00", "01", "10", "11")


def _run_corr_variance(cfg, out):
    nu2 = np.asarray(cfg.physics.nu2, dtype=float)
    n_ch, n_states = nu2.shape
    labels = [format(b, f"0{n_ch}b") for b in range(n_states)] if n_states == 2 ** n_ch \
        else [str(b) for b in range(n_states)]
    shots = cfg.shots.corr
    metrics = {}
    with open(out.path("corr_variance.csv"), "w") as fh:
        cols = [f"nu2_{c + 1}" for c in range(n_ch)]
        fh.write(",".join(["state"] + cols + ["nu2_corr", "nu2_corr_empirical", "ratio_to_nu2_1"]) + "\n")
        for b in range(n_states):
            rng = sim.derived_rng(cfg.seed, 2, b)
            chans = [1.0 + np.sqrt(nu2[c, b]) * rng.standard_normal(shots) for c in range(n_ch)]
            products, _ = est.correlate(chans)
            predicted = est.goodman_variance(nu2[:, b], np.ones(n_ch))
            empirical = float(products.var(ddof=1))
            ratio = empirical / float(chans[0].var(ddof=1))
            fh.write(",".join([labels[b]] + [f"{v:.6g}" for v in nu2[:, b]]
                              + [f"{predicted:.6g}", f"{empirical:.6g}", f"{ratio:.6g}"]) + "\n")
            metrics[f"nu2_corr_{labels[b]}"] = predicted
            metrics[f"nu2_corr_empirical_{labels[b]}"] = empirical
            metrics[f"averaging_ratio_{labels[b]}"] = ratio
    return metrics


# -- calibrate -------------------------------------------------------------------

def _cavity(ph):
    return CavityParams(ph.kappa, ph.chi, ph.detuning, None, 1 / ph.record_rate)


def simulate_calibration(cfg):
    """Baseband ground/excited records for one readout channel."""
    ph = cfg.physics
    cav = _cavity(ph)
    a0 = cavity_response(cav, 0, ph.duration)
    a1 = cavity_response(cav, 1, ph.duration)
    noise = NoiseParams(ph.sigma, ph.t1)
    n = cfg.shots.calibration
    g = generate_shots(a0, a1, np.zeros(n, int), noise, sim.derived_rng(cfg.seed, 3, 0), cav.sample_period)
    e = generate_shots(a0, a1, np.ones(n, int), noise, sim.derived_rng(cfg.seed, 3, 1), cav.sample_period)
    return CalibrationSet(g, e), cav.sample_period


def _run_calibrate(cfg, out):
    if cfg.input is not None:
        recs = io.load_records(cfg.input)
        if recs.channels != 2:
            raise ConfigError("input", "calibration file needs 2 channels (ground, excited)")
        cal = CalibrationSet(recs.channel(0), recs.channel(1))
    else:
        cal, _ = simulate_calibration(cfg)
        io.persist_records(np.stack([cal.ground, cal.excited], axis=1), out.path("calibration.ctr"),
                           cfg.physics.record_rate)
    kernel = calibrate(cal)
    io.save_json(kernel.to_dict(), out.path("kernel.json"))
    v0, v1 = apply_kernel(cal.ground, kernel), apply_kernel(cal.excited, kernel)
    thr = cfg.estimator.threshold
    # bias factor for thresholded estimates: 1 - p(below | ground) - p(above | excited)
    bias = 1 - np.mean(v0 < thr) - np.mean(v1 > thr)
    return {
        "threshold_bias_factor": float(bias),
        "window_end": kernel.window_end,
        "single_shot_fidelity": single_shot_fidelity(v0, v1),
        "output_snr": output_snr(kernel.raw(cal.ground), kernel.raw(cal.excited)),
        "nu2_ground": float(v0.var(ddof=1)),
        "nu2_excited": float(v1.var(ddof=1)),
    }


# -- tomography -------------------------------------------------------------------

def build_sampler(cfg):
    """Filtered-value sampler for two-qubit tomography."""
    ph = cfg.physics
    if cfg.tomography.sampler == "values":
        return sim.ValueModel([tm.MeasurementOperator.from_terms(sim.DEFAULT_M1, 2, (0,)),
                               tm.MeasurementOperator.from_terms(sim.DEFAULT_M2, 2, (1,))], ph.nu2)
    chans = [sim.ReadoutChannel(_cavity(ph), NoiseParams(ph.sigma, ph.t1), f) for f in ph.if_freqs]
    full_scale = 7.0 * ph.sigma * np.sqrt(len(chans)) + 4.0
    stream = StreamConfig(ph.sample_rate, ph.quantization_bits, full_scale, "count")
    chain = sim.ReadoutChain(chans, ph.duration, stream, ph.stage1_factor, ph.stage2_factor, ph.num_taps)
    # drive strength set so the ground-state filtered variance matches nu2[:, 0]
    chain.tune_drive(np.asarray(ph.nu2)[:, 0], sim.derived_rng(cfg.seed, 4, 0))
    chain.calibrate(cfg.shots.calibration, sim.derived_rng(cfg.seed, 4, 1))
    return chain


PULSE_NAMES = qc.TOMOGRAPHY_PULSES


def _write_values(out, name, values):
    io.persist_records(np.asarray(values, dtype=np.complex64)[:, :, None], out.path(name), 1.0)


def _manifest_entry(prep, setting, channels, record_file=None, role="tomography"):
    return {"role": role,
            "prep": [PULSE_NAMES[i] for i in prep] if prep is not None else None,
            "rotation": [PULSE_NAMES[i] for i in setting],
            "record_file": record_file,
            "channel_ids": list(channels)}


def _pulse_index(names, path):
    try:
        return tuple(PULSE_NAMES.index(n) for n in names)
    except ValueError:
        raise ConfigError(path, f"unknown pulse in {names}; use {PULSE_NAMES}") from None


def load_manifest_values(path):
    """(basis values list, {setting: values}) from a state-tomography manifest.

    Record files hold one filtered value per shot and channel (length-1 records).
    """
    path = Path(path)
    man = json.loads(path.read_text())
    basis, data = {}, {}
    for i, entry in enumerate(man.get("configurations", [])):
        where = f"manifest.configurations[{i}]"
        if entry.get("record_file") is None:
            raise ConfigError(where, "no record_file")
        recs = io.load_records(path.parent / entry["record_file"])
        if recs.length != 1:
            raise ConfigError(where, "expected filtered values (length-1 records)")
        values = recs.samples[:, :, 0].real.astype(float)
        if entry["role"] == "basis":
            basis[int(entry["basis_state"])] = values
        else:
            data[_pulse_index(entry["rotation"], where + ".rotation")] = values
    if sorted(basis) != list(range(len(basis))) or not basis:
        raise ConfigError("manifest", "basis-state calibration entries incomplete")
    return [basis[b] for b in range(len(basis))], data


def _tomography_inputs(cfg, out, sampler, kind):
    """Basis-state values (measurement tomography) plus manifest bookkeeping."""
    shots = cfg.shots.basis if cfg.tomography.sampler == "values" else cfg.shots.per_config
    basis = sim.basis_state_values(sampler, shots, cfg.seed)
    entries = []
    for b, vals in enumerate(basis):
        fname = None
        if cfg.tomography.save_values:
            fname = f"values_basis_{b}.ctr"
            _write_values(out, fname, vals)
        bits = [int(x) for x in format(b, "02b")]
        entry = _manifest_entry(None, (0, 0), range(vals.shape[1]), fname, "basis")
        entry["prep"] = [("X180" if x else "I") for x in bits]
        entry["basis_state"] = b
        entries.append(entry)
    return basis, entries


def _run_state_tomo(cfg, out):
    psi, rho_true = sim.zx_output_state()
    if cfg.tomography.manifest is not None:
        basis, data = load_manifest_values(cfg.tomography.manifest)
        entries = None
    else:
        sampler = build_sampler(cfg)
        basis, entries = _tomography_inputs(cfg, out, sampler, "state")
        data = sim.state_tomography_data(sampler, rho_true, cfg.shots.per_config, cfg.seed)
    ops = sim.measurement_operators(basis)

    if cfg.tomography.noiseless:
        p = tm.build_state_predictor(ops)
        means = {s: [float(np.real(np.trace(tm.rotated_observable(op.matrix(), s) @ rho_true))) for op in ops]
                 for s in tm.default_settings(2)}
        variances = {s: [1.0] * len(ops) for s in means}
        res = tm.reconstruct_state_from_means(p, means, variances)
    else:
        res = tm.reconstruct_state(data, ops)

    if entries is not None:
        for s in tm.default_settings(2):
            fname = None
            if cfg.tomography.save_values and not cfg.tomography.noiseless:
                fname = "values_" + "_".join(PULSE_NAMES[i] for i in s) + ".ctr"
                _write_values(out, fname, data[s])
            entries.append(_manifest_entry(None, s, range(2), fname))
        io.save_json({"kind": "state", "n_qubits": 2, "configurations": entries}, out.path("manifest.json"))

    io.save_json({"dim": 4, "entries": io.complex_to_json(res.rho)}, out.path("rho.json"))
    ideal = qc.pauli_decompose(rho_true).real * 4
    io.write_pauli_csv(res.labels, res.pauli, res.pauli_stderr, out.path("pauli.csv"), ideal)
    io.save_json([{"channels": list(op.channels), "labels": op.labels,
                   "coefficients": op.pauli_coefficients.tolist(),
                   "stderr": None if op.stderr is None else op.stderr.tolist()} for op in ops],
                 out.path("measurement_operators.json"))
    weight_one = [i for i, lab in enumerate(res.labels) if sum(ch != "I" for ch in lab) == 1]
    z = np.abs(res.pauli[weight_one]) / res.pauli_stderr[weight_one]
    return {
        "fidelity": res.fidelity(psi),
        "max_weight_one_z": float(np.max(z)),
        "residual_norm": res.residual_norm,
        "condition_number": res.condition_number,
        "min_eigenvalue": float(np.min(np.linalg.eigvalsh(res.rho))),
    }


def _run_process_tomo(cfg, out):
    u = qc.zx_gate(-np.pi / 2)
    r_ideal = qc.ptm_from_liouville(qc.liouville_of_unitary(u))
    if cfg.tomography.noiseless:
        ops = [tm.MeasurementOperator.from_terms(t, 2, c) for t, c in
               (({"ZI": 1.0}, (0,)), ({"IZ": 1.0}, (1,)), ({"ZZ": 1.0}, (0, 1)))]
        p = tm.build_process_predictor(ops)
        x = qc.liouville_of_unitary(u).reshape(-1, order="F")
        pred = p.predict(x).real
        means, variances = {}, {}
        for i, lab in enumerate(p.labels):
            if lab[-1] == tm.TRACE:
                continue
            key = lab[:-1]
            means.setdefault(key, [0.0] * len(ops))[lab[-1]] = float(pred[i])
            variances.setdefault(key, [1.0] * len(ops))
        res = tm.reconstruct_process_from_means(p, means, variances)
        entries = None
    else:
        sampler = build_sampler(cfg)
        basis, entries = _tomography_inputs(cfg, out, sampler, "process")
        ops = sim.measurement_operators(basis)
        data = sim.process_tomography_data(sampler, u, cfg.shots.per_config, cfg.seed)
        res = tm.reconstruct_process(data, ops)
        for (a, s) in data:
            entries.append(_manifest_entry(a, s, range(2)))
        io.save_json({"kind": "process", "n_qubits": 2, "configurations": entries}, out.path("manifest.json"))

    labels = qc.pauli_labels(2)
    io.write_ptm_csv(res.ptm, labels, out.path("ptm.csv"))
    io.write_ptm_csv(res.ptm_stderr, labels, out.path("ptm_stderr.csv"))
    f_pro, f_avg = res.fidelities(r_ideal)
    return {"process_fidelity": f_pro, "average_gate_fidelity": f_avg,
            "tp_deviation": res.tp_deviation, "condition_number": res.condition_number}


# -- channelizer -----------------------------------------------------------------

def _test_tones(shots, length, rate, rng, bandwidth):
    """Two-tone complex baseband waveforms confined well inside ``bandwidth``,
    random frequencies and phases per shot; shape (shots, length)."""
    t = np.arange(length) / rate
    f = rng.uniform(0.05, 0.2, (shots, 2, 1)) * bandwidth
    ph = rng.uniform(0, 2 * np.pi, (shots, 2, 1))
    return (0.5 * np.exp(1j * (2 * np.pi * f[:, 0] * t + ph[:, 0]))
            + 0.3 * np.exp(-1j * (2 * np.pi * f[:, 1] * t + ph[:, 1])))


def channelizer_round_trip(ifs=(10e6, 20e6), bandwidth=3e6, sample_rate=500e6, bits=16, length=20000,
                           shots=4, seed=0, stage1_factor=5, stage2_factor=4, num_taps=127):
    """Synthesize known baseband signals, multiplex, channelize, compare.

    Returns ``(rms_errors, crosstalk_db)``; errors are relative RMS over the
    interior samples and crosstalk is the leakage of each channel into the
    others when only that channel is driven.
    """
    rng = np.random.default_rng(seed)
    chans = [ChannelConfig(f, bandwidth, stage2_factor) for f in ifs]
    chz = Channelizer(sample_rate, chans, stage1_factor=stage1_factor, num_taps=num_taps)
    truth = [_test_tones(shots, length, sample_rate, rng, bandwidth) for _ in ifs]
    fs = 1.0 * len(ifs)
    cfg = StreamConfig(sample_rate, bits, fs, "raise")
    recs = chz(synthesize_multiplexed(truth, list(ifs), cfg, bandwidth))
    edge = max(chz.edge_samples())
    errors = []
    for c, rec in enumerate(recs):
        ref = truth[c][:, ::chz.total_factors[c]][:, edge:-edge]
        got = rec.samples[:, edge:-edge]
        errors.append(float(np.sqrt(np.mean(np.abs(got - ref) ** 2) / np.mean(np.abs(ref) ** 2))))
    crosstalk = []
    for c in range(len(ifs)):
        drive = [t if k == c else np.zeros_like(t) for k, t in enumerate(truth)]
        recs = chz(synthesize_multiplexed(drive, list(ifs), cfg, bandwidth))
        p_in = np.mean(np.abs(recs[c].samples[:, edge:-edge]) ** 2)
        for k in range(len(ifs)):
            if k != c:
                p_leak = np.mean(np.abs(recs[k].samples[:, edge:-edge]) ** 2)
                crosstalk.append(float(10 * np.log10(p_in / max(p_leak, 1e-300))))
    return errors, min(crosstalk)


def channelizer_throughput(sample_rate=500e6, length=1000, shots=2000, repeats=3, seed=0):
    """Digitizer samples processed per second by the default two-channel chain."""
    rng = np.random.default_rng(seed)
    chz = Channelizer(sample_rate, [ChannelConfig(10e6, 3e6, 4), ChannelConfig(20e6, 3e6, 4)])
    from .readout import MultiplexedStream
    stream = MultiplexedStream(rng.standard_normal((shots, length)), sample_rate, 16, [10e6, 20e6])
    chz(MultiplexedStream(stream.samples[:4], sample_rate, 16, [10e6, 20e6]))   # warm up / compile
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        chz(stream)
        best = min(best, time.perf_counter() - t0)
    return shots * length / best


def _run_channelizer_bench(cfg, out):
    ph = cfg.physics
    bw = (2 * ph.chi + ph.kappa) / (2 * np.pi)
    errors, xtalk = channelizer_round_trip(ph.if_freqs, bw, ph.sample_rate, 16, seed=cfg.seed,
                                           stage1_factor=ph.stage1_factor, stage2_factor=ph.stage2_factor,
                                           num_taps=ph.num_taps)
    spacing_ifs = (10e6, 10e6 + 2 * bw)
    _, xtalk_2bw = channelizer_round_trip(spacing_ifs, bw, ph.sample_rate, 16, seed=cfg.seed,
                                          stage1_factor=ph.stage1_factor, stage2_factor=ph.stage2_factor,
                                          num_taps=ph.num_taps)
    rate = channelizer_throughput(ph.sample_rate, seed=cfg.seed)
    metrics = {f"rms_error_ch{c}": e for c, e in enumerate(errors)}
    metrics.update({"crosstalk_db": xtalk, "crosstalk_db_2bw_spacing": xtalk_2bw,
                    "throughput_samples_per_s": rate})
    io.save_json({k: v for k, v in metrics.items() if k != "throughput_samples_per_s"},
                 out.path("channelizer_metrics.json"))
    return metrics


def _run_channelize(cfg, out):
    """Channelize a digitizer stream file (real part of channel 0) into a
    multi-channel baseband record file."""
    ph = cfg.physics
    from .readout import MultiplexedStream
    if cfg.input is not None:
        recs = io.load_records(cfg.input)
        stream = MultiplexedStream(recs.channel(0).real.astype(float), recs.sample_rate, 16, [])
        specs = [ChannelConfig.parse(s) for s in cfg.channels]
    else:
        specs = [ChannelConfig.parse(s) for s in cfg.channels] or \
            [ChannelConfig(f, (2 * ph.chi + ph.kappa) / (2 * np.pi), ph.stage2_factor) for f in ph.if_freqs]
        rng = sim.derived_rng(cfg.seed, 5)
        length = int(round(ph.duration * ph.sample_rate))
        tones = [_test_tones(cfg.shots.per_config, length, ph.sample_rate, rng, s.bandwidth) for s in specs]
        stream = synthesize_multiplexed(tones, [s.if_freq for s in specs],
                                        StreamConfig(ph.sample_rate, ph.quantization_bits, float(len(specs))),
                                        [s.bandwidth for s in specs])
        io.persist_records(stream.samples.astype(np.complex64)[:, None, :], out.path("stream.ctr"),
                           ph.sample_rate)
    factors = {s.decimation_factor for s in specs}
    if len(factors) != 1:
        raise ConfigError("channels", "all channels must share one decimation factor")
    chz = Channelizer(stream.sample_rate, specs, stage1_factor=ph.stage1_factor, num_taps=ph.num_taps)
    recs = chz(stream)
    data = np.stack([r.samples for r in recs], axis=1)
    io.persist_records(data, out.path("channels.ctr"), 1 / recs[0].sample_period)
    io.save_json({"stage1": chz.stage1.to_dict(), "stage2": [f.to_dict() for f in chz.stage2]},
                 out.path("filters.json"))
    return {"channels": len(recs), "shots": int(data.shape[0]), "output_length": int(data.shape[2]),
            "output_rate": 1 / recs[0].sample_period}


_RUNNERS = {
    "crossover-sweep": _run_crossover,
    "corr-variance": _run_corr_variance,
    "calibrate": _run_calibrate,
    "state-tomo": _run_state_tomo,
    "process-tomo": _run_process_tomo,
    "channelizer-bench": _run_channelizer_bench,
    "channelize": _run_channelize,
}


def output_tree_hash(root, exclude=("report.json",)):
    """SHA-256 over every output file (name and bytes), sorted by name."""
    h = hashlib.sha256()
    root = Path(root)
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name not in exclude:
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()
