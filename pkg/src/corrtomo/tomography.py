"""Linear-inversion tomography with empirically weighted least squares.

Each experiment configuration yields one expectation value per correlator
(a subset of readout channels whose values are multiplied shot by shot).
A correlator's observable is a diagonal ``MeasurementOperator`` found by
measurement tomography; conjugated by the configuration's pulses it gives
one row of the predictor matrix.  Rows are weighted by their empirical
variance (diagonal covariance only) and solved through an SVD of the
whitened system.

Trace constraints are appended as extra rows with tiny variance
(``CONSTRAINT_VARIANCE``): ``Tr(rho) = 1`` for states and
``Tr(E(rho_prep)) = 1`` for every preparation of a process.
"""

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import quantum as qc
from .estimation import correlate

CONSTRAINT_VARIANCE = 1e-12
TRACE = "trace"


class RankDeficientError(ValueError):
    def __init__(self, rank, columns):
        self.rank = rank
        self.deficiency = columns - rank
        super().__init__(f"predictor rank {rank} < {columns} columns "
                         f"(deficient subspace dimension {columns - rank})")


def diagonal_labels(n_qubits):
    return ["".join(p) for p in itertools.product("IZ", repeat=n_qubits)]


def _diagonal_sign_table(n_qubits):
    """Entry [P, b] is the eigenvalue of diagonal Pauli string P on basis state b."""
    labels = diagonal_labels(n_qubits)
    return np.array([np.real(np.diag(qc.pauli_operator(lab))) for lab in labels])


@dataclass(frozen=True)
class MeasurementOperator:
    """Diagonal observable as coefficients over ``I/Z`` strings (``II, IZ, ZI, ZZ``)."""
    pauli_coefficients: np.ndarray
    n_qubits: int
    channels: tuple = ()
    stderr: Optional[np.ndarray] = None

    def __post_init__(self):
        coeffs = np.asarray(self.pauli_coefficients, dtype=float)
        if coeffs.shape != (2 ** self.n_qubits,):
            raise ValueError(f"expected {2 ** self.n_qubits} coefficients, got {coeffs.shape}")
        object.__setattr__(self, "pauli_coefficients", coeffs)

    @classmethod
    def from_terms(cls, terms, n_qubits, channels=()):
        """``from_terms({"ZI": 1.011, "IZ": 0.0164}, 2)``"""
        labels = diagonal_labels(n_qubits)
        coeffs = np.zeros(len(labels))
        for lab, c in terms.items():
            coeffs[labels.index(lab)] = c
        return cls(coeffs, n_qubits, tuple(channels))

    @property
    def labels(self):
        return diagonal_labels(self.n_qubits)

    def coefficient(self, label):
        return float(self.pauli_coefficients[self.labels.index(label)])

    def diagonal(self):
        """Expected filtered value for each computational basis state."""
        return self.pauli_coefficients @ _diagonal_sign_table(self.n_qubits)

    def matrix(self):
        return np.diag(self.diagonal()).astype(complex)


def measurement_tomography(basis_means, channels=(), basis_variances=None):
    """Invert per-basis-state mean values into a diagonal Pauli expansion.

    ``basis_means[b]`` is the mean filtered (or correlated) value after
    preparing computational state ``b`` (first qubit most significant).
    ``basis_variances`` (variance of each mean) propagate to ``stderr``.
    """
    means = np.asarray(basis_means, dtype=float).ravel()
    n = int(round(np.log2(means.size))) if means.size else 0
    if n < 1 or 2 ** n != means.size:
        raise ValueError(f"need 2**n basis means, got {means.size}")
    signs = _diagonal_sign_table(n)
    coeffs = signs @ means / means.size
    stderr = None
    if basis_variances is not None:
        var = np.asarray(basis_variances, dtype=float).ravel()
        stderr = np.sqrt((signs ** 2) @ var) / means.size
    return MeasurementOperator(coeffs, n, tuple(channels), stderr)


# -- predictor matrices ----------------------------------------------------

@dataclass
class PredictorMatrix:
    matrix: np.ndarray
    labels: list
    kind: str
    dim: int
    constraint: np.ndarray = None

    def __post_init__(self):
        if self.constraint is None:
            self.constraint = np.array([lab[-1] == TRACE for lab in self.labels])

    @property
    def shape(self):
        return self.matrix.shape

    def rank(self, rtol=1e-10):
        s = np.linalg.svd(self.matrix, compute_uv=False)
        return int(np.sum(s > rtol * s[0]))

    def check_rank(self):
        r = self.rank()
        if r < self.matrix.shape[1]:
            raise RankDeficientError(r, self.matrix.shape[1])
        return r

    def predict(self, x):
        """Predicted expectation values for ``vec(rho)`` or ``vec(E)`` (real part)."""
        return (self.matrix @ x).real


def default_settings(n_qubits):
    return list(itertools.product(range(len(qc.TOMOGRAPHY_PULSES)), repeat=n_qubits))


def rotated_observable(op, setting, single=None):
    """``U^dag M U`` for the product pulse ``U`` of a rotation setting."""
    m = op.matrix() if isinstance(op, MeasurementOperator) else np.asarray(op)
    u = qc.product_unitary(setting, single)
    return u.conj().T @ m @ u


def _n_qubits(meas_ops):
    ns = {op.n_qubits for op in meas_ops}
    if len(ns) != 1:
        raise ValueError("measurement operators act on different numbers of qubits")
    return ns.pop()


def build_state_predictor(meas_ops, settings=None, rotations=None, include_trace=True, check=True):
    """One row ``vec(U^dag M U)^dag`` per (setting, operator), settings outermost."""
    n = _n_qubits(meas_ops)
    settings = default_settings(n) if settings is None else [tuple(s) for s in settings]
    d = 2 ** n
    rows, labels = [], []
    for s in settings:
        for k, op in enumerate(meas_ops):
            rows.append(qc.vec(rotated_observable(op, s, rotations)).conj())
            labels.append((s, k))
    if include_trace:
        rows.append(qc.vec(np.eye(d)).astype(complex))
        labels.append((TRACE,))
    p = PredictorMatrix(np.array(rows), labels, "state", d)
    if check:
        p.check_rank()
    return p


def build_process_predictor(meas_ops, preps=None, settings=None, rotations=None,
                            include_trace=True, check=True):
    """Rows ``vec(rho_prep)^T (x) vec(U^dag M U)^dag`` so that
    ``row @ vec(E) = Tr(M' E(rho_prep))``; operator fastest, then
    measurement setting, then preparation."""
    n = _n_qubits(meas_ops)
    preps = default_settings(n) if preps is None else [tuple(p) for p in preps]
    settings = default_settings(n) if settings is None else [tuple(s) for s in settings]
    d = 2 ** n
    observables = [(s, k, qc.vec(rotated_observable(op, s, rotations)).conj())
                   for s in settings for k, op in enumerate(meas_ops)]
    ident = qc.vec(np.eye(d)).astype(complex)
    rows, labels = [], []
    for prep in preps:
        vrho = qc.vec(qc.prep_state(prep, rotations))
        for s, k, vm in observables:
            rows.append(np.kron(vrho, vm))
            labels.append((prep, s, k))
        if include_trace:
            rows.append(np.kron(vrho, ident))
            labels.append((prep, TRACE))
    p = PredictorMatrix(np.array(rows), labels, "process", d)
    if check:
        p.check_rank()
    return p


# -- generalized least squares ---------------------------------------------

@dataclass
class CovarianceDiagonal:
    variances: np.ndarray

    def __post_init__(self):
        self.variances = np.asarray(self.variances, dtype=float).ravel()
        if not np.all(self.variances > 0) or not np.all(np.isfinite(self.variances)):
            raise ValueError("row variances must be finite and strictly positive")


@dataclass
class GlsSolution:
    x: np.ndarray
    residual_norm: float
    condition_number: float
    rank: int
    pinv_whitened: np.ndarray = field(repr=False)
    row_scale: np.ndarray = field(repr=False)

    def functional_stderr(self, w, noisy_rows=None):
        """Standard error of ``Re(w^dag x)`` for unit-variance whitened data.

        ``w`` may be a single vector or a stack of row vectors.
        """
        g = np.atleast_2d(np.asarray(w).conj()) @ self.pinv_whitened
        g = g.real
        if noisy_rows is not None:
            g = g[:, noisy_rows]
        return np.sqrt(np.sum(g ** 2, axis=1))


def gls_solve(p, c, m, rtol=1e-12):
    """Minimise ``sum_r |m_r - (P x)_r|**2 / C_r`` via SVD of the whitened system."""
    a = p.matrix if isinstance(p, PredictorMatrix) else np.asarray(p)
    c = c if isinstance(c, CovarianceDiagonal) else CovarianceDiagonal(c)
    m = np.asarray(m, dtype=float).ravel()
    if not (a.shape[0] == m.size == c.variances.size):
        raise ValueError(f"rows mismatch: P {a.shape[0]}, m {m.size}, C {c.variances.size}")
    scale = 1 / np.sqrt(c.variances)
    aw = a * scale[:, None]
    bw = m * scale
    u, s, vh = np.linalg.svd(aw, full_matrices=False)
    rank = int(np.sum(s > rtol * s[0]))
    if rank < a.shape[1]:
        raise RankDeficientError(rank, a.shape[1])
    pinv = (vh.conj().T / s) @ u.conj().T
    x = pinv @ bw
    resid = float(np.linalg.norm(aw @ x - bw))
    return GlsSolution(x, resid, float(s[0] / s[-1]), rank, pinv, scale)


# -- reconstruction from shot values ---------------------------------------

def row_statistics(values, meas_ops, var_floor=None):
    """Means and variances of every correlator for one configuration.

    ``values`` is (shots, channels).  Zero empirical variance is floored at
    ``1/shots**2`` so exact rows stay usable.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    means, variances = [], []
    for op in meas_ops:
        chans = op.channels or tuple(range(values.shape[1]))
        _, est = correlate([values[:, c] for c in chans])
        floor = var_floor if var_floor is not None else 1.0 / est.shots_used ** 2
        means.append(est.mean)
        variances.append(max(est.variance, floor))
    return means, variances


def _assemble(p, data_means, data_vars):
    m = np.empty(len(p.labels))
    v = np.empty(len(p.labels))
    for i, lab in enumerate(p.labels):
        if lab[-1] == TRACE:
            m[i], v[i] = 1.0, CONSTRAINT_VARIANCE
            continue
        key, k = lab[:-1], lab[-1]
        key = key[0] if len(key) == 1 else key
        if key not in data_means:
            raise KeyError(f"missing configuration {key}")
        m[i], v[i] = data_means[key][k], data_vars[key][k]
    return m, v


@dataclass
class StateTomography:
    """``pauli`` holds expectation values ``Tr(P rho)`` in Pauli-label order."""
    rho: np.ndarray
    pauli: np.ndarray
    pauli_stderr: np.ndarray
    residual_norm: float
    condition_number: float
    predictor: PredictorMatrix = field(repr=False)
    measured: np.ndarray = field(repr=False)
    variances: np.ndarray = field(repr=False)

    @property
    def labels(self):
        return qc.pauli_labels(qc.num_qubits(self.rho.shape[0]))

    def fidelity(self, psi):
        return qc.state_fidelity(psi, self.rho)


def reconstruct_state_from_means(p, data_means, data_vars):
    """GLS state estimate from per-configuration row means and variances.

    ``data_means[setting][k]`` is the estimate for operator ``k``.
    """
    m, v = _assemble(p, data_means, data_vars)
    sol = gls_solve(p, v, m)
    rho = qc.unvec(sol.x)
    rho = (rho + rho.conj().T) / 2
    rho = rho / np.trace(rho).real
    d = p.dim
    paulis = np.array([qc.vec(pm) for pm in qc.pauli_basis(qc.num_qubits(d))])
    stderr = sol.functional_stderr(paulis, ~p.constraint)
    expectations = qc.pauli_decompose(rho).real * d
    return StateTomography(rho, expectations, stderr, sol.residual_norm,
                           sol.condition_number, p, m, v)


def reconstruct_state(shot_values, meas_ops, settings=None, rotations=None):
    """``shot_values[setting]`` is a (shots, channels) array of filtered values."""
    n = _n_qubits(meas_ops)
    settings = default_settings(n) if settings is None else [tuple(s) for s in settings]
    missing = [s for s in settings if s not in shot_values]
    if missing:
        raise KeyError(f"missing configurations: {missing}")
    p = build_state_predictor(meas_ops, settings, rotations)
    means, variances = {}, {}
    for s in settings:
        means[s], variances[s] = row_statistics(shot_values[s], meas_ops)
    return reconstruct_state_from_means(p, means, variances)


@dataclass
class ProcessTomography:
    liouville: np.ndarray
    ptm: np.ndarray
    ptm_stderr: np.ndarray
    tp_deviation: float
    residual_norm: float
    condition_number: float
    predictor: PredictorMatrix = field(repr=False)

    def fidelities(self, r_ideal):
        return qc.gate_fidelities(r_ideal, self.ptm)


def _ptm_functionals(d):
    paulis = [qc.vec(pm) for pm in qc.pauli_basis(qc.num_qubits(d))]
    # R_ab = vec(P_a)^dag E vec(P_b) / d = (vec(P_b)^T (x) vec(P_a)^dag) vec(E) / d
    rows = [np.kron(pb, pa.conj()) / d for pa in paulis for pb in paulis]
    return np.array(rows).conj()


def reconstruct_process_from_means(p, data_means, data_vars):
    m, v = _assemble(p, data_means, data_vars)
    sol = gls_solve(p, v, m)
    d = p.dim
    e = sol.x.reshape((d * d, d * d), order="F")
    ptm = qc.ptm_from_liouville(e)
    stderr = sol.functional_stderr(_ptm_functionals(d), ~p.constraint).reshape(d * d, d * d)
    ident = qc.vec(np.eye(d)).astype(complex)
    tp_dev = float(np.linalg.norm(ident.conj() @ e - ident.conj()))
    return ProcessTomography(e, ptm, stderr, tp_dev, sol.residual_norm, sol.condition_number, p)


def reconstruct_process(shot_values, meas_ops, preps=None, settings=None, rotations=None):
    """``shot_values[(prep, setting)]`` is a (shots, channels) array."""
    n = _n_qubits(meas_ops)
    preps = default_settings(n) if preps is None else [tuple(x) for x in preps]
    settings = default_settings(n) if settings is None else [tuple(s) for s in settings]
    keys = [(a, s) for a in preps for s in settings]
    missing = [k for k in keys if k not in shot_values]
    if missing:
        raise KeyError(f"missing configurations: {missing[:4]}{'...' if len(missing) > 4 else ''}")
    p = build_process_predictor(meas_ops, preps, settings, rotations)
    means, variances = {}, {}
    for k in keys:
        means[k], variances[k] = row_statistics(shot_values[k], meas_ops)
    return reconstruct_process_from_means(p, means, variances)


def project_to_physical(rho):
    return qc.project_to_physical(rho)
