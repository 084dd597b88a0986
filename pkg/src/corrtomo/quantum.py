"""Few-qubit dense linear algebra: Pauli algebra, vectorization, processes.

Conventions used everywhere in the package:

* ``vec`` is column-major (Fortran order) stacking, so
  ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)`` and the superoperator of
  ``rho -> U rho U^dagger`` is ``kron(U.conj(), U)``.
* Pauli strings are ordered lexicographically over ``I, X, Y, Z`` with the
  first qubit leftmost (``II, IX, IY, IZ, XI, ...``).  The same ordering
  indexes coefficient vectors and Pauli transfer matrices.
* Rotations are ``R_a(theta) = exp(-i theta sigma_a / 2)``.  With this sign,
  ``R_y(pi/2) Z R_y(pi/2)^dagger = X`` while the observable measured after
  the pulse, ``R_y(pi/2)^dagger Z R_y(pi/2)``, is ``-X``.
"""

import itertools
from functools import lru_cache

import numpy as np

MAX_QUBITS = 4

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)

PAULI_1Q = {"I": I2, "X": X, "Y": Y, "Z": Z}


def num_qubits(dim):
    n = int(round(np.log2(dim))) if dim > 0 else -1
    if n < 1 or 2 ** n != dim:
        raise ValueError(f"dimension {dim} is not a power of 2")
    if n > MAX_QUBITS:
        raise ValueError(f"{n} qubits exceeds the supported maximum of {MAX_QUBITS}")
    return n


def _check_n(n_qubits):
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")


def kron_all(ops):
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


@lru_cache(maxsize=None)
def pauli_labels(n_qubits):
    _check_n(n_qubits)
    return tuple("".join(p) for p in itertools.product("IXYZ", repeat=n_qubits))


@lru_cache(maxsize=None)
def _pauli_stack(n_qubits):
    mats = np.array([kron_all(PAULI_1Q[c] for c in label) for label in pauli_labels(n_qubits)])
    mats.setflags(write=False)
    return mats


def pauli_basis(n_qubits):
    """All ``4**n`` Pauli strings as dense matrices, lexicographic order."""
    return list(_pauli_stack(n_qubits))


def pauli_operator(label):
    """Matrix for a Pauli string such as ``"ZI"``."""
    if not label or any(c not in PAULI_1Q for c in label):
        raise ValueError(f"bad Pauli string {label!r}")
    return kron_all(PAULI_1Q[c] for c in label)


def pauli_decompose(op):
    """Coefficients ``c_a = Tr(P_a op) / 2**n`` so that ``op = sum c_a P_a``.

    Returned as a real array when every coefficient is real to 1e-12.
    """
    op = np.asarray(op, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError("operator must be square")
    n = num_qubits(op.shape[0])
    paulis = _pauli_stack(n)
    # Tr(P_a op) = sum_ij (P_a)_ji op_ij
    coeffs = np.einsum("aji,ij->a", paulis, op) / op.shape[0]
    if np.all(np.abs(coeffs.imag) < 1e-12):
        return coeffs.real.copy()
    return coeffs


def pauli_reconstruct(coeffs):
    coeffs = np.asarray(coeffs)
    n = num_qubits(int(round(np.sqrt(coeffs.size))))
    return np.tensordot(coeffs, _pauli_stack(n), axes=1)


# -- vectorization ---------------------------------------------------------

def vec(op):
    return np.asarray(op).reshape(-1, order="F")


def unvec(v):
    v = np.asarray(v)
    d = int(round(np.sqrt(v.size)))
    if v.ndim != 1 or d * d != v.size:
        raise ValueError(f"length {v.size} is not a perfect square")
    return v.reshape((d, d), order="F")


def is_unitary(u, atol=1e-10):
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=atol)


def liouville_of_unitary(u):
    """Superoperator ``E`` with ``vec(U rho U^dag) = E @ vec(rho)``."""
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u):
        raise ValueError("input is not unitary to 1e-10")
    num_qubits(u.shape[0])
    return np.kron(u.conj(), u)


def apply_process(e, rho):
    rho = np.asarray(rho)
    return unvec(np.asarray(e) @ vec(rho))


def ptm_from_liouville(e):
    """Pauli transfer matrix ``R_ab = Tr(P_a E(P_b)) / 2**n`` (real)."""
    e = np.asarray(e, dtype=complex)
    if e.ndim != 2 or e.shape[0] != e.shape[1]:
        raise ValueError("superoperator must be square")
    d = int(round(np.sqrt(e.shape[0])))
    if d * d != e.shape[0]:
        raise ValueError("superoperator size is not a square dimension")
    n = num_qubits(d)
    basis = np.array([vec(p) for p in _pauli_stack(n)]).T
    return (basis.conj().T @ e @ basis).real / d


def liouville_from_ptm(r):
    r = np.asarray(r, dtype=float)
    d = int(round(np.sqrt(r.shape[0])))
    basis = np.array([vec(p) for p in _pauli_stack(num_qubits(d))]).T
    return basis @ r @ basis.conj().T / d


# -- states and fidelities -------------------------------------------------

def density_matrix(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def state_fidelity(psi, rho):
    """``<psi|rho|psi>`` for a pure reference state."""
    psi = np.asarray(psi, dtype=complex).ravel()
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (psi.size, psi.size):
        raise ValueError(f"state of dim {psi.size} does not match rho of shape {rho.shape}")
    return float(np.real(psi.conj() @ rho @ psi))


def gate_fidelities(r_ideal, r_meas):
    """Process fidelity and average gate fidelity from two PTMs."""
    r_ideal = np.asarray(r_ideal, dtype=float)
    r_meas = np.asarray(r_meas, dtype=float)
    if r_ideal.shape != r_meas.shape or r_ideal.ndim != 2 or r_ideal.shape[0] != r_ideal.shape[1]:
        raise ValueError(f"PTM shapes differ: {r_ideal.shape} vs {r_meas.shape}")
    d2 = r_ideal.shape[0]
    d = int(round(np.sqrt(d2)))
    f_pro = float(np.trace(r_ideal.T @ r_meas) / d2)
    return f_pro, (d * f_pro + 1) / (d + 1)


def project_to_physical(rho):
    """Clip negative eigenvalues and renormalise.

    A cheap nearest-PSD heuristic, not the constrained maximum-likelihood
    estimate.
    """
    rho = np.asarray(rho, dtype=complex)
    rho = (rho + rho.conj().T) / 2
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0, None)
    if w.sum() <= 0:
        raise ValueError("no positive spectral weight to renormalise")
    w = w / w.sum()
    return (v * w) @ v.conj().T


# -- gates -----------------------------------------------------------------

def rotation(axis, theta):
    sigma = PAULI_1Q[axis.upper()]
    return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * sigma


def zx_gate(angle):
    """``exp(-i angle/2 Z(x)X)``; ``angle=-pi/2`` is the entangling ZX(-pi/2)."""
    zx = np.kron(Z, X)
    return np.cos(angle / 2) * np.eye(4) - 1j * np.sin(angle / 2) * zx


TOMOGRAPHY_PULSES = ("I", "X90", "Y90", "X180")


def tomography_rotations():
    """Per-qubit pre-measurement pulses ``{I, Rx(pi/2), Ry(pi/2), Rx(pi)}``."""
    return [I2.copy(), rotation("X", np.pi / 2), rotation("Y", np.pi / 2), rotation("X", np.pi)]


def product_unitary(indices, single=None):
    single = tomography_rotations() if single is None else single
    return kron_all(single[i] for i in indices)


def prep_state(indices, single=None):
    """``U_i|0><0|U_i^dag (x) U_j|0><0|U_j^dag (x) ...``."""
    u = product_unitary(indices, single)
    psi = u[:, 0]
    return density_matrix(psi)
