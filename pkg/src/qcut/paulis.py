"""Exact Pauli-basis representation of states, observables, and channels.

Single-qubit basis elements are the Pauli matrices scaled by ``1/sqrt(2)`` so
that ``Tr(e_i† e_j) = delta_ij``. Multi-qubit elements are tensor products,
indexed base-4 with digits ``I=0, X=1, Y=2, Z=3`` and qubit 0 as the most
significant digit (matching ``numpy.kron`` order). In this basis a channel
``rho -> L rho R†`` becomes a real matrix (the Pauli transfer matrix), channel
composition is matrix product, and unitary channels are orthogonal matrices.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "PauliAxis",
    "PauliVector",
    "PauliTransferMatrix",
    "AXIS_MATRICES",
    "BASIS_NORMALIZATION",
    "basis_matrices",
    "ptm_of_unitary",
    "ptm_of_general_map",
    "identity_ptm",
    "compose",
    "tensor",
    "pauli_vector_of_density",
    "density_of_pauli_vector",
    "pauli_vector_of_observable",
    "expectation",
]

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)

#: Trace-orthonormality is achieved by scaling each single-qubit Pauli by this.
BASIS_NORMALIZATION = 1.0 / np.sqrt(2.0)

# Imaginary parts discarded during PTM construction must stay below this.
_IMAG_TOL = 1e-12


class PauliAxis(enum.Enum):
    """Single-qubit Pauli label. X, Y, Z square to the identity."""

    I = "I"
    X = "X"
    Y = "Y"
    Z = "Z"

    @property
    def matrix(self) -> np.ndarray:
        return AXIS_MATRICES[self].copy()

    @property
    def index(self) -> int:
        return "IXYZ".index(self.value)


AXIS_MATRICES = {
    PauliAxis.I: _I,
    PauliAxis.X: _X,
    PauliAxis.Y: _Y,
    PauliAxis.Z: _Z,
}


@lru_cache(maxsize=None)
def basis_matrices(n_qubits: int) -> tuple[np.ndarray, ...]:
    """Orthonormal n-qubit basis, base-4 indexed, qubit 0 most significant."""
    if n_qubits < 0:
        raise ValueError("n_qubits must be non-negative")
    singles = [AXIS_MATRICES[a] * BASIS_NORMALIZATION for a in PauliAxis]
    out = [np.eye(1, dtype=complex)]
    for _ in range(n_qubits):
        out = [np.kron(prev, s) for prev in out for s in singles]
    for m in out:
        m.setflags(write=False)
    return tuple(out)


def _infer_qubits(dim: int, what: str) -> int:
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise ValueError(f"{what} dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True)
class PauliVector:
    """Real coefficient vector of a Hermitian operator in the normalized basis."""

    n_qubits: int
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=float)
        if coeffs.shape != (4**self.n_qubits,):
            raise ValueError(
                f"expected {4 ** self.n_qubits} coefficients for {self.n_qubits} qubits, "
                f"got shape {coeffs.shape}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)


@dataclass(frozen=True)
class PauliTransferMatrix:
    """Real matrix of a superoperator in the normalized Pauli basis."""

    n_qubits: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        d = 4**self.n_qubits
        if entries.shape != (d, d):
            raise ValueError(
                f"expected a {d}x{d} matrix for {self.n_qubits} qubits, got {entries.shape}"
            )
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    def apply(self, vec: PauliVector) -> PauliVector:
        if vec.n_qubits != self.n_qubits:
            raise ValueError(
                f"qubit count mismatch: matrix has {self.n_qubits}, vector has {vec.n_qubits}"
            )
        return PauliVector(self.n_qubits, self.entries @ vec.coefficients)


def _real_part(raw: np.ndarray, what: str) -> np.ndarray:
    residue = np.abs(raw.imag).max() if raw.size else 0.0
    if residue > _IMAG_TOL:
        raise ValueError(f"{what} produced imaginary residue {residue:.3e}")
    return raw.real.copy()


def ptm_of_unitary(u: np.ndarray, k: int | None = None) -> PauliTransferMatrix:
    """PTM of ``rho -> u rho u†``. Entry (j, k) is ``Tr(e_j u e_k u†)``.

    ``u`` must be unitary to 1e-10 and act on one or two qubits; the result is
    an orthogonal matrix.
    """
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    n = _infer_qubits(u.shape[0], "unitary")
    if k is not None and k != n:
        raise ValueError(f"matrix of dimension {u.shape[0]} is not a {k}-qubit operator")
    if n not in (1, 2):
        raise ValueError(f"local channels only: expected 1 or 2 qubits, got {n}")
    deviation = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
    if deviation > 1e-10:
        raise ValueError(f"matrix is not unitary: deviation norm {deviation:.3e}")
    return ptm_of_general_map(u, u, _check_dims=False)


def ptm_of_general_map(
    left: np.ndarray, right: np.ndarray, *, _check_dims: bool = True
) -> PauliTransferMatrix:
    """PTM of the map ``rho -> left rho right†``.

    Covers non-unitary terms such as sandwiches by ``I + alpha*A``. The entries
    ``Tr(e_j L e_k R†)`` must come out real (Hermiticity-preserving map).
    """
    left = np.asarray(left, dtype=complex)
    right = np.asarray(right, dtype=complex)
    if _check_dims:
        if left.shape != right.shape or left.ndim != 2 or left.shape[0] != left.shape[1]:
            raise ValueError(f"dimension mismatch: left {left.shape}, right {right.shape}")
    n = _infer_qubits(left.shape[0], "operator")
    basis = np.stack(basis_matrices(n))
    transformed = np.einsum("ab,kbc,dc->kad", left, basis, right.conj())
    raw = np.einsum("jab,kba->jk", basis, transformed)
    return PauliTransferMatrix(n, _real_part(raw, "PTM construction"))


def identity_ptm(n_qubits: int) -> PauliTransferMatrix:
    return PauliTransferMatrix(n_qubits, np.eye(4**n_qubits))


def compose(outer: PauliTransferMatrix, inner: PauliTransferMatrix) -> PauliTransferMatrix:
    """Channel composition ``outer after inner``; equals the matrix product."""
    if outer.n_qubits != inner.n_qubits:
        raise ValueError("cannot compose transfer matrices of different qubit counts")
    return PauliTransferMatrix(outer.n_qubits, outer.entries @ inner.entries)


def tensor(a: PauliTransferMatrix, b: PauliTransferMatrix) -> PauliTransferMatrix:
    """Kronecker product; ``a`` holds the more significant (lower-index) qubits."""
    return PauliTransferMatrix(a.n_qubits + b.n_qubits, np.kron(a.entries, b.entries))


def pauli_vector_of_density(rho: np.ndarray, *, tol: float = 1e-8) -> PauliVector:
    """Coefficients ``Tr(e_j rho)`` of a density matrix.

    Validates Hermiticity, unit trace, and positive semidefiniteness to ``tol``.
    """
    rho = np.asarray(rho, dtype=complex)
    n = _infer_qubits(rho.shape[0], "density matrix")
    herm = np.abs(rho - rho.conj().T).max()
    if herm > tol:
        raise ValueError(f"density matrix is not Hermitian: deviation {herm:.3e}")
    trace = np.trace(rho)
    if abs(trace - 1.0) > tol:
        raise ValueError(f"density matrix trace is {trace:.6f}, expected 1")
    lowest = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
    if lowest < -tol:
        raise ValueError(f"density matrix has negative eigenvalue {lowest:.3e}")
    return _vector_of_hermitian(rho, n)


def pauli_vector_of_observable(obs: np.ndarray, *, tol: float = 1e-8) -> PauliVector:
    """Coefficients of a Hermitian observable; no trace or positivity demands."""
    obs = np.asarray(obs, dtype=complex)
    n = _infer_qubits(obs.shape[0], "observable")
    herm = np.abs(obs - obs.conj().T).max()
    if herm > tol:
        raise ValueError(f"observable is not Hermitian: deviation {herm:.3e}")
    return _vector_of_hermitian(obs, n)


def _vector_of_hermitian(op: np.ndarray, n: int) -> PauliVector:
    basis = np.stack(basis_matrices(n))
    # Tr(e_j^dagger op) elementwise: conjugate-and-transpose folded into the sum
    raw = np.einsum("jab,ab->j", basis.conj(), op)
    return PauliVector(n, _real_part(raw, "Pauli expansion"))


def density_of_pauli_vector(vec: PauliVector) -> np.ndarray:
    """Reconstruct the operator ``sum_j c_j e_j`` from its coefficients."""
    basis = np.stack(basis_matrices(vec.n_qubits))
    return np.einsum("j,jab->ab", vec.coefficients, basis)


def expectation(
    obs: PauliVector, channel: PauliTransferMatrix, state: PauliVector
) -> float:
    """Bilinear form ``sum_jk O_j S_jk rho_k`` = ``Tr(O * channel(rho))``."""
    if not (obs.n_qubits == channel.n_qubits == state.n_qubits):
        raise ValueError(
            "qubit count mismatch: "
            f"observable {obs.n_qubits}, channel {channel.n_qubits}, state {state.n_qubits}"
        )
    return float(obs.coefficients @ channel.entries @ state.coefficients)
