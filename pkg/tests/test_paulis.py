import numpy as np
import pytest

from qcut.paulis import (
    PauliAxis,
    PauliTransferMatrix,
    PauliVector,
    basis_matrices,
    compose,
    density_of_pauli_vector,
    expectation,
    identity_ptm,
    pauli_vector_of_density,
    pauli_vector_of_observable,
    ptm_of_general_map,
    ptm_of_unitary,
    tensor,
)

from conftest import PAULI, random_density, random_unitary

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CZ = np.diag([1, 1, 1, -1]).astype(complex)

LABELS = "IXYZ"


def index_of(*labels):
    out = 0
    for ch in labels:
        out = out * 4 + LABELS.index(ch)
    return out


def conjugation_ptm_reference(u):
    """Independent entry-by-entry trace computation."""
    n = int(np.log2(u.shape[0]))
    basis = []
    for idx in range(4**n):
        digits = []
        v = idx
        for _ in range(n):
            digits.append(v % 4)
            v //= 4
        digits.reverse()
        m = np.eye(1, dtype=complex)
        for d in digits:
            m = np.kron(m, PAULI[LABELS[d]] / np.sqrt(2))
        basis.append(m)
    out = np.zeros((4**n, 4**n))
    for j, ej in enumerate(basis):
        for k, ek in enumerate(basis):
            out[j, k] = np.real(np.trace(ej.conj().T @ u @ ek @ u.conj().T))
    return out


def test_basis_is_orthonormal_two_qubits():
    basis = basis_matrices(2)
    for i, a in enumerate(basis):
        for j, b in enumerate(basis):
            inner = np.trace(a.conj().T @ b)
            assert abs(inner - (1.0 if i == j else 0.0)) < 1e-14


def test_identity_ptm_is_identity():
    assert np.abs(ptm_of_unitary(np.eye(2)).entries - np.eye(4)).max() < 1e-14


def test_hadamard_permutes_axes_with_sign():
    ptm = ptm_of_unitary(H)
    expected = conjugation_ptm_reference(H)
    assert np.abs(ptm.entries - expected).max() < 1e-12
    assert ptm.entries[index_of("I"), index_of("I")] == pytest.approx(1)
    assert ptm.entries[index_of("Z"), index_of("X")] == pytest.approx(1)
    assert ptm.entries[index_of("X"), index_of("Z")] == pytest.approx(1)
    assert ptm.entries[index_of("Y"), index_of("Y")] == pytest.approx(-1)


def test_cz_transfer_matrix_entries():
    ptm = ptm_of_unitary(CZ, 2)
    assert np.abs(ptm.entries - conjugation_ptm_reference(CZ)).max() < 1e-12
    assert np.abs(ptm.entries @ ptm.entries.T - np.eye(16)).max() < 1e-12
    assert ptm.entries[index_of("Z", "I"), index_of("Z", "I")] == pytest.approx(1)
    assert ptm.entries[index_of("X", "I"), index_of("X", "I")] == pytest.approx(0)
    assert ptm.entries[index_of("X", "Z"), index_of("X", "I")] == pytest.approx(1)


def test_non_unitary_input_rejected_with_deviation():
    with pytest.raises(ValueError, match="deviation"):
        ptm_of_unitary(np.array([[1, 0], [0, 2]], dtype=complex))
    with pytest.raises(ValueError):
        ptm_of_unitary(np.eye(4), k=1)
    with pytest.raises(ValueError):
        ptm_of_unitary(np.eye(8))  # 3 qubits is beyond the local layer


def test_general_map_identity_plus_z():
    m = np.eye(2) + PAULI["Z"]
    ptm = ptm_of_general_map(m, m)
    assert ptm.entries[index_of("I"), index_of("I")] == pytest.approx(2)
    assert ptm.entries[index_of("I"), index_of("Z")] == pytest.approx(2)
    assert ptm.entries[index_of("Z"), index_of("I")] == pytest.approx(2)
    assert ptm.entries[index_of("Z"), index_of("Z")] == pytest.approx(2)
    assert ptm.entries[index_of("X"), index_of("X")] == pytest.approx(0)
    assert ptm.entries[index_of("Y"), index_of("Y")] == pytest.approx(0)


def test_general_map_identity():
    assert np.abs(ptm_of_general_map(np.eye(2), np.eye(2)).entries - np.eye(4)).max() < 1e-14


def test_general_map_quarter_x_rotation_matches_unitary_path():
    u = (np.eye(2) + 1j * PAULI["X"]) / np.sqrt(2)
    from_map = ptm_of_general_map(u, u)
    from_unitary = ptm_of_unitary(u)
    reference = conjugation_ptm_reference(u)
    assert np.abs(from_map.entries - from_unitary.entries).max() < 1e-14
    assert np.abs(from_map.entries - reference).max() < 1e-12
    # direct conjugation sends Z to Y and Y to -Z
    assert from_map.entries[index_of("Y"), index_of("Z")] == pytest.approx(1)
    assert from_map.entries[index_of("Z"), index_of("Y")] == pytest.approx(-1)


def test_general_map_dimension_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        ptm_of_general_map(np.eye(2), np.eye(4))


def test_pauli_vector_of_zero_state():
    vec = pauli_vector_of_density(np.array([[1, 0], [0, 0]], dtype=complex))
    s = 1 / np.sqrt(2)
    assert np.allclose(vec.coefficients, [s, 0, 0, s], atol=1e-14)


def test_pauli_vector_of_maximally_mixed():
    vec = pauli_vector_of_density(np.eye(2) / 2)
    assert np.allclose(vec.coefficients, [1 / np.sqrt(2), 0, 0, 0], atol=1e-14)


def test_pauli_vector_of_plus_state():
    plus = np.full((2, 2), 0.5, dtype=complex)
    vec = pauli_vector_of_density(plus)
    s = 1 / np.sqrt(2)
    assert np.allclose(vec.coefficients, [s, s, 0, 0], atol=1e-14)


def test_pauli_vector_rejects_invalid_states():
    with pytest.raises(ValueError, match="Hermitian"):
        pauli_vector_of_density(np.array([[1, 1], [0, 0]], dtype=complex))
    with pytest.raises(ValueError, match="trace"):
        pauli_vector_of_density(np.eye(2, dtype=complex))
    with pytest.raises(ValueError, match="negative eigenvalue"):
        pauli_vector_of_density(np.diag([1.5, -0.5]).astype(complex))


def test_density_round_trip(rng):
    for n in (1, 2, 3):
        for _ in range(100):
            rho = random_density(rng, 2**n)
            vec = pauli_vector_of_density(rho)
            back = density_of_pauli_vector(vec)
            assert np.abs(back - rho).max() < 1e-12


def test_expectation_examples():
    z = pauli_vector_of_observable(PAULI["Z"])
    zero = pauli_vector_of_density(np.diag([1, 0]).astype(complex))
    assert expectation(z, identity_ptm(1), zero) == pytest.approx(1)
    assert expectation(z, ptm_of_unitary(H), zero) == pytest.approx(0, abs=1e-12)

    zz = pauli_vector_of_observable(np.kron(PAULI["Z"], PAULI["Z"]))
    zero2 = pauli_vector_of_density(np.diag([1, 0, 0, 0]).astype(complex))
    channel = compose(ptm_of_unitary(CZ), tensor(ptm_of_unitary(H), ptm_of_unitary(H)))
    got = expectation(zz, channel, zero2)
    # dense reference: CZ (H (x) H) |00>
    psi = CZ @ np.kron(H, H) @ np.array([1, 0, 0, 0], dtype=complex)
    want = float(np.real(psi.conj() @ np.kron(PAULI["Z"], PAULI["Z"]) @ psi))
    assert got == pytest.approx(want, abs=1e-12)
    assert got == pytest.approx(0, abs=1e-12)


def test_expectation_rejects_mismatched_sizes():
    z = pauli_vector_of_observable(PAULI["Z"])
    zero2 = pauli_vector_of_density(np.diag([1, 0, 0, 0]).astype(complex))
    with pytest.raises(ValueError, match="mismatch"):
        expectation(z, identity_ptm(2), zero2)


def test_tensor_examples(rng):
    assert np.array_equal(
        tensor(identity_ptm(1), identity_ptm(1)).entries, np.eye(16)
    )
    x_on_first = tensor(ptm_of_unitary(PAULI["X"]), identity_ptm(1))
    zero2 = pauli_vector_of_density(np.diag([1, 0, 0, 0]).astype(complex))
    moved = x_on_first.apply(zero2)
    ten = pauli_vector_of_density(np.diag([0, 0, 1, 0]).astype(complex))
    assert np.abs(moved.coefficients - ten.coefficients).max() < 1e-12

    a = ptm_of_unitary(random_unitary(rng, 2))
    b = ptm_of_unitary(random_unitary(rng, 2))
    c = ptm_of_unitary(random_unitary(rng, 2))
    left = tensor(tensor(a, b), c).entries
    right = tensor(a, tensor(b, c)).entries
    assert np.abs(left - right).max() < 1e-14


def test_composition_matches_product(rng):
    for _ in range(100):
        u = random_unitary(rng, 2)
        v = random_unitary(rng, 2)
        combined = ptm_of_unitary(u @ v)
        product = compose(ptm_of_unitary(u), ptm_of_unitary(v))
        assert np.abs(combined.entries - product.entries).max() < 1e-10


def test_unitary_ptms_are_orthogonal(rng):
    for _ in range(20):
        u = random_unitary(rng, 4)
        s = ptm_of_unitary(u).entries
        assert np.abs(s @ s.T - np.eye(16)).max() < 1e-10


def test_vector_and_matrix_shape_validation():
    with pytest.raises(ValueError):
        PauliVector(2, np.zeros(4))
    with pytest.raises(ValueError):
        PauliTransferMatrix(1, np.zeros((4, 5)))
