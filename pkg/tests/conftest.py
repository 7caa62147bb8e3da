"""Shared helpers: a deliberately independent dense reference simulator.

The reference path below builds full-size operators by explicit Kronecker
chains and evolves plain density matrices, so it shares no code with the
package's embedding/compilation machinery.
"""

import numpy as np
import pytest

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def kron_chain(*mats):
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def lift(op, targets, n):
    """Embed op on targets into n qubits by building the permuted kron chain."""
    targets = list(targets)
    k = len(targets)
    factors = []
    # operator written on (targets..., rest...) then basis-permuted by swaps
    rest = [q for q in range(n) if q not in targets]
    order = targets + rest
    big = np.kron(op, np.eye(2 ** (n - k), dtype=complex))
    # permutation matrix sending natural order to `order`
    perm = np.zeros((2**n, 2**n), dtype=complex)
    for idx in range(2**n):
        bits = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
        src = 0
        for pos, q in enumerate(order):
            src = (src << 1) | bits[q]
        perm[src, idx] = 1.0
    return perm.conj().T @ big @ perm


def reference_expectation(n, op_list, diag_values):
    """Evolve |0..0> through (matrix, targets, is_projection) ops; contract a
    diagonal observable given as a 2^n value vector."""
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1.0
    for op, targets, is_proj in op_list:
        full = lift(op, targets, n)
        rho = full @ rho @ (full.conj().T if not is_proj else full)
    return float(np.real(np.diagonal(rho)) @ np.asarray(diag_values))


def random_unitary(rng, dim):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(m)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def random_density(rng, dim):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
