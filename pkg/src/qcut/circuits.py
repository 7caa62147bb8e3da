"""Circuit intermediate representation and its JSON wire format.

A circuit is a qubit count, an ordered op list, and a terminal diagonal
observable. Supported ops: the single-qubit gates H, S, X, Y, Z and
Rx/Ry/Rz(theta) (convention ``exp(-i*theta*P/2)``), the two-qubit gates CZ,
CNOT, and RPP(theta, P1P2) = ``exp(+i*theta*P1xP2)``, and the non-local
projection PROJ(P1P2) = ``(I + P1xP2)/2``. Observables are Z-strings over
``{I, Z}`` or explicit value tables over bitstrings (qubit 0 is the most
significant bit).

JSON documents are versioned::

    {"version": 1, "n": 2,
     "ops": [{"gate": "H", "q": [0]}, {"gate": "CZ", "q": [0, 1]}],
     "observable": "ZZ"}

``observable`` may also be ``{"type": "table", "values": [...]}``. Parsing is
strict: unknown gates, out-of-range qubits, and non-finite angles are rejected
with the offending op index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .densmat import OutputFunction
from .paulis import AXIS_MATRICES, PauliAxis

__all__ = [
    "Gate",
    "CircuitIR",
    "ONE_QUBIT_GATES",
    "TWO_QUBIT_GATES",
    "parse_circuit",
    "serialize_circuit",
    "gate_matrix",
    "generate_qaoa_example",
    "generate_clustered_pair_example",
]

ONE_QUBIT_GATES = ("H", "S", "X", "Y", "Z", "RX", "RY", "RZ")
TWO_QUBIT_GATES = ("CZ", "CNOT", "RPP")
_ROTATIONS = ("RX", "RY", "RZ")

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j]).astype(complex)


@dataclass(frozen=True)
class Gate:
    """One circuit op: a gate name, its qubits, and optional parameters."""

    name: str
    qubits: tuple[int, ...]
    theta: float | None = None
    paulis: str | None = None

    @property
    def is_two_qubit(self) -> bool:
        return self.name in TWO_QUBIT_GATES

    @property
    def is_projection(self) -> bool:
        return self.name == "PROJ"

    @property
    def is_cuttable(self) -> bool:
        return self.is_two_qubit or self.is_projection


@dataclass(frozen=True)
class CircuitIR:
    """Validated circuit: ops in program order plus the output observable.

    ``cut_candidates`` optionally flags op indices that a generator considers
    natural cut locations (e.g. long-range interactions).
    """

    n_qubits: int
    ops: tuple[Gate, ...]
    observable: OutputFunction
    cut_candidates: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("circuit needs at least one qubit")
        for index, op in enumerate(self.ops):
            _validate_gate(op, index, self.n_qubits)
        if self.observable.n_bits != self.n_qubits:
            raise ValueError(
                f"observable covers {self.observable.n_bits} bits, circuit has {self.n_qubits}"
            )
        for index in self.cut_candidates:
            if not (0 <= index < len(self.ops)) or not self.ops[index].is_cuttable:
                raise ValueError(f"cut candidate {index} does not reference a cuttable op")


def _validate_gate(op: Gate, index: int, n_qubits: int):
    where = f"ops[{index}]"
    if op.name in ONE_QUBIT_GATES:
        expected = 1
    elif op.name in TWO_QUBIT_GATES or op.name == "PROJ":
        expected = 2
    else:
        raise ValueError(f"{where}: unknown gate {op.name!r}")
    if len(op.qubits) != expected:
        raise ValueError(f"{where}: {op.name} takes {expected} qubit(s), got {list(op.qubits)}")
    if len(set(op.qubits)) != len(op.qubits):
        raise ValueError(f"{where}: duplicate qubits {list(op.qubits)}")
    for q in op.qubits:
        if not 0 <= q < n_qubits:
            raise ValueError(f"{where}: qubit {q} out of range for n={n_qubits}")
    needs_theta = op.name in _ROTATIONS or op.name == "RPP"
    if needs_theta:
        if op.theta is None or not math.isfinite(op.theta):
            raise ValueError(f"{where}: {op.name} requires a finite angle, got {op.theta}")
    elif op.theta is not None:
        raise ValueError(f"{where}: {op.name} takes no angle")
    needs_paulis = op.name in ("RPP", "PROJ")
    if needs_paulis:
        if (
            op.paulis is None
            or len(op.paulis) != 2
            or any(ch not in "XYZ" for ch in op.paulis)
        ):
            raise ValueError(
                f"{where}: {op.name} requires a two-letter Pauli pair over X/Y/Z, got {op.paulis!r}"
            )
    elif op.paulis is not None:
        raise ValueError(f"{where}: {op.name} takes no Pauli pair")


def gate_matrix(op: Gate) -> np.ndarray:
    """Dense unitary (or projector, for PROJ) of one op."""
    if op.name == "H":
        return _H.copy()
    if op.name == "S":
        return _S.copy()
    if op.name in ("X", "Y", "Z"):
        return AXIS_MATRICES[PauliAxis(op.name)].copy()
    if op.name in _ROTATIONS:
        axis = AXIS_MATRICES[PauliAxis(op.name[1])]
        half = op.theta / 2.0
        return np.cos(half) * np.eye(2, dtype=complex) - 1j * np.sin(half) * axis
    if op.name == "CZ":
        return np.diag([1, 1, 1, -1]).astype(complex)
    if op.name == "CNOT":
        m = np.eye(4, dtype=complex)
        m[[2, 3]] = m[[3, 2]]
        return m
    pair = np.kron(AXIS_MATRICES[PauliAxis(op.paulis[0])], AXIS_MATRICES[PauliAxis(op.paulis[1])])
    if op.name == "RPP":
        return np.cos(op.theta) * np.eye(4, dtype=complex) + 1j * np.sin(op.theta) * pair
    if op.name == "PROJ":
        return (np.eye(4, dtype=complex) + pair) / 2.0
    raise ValueError(f"unknown gate {op.name!r}")  # pragma: no cover - validated earlier


# --- JSON wire format -------------------------------------------------------

SCHEMA_VERSION = 1


def parse_circuit(document: str) -> CircuitIR:
    """Parse and validate a circuit JSON document."""
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(data, dict):
        raise ValueError("top-level document must be an object")
    version = data.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {version!r}")
    try:
        n = int(data["n"])
        raw_ops = data["ops"]
        raw_obs = data["observable"]
    except KeyError as exc:
        raise ValueError(f"missing required field {exc.args[0]!r}")
    if not isinstance(raw_ops, list):
        raise ValueError("'ops' must be a list")
    ops = []
    for index, raw in enumerate(raw_ops):
        if not isinstance(raw, dict) or "gate" not in raw or "q" not in raw:
            raise ValueError(f"ops[{index}]: each op needs 'gate' and 'q' fields")
        theta = raw.get("theta")
        ops.append(
            Gate(
                name=str(raw["gate"]),
                qubits=tuple(int(q) for q in raw["q"]),
                theta=None if theta is None else float(theta),
                paulis=raw.get("paulis"),
            )
        )
    observable = _parse_observable(raw_obs, n)
    candidates = tuple(int(i) for i in data.get("cut_candidates", ()))
    return CircuitIR(n, tuple(ops), observable, candidates)


def _parse_observable(raw, n: int) -> OutputFunction:
    if isinstance(raw, str):
        return OutputFunction(n, zstring=raw)
    if isinstance(raw, dict) and raw.get("type") == "table":
        return OutputFunction(n, table=np.asarray(raw["values"], dtype=float))
    raise ValueError("observable must be an I/Z string or {'type': 'table', 'values': [...]}")


def serialize_circuit(circuit: CircuitIR, *, indent: int | None = 2) -> str:
    ops = []
    for op in circuit.ops:
        entry: dict = {"gate": op.name, "q": list(op.qubits)}
        if op.theta is not None:
            entry["theta"] = op.theta
        if op.paulis is not None:
            entry["paulis"] = op.paulis
        ops.append(entry)
    if circuit.observable.zstring is not None:
        obs = circuit.observable.zstring
    else:
        obs = {"type": "table", "values": list(map(float, circuit.observable.table))}
    payload = {
        "version": SCHEMA_VERSION,
        "n": circuit.n_qubits,
        "ops": ops,
        "observable": obs,
    }
    if circuit.cut_candidates:
        payload["cut_candidates"] = list(circuit.cut_candidates)
    return json.dumps(payload, indent=indent, sort_keys=True)


# --- example generators -----------------------------------------------------


def generate_qaoa_example(
    ring_size: int,
    long_edge: tuple[int, int],
    p: int,
    beta: "list[float] | np.ndarray",
    gamma: "list[float] | np.ndarray",
) -> CircuitIR:
    """Ring QAOA circuit with one extra long-range coupling.

    Layers alternate ``exp(i*gamma_k*Z_iZ_j)`` over the ring edges plus the
    long edge (unit couplings) and ``exp(i*beta_k*X)`` mixers. The long-edge
    rotations are flagged as cut candidates, one per layer. The observable is
    the edge-averaged coupling energy as a value table.
    """
    if ring_size < 4:
        raise ValueError("ring needs at least 4 qubits")
    i, j = long_edge
    if not (0 <= i < ring_size and 0 <= j < ring_size) or i == j:
        raise ValueError(f"long edge {long_edge} out of range")
    ring = {(q, (q + 1) % ring_size) for q in range(ring_size)}
    normalized = (min(i, j), max(i, j))
    if normalized in {(min(a, b), max(a, b)) for a, b in ring}:
        raise ValueError(f"edge {long_edge} already lies on the ring")
    if len(beta) != p or len(gamma) != p:
        raise ValueError(f"need {p} beta and gamma entries, got {len(beta)}, {len(gamma)}")

    edges = sorted((min(a, b), max(a, b)) for a, b in ring) + [normalized]
    ops = [Gate("H", (q,)) for q in range(ring_size)]
    flags = []
    for layer in range(p):
        for a, b in edges:
            if (a, b) == normalized:
                flags.append(len(ops))
            ops.append(Gate("RPP", (a, b), theta=float(gamma[layer]), paulis="ZZ"))
        for q in range(ring_size):
            ops.append(Gate("RX", (q,), theta=-2.0 * float(beta[layer])))

    table = np.zeros(2**ring_size)
    for bits in range(2**ring_size):
        energy = 0.0
        for a, b in edges:
            za = 1 - 2 * ((bits >> (ring_size - 1 - a)) & 1)
            zb = 1 - 2 * ((bits >> (ring_size - 1 - b)) & 1)
            energy += za * zb
        table[bits] = energy / len(edges)
    obs = OutputFunction(ring_size, table=table)
    return CircuitIR(ring_size, tuple(ops), obs, tuple(flags))


def generate_clustered_pair_example(
    layer_seed: int = 7, *, bridge: str = "CZ"
) -> CircuitIR:
    """Two 2-qubit clusters joined by a single bridging gate.

    Fixed random single-qubit layers surround intra-cluster CZs and the
    bridge CZ(1, 2); the observable is the full Z-string. The bridge op is
    flagged as the cut candidate.
    """
    rng = np.random.default_rng(layer_seed)

    def layer() -> list[Gate]:
        out = []
        for q in range(4):
            out.append(Gate("RZ", (q,), theta=float(rng.uniform(-np.pi, np.pi))))
            out.append(Gate("RX", (q,), theta=float(rng.uniform(-np.pi, np.pi))))
        return out

    ops: list[Gate] = []
    ops += layer()
    ops.append(Gate("CZ", (0, 1)))
    ops.append(Gate("CZ", (2, 3)))
    ops += layer()
    bridge_index = len(ops)
    ops.append(Gate(bridge, (1, 2)))
    ops += layer()
    obs = OutputFunction(4, zstring="ZZZZ")
    return CircuitIR(4, tuple(ops), obs, (bridge_index,))
