"""Dense density-matrix simulation of fragment programs.

Two execution modes share one instruction set:

* per-shot -- Born-rule sampling of every measurement, producing a
  :class:`ShotOutcome` with the terminal bits, the +-1 signs recorded at cuts,
  and a multiplicative weight (0/1 indicators from projections);
* oracle -- closed-form evolution where sign-carrying measurements become
  their signed expectation map ``rho -> (A rho + rho A)/2`` and projections
  stay unnormalized, yielding exact signed weights over the terminal bits.

States are dense complex matrices (not statevectors) because postselected and
sign-carrying branches are maps on density matrices. Widths are capped at
:data:`ORACLE_QUBIT_LIMIT` / :data:`SHOT_QUBIT_LIMIT` to keep desk-scale runs
fast.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .paulis import AXIS_MATRICES, PauliAxis

__all__ = [
    "ORACLE_QUBIT_LIMIT",
    "SHOT_QUBIT_LIMIT",
    "WidthLimitError",
    "DensityState",
    "ShotOutcome",
    "OutputFunction",
    "init_zero_state",
    "embed_operator",
    "apply_unitary",
    "measure_pauli_sampled",
    "measure_pauli_postselected",
    "replace_qubit",
    "ApplyMatrix",
    "ApplyProjection",
    "MeasureSign",
    "ReplaceQubit",
    "SampleBit",
    "FragmentProgram",
    "run_fragment_shot",
    "run_shot",
    "exact_fragment_weights",
    "exact_expectation",
]

ORACLE_QUBIT_LIMIT = 12
SHOT_QUBIT_LIMIT = 8

_PROB_TOL = 1e-12


class WidthLimitError(ValueError):
    """A program or state exceeds the configured qubit limit."""


@dataclass(frozen=True)
class DensityState:
    """Dense density matrix on ``n_qubits`` lines (qubit 0 most significant)."""

    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        dim = 2**self.n_qubits
        if m.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix, got {m.shape}")
        herm = np.abs(m - m.conj().T).max()
        if herm > 1e-10:
            raise ValueError(f"state is not Hermitian: deviation {herm:.3e}")
        object.__setattr__(self, "matrix", m)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


def init_zero_state(n_qubits: int, *, limit: int = ORACLE_QUBIT_LIMIT) -> DensityState:
    """Pure ``|0...0><0...0|`` on ``n_qubits`` lines."""
    if not 1 <= n_qubits <= limit:
        raise WidthLimitError(f"qubit count {n_qubits} outside the allowed range 1..{limit}")
    m = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
    m[0, 0] = 1.0
    return DensityState(n_qubits, m)


def embed_operator(op: np.ndarray, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    """Embed a k-qubit operator on ``targets`` into the full 2^n space."""
    op = np.asarray(op, dtype=complex)
    targets = list(targets)
    k = len(targets)
    if op.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {op.shape} does not match {k} target qubit(s)")
    if len(set(targets)) != k:
        raise ValueError(f"target qubits must be distinct, got {targets}")
    if any(t < 0 or t >= n_qubits for t in targets):
        raise ValueError(f"target qubits {targets} out of range for {n_qubits} qubits")
    rest = [q for q in range(n_qubits) if q not in targets]
    full = np.kron(op, np.eye(2 ** (n_qubits - k), dtype=complex))
    # full acts on axis order (targets..., rest...); permute to natural order
    order = targets + rest
    perm = [order.index(q) for q in range(n_qubits)]
    tensorized = full.reshape((2,) * (2 * n_qubits))
    tensorized = tensorized.transpose(perm + [n_qubits + p for p in perm])
    return np.ascontiguousarray(tensorized.reshape(2**n_qubits, 2**n_qubits))


def apply_unitary(state: DensityState, u: np.ndarray, targets: Sequence[int]) -> DensityState:
    """Conjugate the state by ``u`` acting on ``targets``; trace-preserving."""
    full = embed_operator(u, targets, state.n_qubits)
    deviation = np.abs(full.conj().T @ full - np.eye(full.shape[0])).max()
    if deviation > 1e-10:
        raise ValueError(f"matrix is not unitary: deviation norm {deviation:.3e}")
    return DensityState(state.n_qubits, full @ state.matrix @ full.conj().T)


def _axis_projector(axis: PauliAxis, alpha: int) -> np.ndarray:
    return (np.eye(2, dtype=complex) + alpha * AXIS_MATRICES[axis]) / 2


def _branch_probability(rho: np.ndarray, proj: np.ndarray) -> float:
    p = float(np.einsum("ij,ji->", proj, rho).real)
    if p < -_PROB_TOL or p > 1 + _PROB_TOL:
        raise RuntimeError(f"branch probability {p!r} outside [0, 1]")
    return min(max(p, 0.0), 1.0)


def measure_pauli_sampled(
    state: DensityState, axis: PauliAxis, target: int, rng: np.random.Generator
) -> tuple[DensityState, int]:
    """Projective measurement of a Pauli axis with Born-rule sampling.

    Returns the renormalized post-measurement state and the sampled sign. An
    outcome of probability zero is never drawn.
    """
    if axis is PauliAxis.I:
        raise ValueError("measurement axis must be X, Y, or Z")
    proj = embed_operator(_axis_projector(axis, +1), [target], state.n_qubits)
    rho, sign = _sample_branch(state.matrix, proj, rng)
    return DensityState(state.n_qubits, rho), sign


def _sample_branch(
    rho: np.ndarray, proj_plus: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, int]:
    p_plus = _branch_probability(rho, proj_plus)
    # one uniform draw per measurement keeps the stream layout fixed
    u = rng.random()
    if p_plus >= 1.0 or (u < p_plus and p_plus > 0.0):
        sign, proj, p = +1, proj_plus, p_plus
    else:
        eye = np.eye(proj_plus.shape[0])
        sign, proj, p = -1, eye - proj_plus, 1.0 - p_plus
    return proj @ rho @ proj / p, sign


def measure_pauli_postselected(
    state: DensityState, axis: PauliAxis, target: int, alpha: int
) -> tuple[DensityState, float]:
    """Unnormalized branch ``P_a rho P_a`` and its trace.

    The relation to the ``I + alpha*A`` sandwich carries a factor 4 times the
    branch probability, which is left to the caller so that zero-probability
    branches stay exact.
    """
    if axis is PauliAxis.I:
        raise ValueError("measurement axis must be X, Y, or Z")
    if alpha not in (+1, -1):
        raise ValueError(f"alpha must be +-1, got {alpha}")
    proj = embed_operator(_axis_projector(axis, alpha), [target], state.n_qubits)
    branch = proj @ state.matrix @ proj
    return DensityState(state.n_qubits, branch), _branch_probability(state.matrix, proj)


def replace_qubit(state: DensityState, target: int, sigma: np.ndarray) -> DensityState:
    """Discard line ``target`` and install the single-qubit state ``sigma``."""
    return DensityState(
        state.n_qubits, _replace_line(state.matrix, target, sigma, state.n_qubits)
    )


def _replace_line(rho: np.ndarray, line: int, sigma: np.ndarray, width: int) -> np.ndarray:
    t = rho.reshape((2,) * (2 * width))
    reduced = np.trace(t, axis1=line, axis2=width + line)  # partial trace of the line
    remaining = width - 1
    reduced = reduced.reshape(2**remaining, 2**remaining)
    grown = np.kron(sigma, reduced).reshape((2,) * (2 * width))
    # kron put sigma at position 0; rotate it into `line`
    perm = list(range(1, line + 1)) + [0] + list(range(line + 1, width))
    grown = grown.transpose(perm + [width + p for p in perm])
    return np.ascontiguousarray(grown.reshape(2**width, 2**width))


# --- fragment programs ------------------------------------------------------


@dataclass(frozen=True)
class ApplyMatrix:
    """Unitary conjugation by a pre-embedded full-width matrix."""

    matrix: np.ndarray


@dataclass(frozen=True)
class ApplyProjection:
    """Pre-embedded projector P: unnormalized ``P rho P`` in oracle mode, a
    sampled 0/1 indicator weight in per-shot mode."""

    matrix: np.ndarray


@dataclass(frozen=True)
class MeasureSign:
    """Sign-carrying Pauli measurement on one line feeding a sign slot.

    Per shot: Born-sample, keep the normalized branch, multiply the slot by
    the outcome. Oracle: apply the signed expectation map
    ``rho -> (A rho + rho A)/2``. The embedded projector and axis matrix may
    be precomputed by the compiler; they are derived on the fly otherwise.
    """

    axis: PauliAxis
    line: int
    slot: int
    projector: np.ndarray | None = None  # embedded (I + A)/2
    axis_full: np.ndarray | None = None  # embedded A


@dataclass(frozen=True)
class ReplaceQubit:
    """Measure out a line implicitly and install a fresh single-qubit state."""

    line: int
    sigma: np.ndarray


@dataclass(frozen=True)
class SampleBit:
    """Computational-basis measurement of one line, recorded at a global bit
    position. Emitted at a terminal segment's last touch so its line can be
    reused afterwards; per-shot only."""

    line: int
    position: int
    projector: np.ndarray | None = None  # embedded |0><0| on the line


Step = ApplyMatrix | ApplyProjection | MeasureSign | ReplaceQubit | SampleBit


@dataclass(frozen=True)
class FragmentProgram:
    """Width-resolved instruction list executable on the dense simulator.

    ``terminal_lines[i]`` produces the output bit at global position
    ``bit_positions[i]``; ``n_slots`` is the number of cut-sign slots the
    program may write.
    """

    width: int
    steps: tuple[Step, ...]
    terminal_lines: tuple[int, ...]
    bit_positions: tuple[int, ...]
    n_slots: int = 0

    def __post_init__(self):
        if len(self.terminal_lines) != len(self.bit_positions):
            raise ValueError("terminal lines and bit positions must pair off")


@dataclass(frozen=True)
class ShotOutcome:
    """Result of one sampled pass over a set of fragment programs."""

    bits: tuple[int, ...]
    cut_signs: tuple[int, ...]
    weight: float


@dataclass(frozen=True)
class OutputFunction:
    """Diagonal output observable: a Pauli-Z string or an explicit table.

    Values are bounded by 1 in magnitude, as the sampling error analysis
    requires. Bitstrings index with qubit 0 as the most significant bit.
    """

    n_bits: int
    zstring: str | None = None
    table: np.ndarray | None = None

    def __post_init__(self):
        if (self.zstring is None) == (self.table is None):
            raise ValueError("provide exactly one of zstring or table")
        if self.zstring is not None:
            if len(self.zstring) != self.n_bits or set(self.zstring) - set("IZ"):
                raise ValueError(
                    f"zstring must be a length-{self.n_bits} string over I/Z, "
                    f"got {self.zstring!r}"
                )
        else:
            table = np.asarray(self.table, dtype=float)
            if table.shape != (2**self.n_bits,):
                raise ValueError(
                    f"table must have {2 ** self.n_bits} entries, got {table.shape}"
                )
            if np.abs(table).max() > 1 + 1e-12:
                raise ValueError("output function values must lie in [-1, 1]")
            table.setflags(write=False)
            object.__setattr__(self, "table", table)

    @property
    def factorizes(self) -> bool:
        return self.zstring is not None

    def value(self, bits: int) -> float:
        if self.table is not None:
            return float(self.table[bits])
        acc = 1.0
        for q, ch in enumerate(self.zstring):
            if ch == "Z" and (bits >> (self.n_bits - 1 - q)) & 1:
                acc = -acc
        return acc

    def values_vector(self) -> np.ndarray:
        if self.table is not None:
            return self.table
        out = np.ones(1)
        for ch in self.zstring:
            out = np.kron(out, np.array([1.0, -1.0]) if ch == "Z" else np.ones(2))
        return out

    def restricted_zstring(self, positions: Sequence[int]) -> "OutputFunction":
        """Z-string factor living on the given global bit positions."""
        if self.zstring is None:
            raise ValueError("only Z-string observables factorize over fragments")
        sub = "".join(self.zstring[p] for p in positions)
        return OutputFunction(len(positions), zstring=sub)


def run_fragment_shot(
    program: FragmentProgram,
    rng: np.random.Generator,
    signs: np.ndarray,
    bits: "list[int] | np.ndarray",
) -> float:
    """Sample one execution of the program; returns the 0/1 indicator weight.

    Cut signs multiply into the shared ``signs`` buffer; sampled output bits
    are written into ``bits`` at their global positions, both by ``SampleBit``
    steps and by a joint terminal measurement when ``terminal_lines`` is set.
    """
    if program.width > SHOT_QUBIT_LIMIT:
        raise WidthLimitError(
            f"fragment width {program.width} exceeds the per-shot limit {SHOT_QUBIT_LIMIT}"
        )
    width = program.width
    rho = np.zeros((2**width, 2**width), dtype=complex)
    rho[0, 0] = 1.0
    for step in program.steps:
        if isinstance(step, ApplyMatrix):
            rho = step.matrix @ rho @ step.matrix.conj().T
        elif isinstance(step, MeasureSign):
            proj = step.projector
            if proj is None:
                proj = embed_operator(_axis_projector(step.axis, +1), [step.line], width)
            rho, sign = _sample_branch(rho, proj, rng)
            signs[step.slot] *= sign
        elif isinstance(step, SampleBit):
            proj = step.projector
            if proj is None:
                zero = np.zeros((2, 2), dtype=complex)
                zero[0, 0] = 1.0
                proj = embed_operator(zero, [step.line], width)
            rho, sign = _sample_branch(rho, proj, rng)
            bits[step.position] = 0 if sign > 0 else 1
        elif isinstance(step, ReplaceQubit):
            rho = _replace_line(rho, step.line, step.sigma, width)
        elif isinstance(step, ApplyProjection):
            p = _branch_probability(rho, step.matrix)
            if rng.random() >= p:
                return 0.0  # orthogonal branch: the shot contributes nothing
            rho = step.matrix @ rho @ step.matrix / p
        else:  # pragma: no cover - exhaustive over Step
            raise TypeError(f"unknown step {step!r}")
    if program.terminal_lines:
        probs = _terminal_probabilities(rho, program)
        total = probs.sum()
        if total <= 0:
            return 0.0
        joint = int(np.searchsorted(np.cumsum(probs), rng.random() * total, side="right"))
        joint = min(joint, len(probs) - 1)
        k = len(program.terminal_lines)
        for i, pos in enumerate(program.bit_positions):
            bits[pos] = (joint >> (k - 1 - i)) & 1
    return 1.0


def _terminal_probabilities(rho: np.ndarray, program: FragmentProgram) -> np.ndarray:
    width = program.width
    diag = np.clip(np.diagonal(rho).real, 0.0, None)
    if not program.terminal_lines:
        return np.ones(1) * diag.sum()
    tensor = diag.reshape((2,) * width)
    drop = [q for q in range(width) if q not in program.terminal_lines]
    if drop:
        tensor = tensor.sum(axis=tuple(drop))
    kept = [q for q in range(width) if q not in drop]
    order = [kept.index(line) for line in program.terminal_lines]
    tensor = tensor.transpose(order)
    return tensor.reshape(-1)


def run_shot(
    programs: Sequence[FragmentProgram],
    n_bits: int,
    n_slots: int,
    rng: np.random.Generator,
) -> ShotOutcome:
    """One sampled pass over every fragment, assembling the global bitstring.

    Fragments execute in order; the outcome is deterministic given the
    generator state, so keyed per-shot streams make whole runs reproducible.
    Bits no fragment produces stay 0.
    """
    signs = [1] * n_slots
    bits = [0] * n_bits
    weight = 1.0
    for program in programs:
        weight *= run_fragment_shot(program, rng, signs, bits)
    return ShotOutcome(tuple(bits), tuple(signs), weight)


def exact_fragment_weights(program: FragmentProgram) -> np.ndarray:
    """Signed weight vector over the fragment's terminal bits (oracle mode).

    Entry ``w[b]`` is the coefficient of outcome ``b`` after evolving through
    unitaries, signed measurement maps, replacements, and unnormalized
    projections; weights sum to the program's signed trace.
    """
    if program.width > ORACLE_QUBIT_LIMIT:
        raise WidthLimitError(
            f"fragment width {program.width} exceeds the oracle limit {ORACLE_QUBIT_LIMIT}"
        )
    width = program.width
    rho = np.zeros((2**width, 2**width), dtype=complex)
    rho[0, 0] = 1.0
    for step in program.steps:
        if isinstance(step, SampleBit):
            raise ValueError("closed-form evaluation requires a program without mid-run bit sampling")
        if isinstance(step, ApplyMatrix):
            rho = step.matrix @ rho @ step.matrix.conj().T
        elif isinstance(step, MeasureSign):
            a = step.axis_full
            if a is None:
                a = embed_operator(AXIS_MATRICES[step.axis], [step.line], width)
            rho = (a @ rho + rho @ a) / 2.0
        elif isinstance(step, ReplaceQubit):
            rho = _replace_line(rho, step.line, step.sigma, width)
        elif isinstance(step, ApplyProjection):
            rho = step.matrix @ rho @ step.matrix
        else:  # pragma: no cover - exhaustive over Step
            raise TypeError(f"unknown step {step!r}")
    diag = np.diagonal(rho).real
    if not program.terminal_lines:
        return np.ones(1) * diag.sum()
    tensor = diag.reshape((2,) * width)
    drop = [q for q in range(width) if q not in program.terminal_lines]
    if drop:
        tensor = tensor.sum(axis=tuple(drop))
    kept = [q for q in range(width) if q not in drop]
    order = [kept.index(line) for line in program.terminal_lines]
    return tensor.transpose(order).reshape(-1).copy()


def exact_expectation(
    programs: Sequence[FragmentProgram], obs: OutputFunction
) -> float:
    """Closed-form signed expectation of ``obs`` over the fragments' bits.

    Contracts each fragment's exact weight vector against the output function.
    Bits not produced by any fragment are taken as 0.
    """
    full = np.ones(1)
    positions: list[int] = []
    for program in programs:
        full = np.kron(full, exact_fragment_weights(program))
        positions.extend(program.bit_positions)
    missing = [p for p in range(obs.n_bits) if p not in positions]
    if missing:
        weights = np.zeros(2)
        weights[0] = 1.0
        for _ in missing:
            full = np.kron(full, weights)
        positions.extend(missing)
    if sorted(positions) != list(range(obs.n_bits)):
        raise ValueError(f"fragments produce bit positions {sorted(positions)}, expected 0..{obs.n_bits - 1}")
    # reorder the kron axes into global bit order
    tensor = full.reshape((2,) * obs.n_bits)
    order = [positions.index(p) for p in range(obs.n_bits)]
    tensor = tensor.transpose(order).reshape(-1)
    return float(tensor @ obs.values_vector())
