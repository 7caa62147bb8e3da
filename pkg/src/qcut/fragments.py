"""Cut-spec validation, circuit fragmentation, and program compilation.

A wire cut at ``(qubit, after_op)`` splits that qubit's timeline into
segments; gate cuts remove their two-qubit op and leave per-endpoint channel
slots. Fragments are the connected components of segments under the remaining
multi-qubit ops. Within a fragment, segments are packed onto simulator lines:
a line freed by a cut measurement (or an early terminal readout) can host a
later segment, which is what lets a wide circuit run on a narrow device.

Compilation produces, per fragment, an entry list mixing concrete simulator
steps with term-dependent holes (gate-cut endpoint channels, wire-cut readout
and preparation). :class:`ExecutablePlan` fills the holes for a term
selection and hands back runnable :class:`~qcut.densmat.FragmentProgram`
objects, in both per-shot (packed lines) and oracle (one line per segment)
flavors.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import cuts
from .circuits import CircuitIR, Gate, gate_matrix
from .cuts import CutDecomposition, LocalChannelSpec, PauliAxis, rotation_matrix
from .densmat import (
    ApplyMatrix,
    ApplyProjection,
    FragmentProgram,
    MeasureSign,
    ReplaceQubit,
    SampleBit,
    Step,
    WidthLimitError,
    embed_operator,
)

__all__ = [
    "CutSpec",
    "FragmentSet",
    "FragmentTemplate",
    "ExecutablePlan",
    "fragment",
    "decomposition_for_gate",
    "cut_spec_to_json",
    "cut_spec_from_json",
]

_ZERO_STATE = np.array([[1, 0], [0, 0]], dtype=complex)

# event phases within one op index: the op itself, then a cut measurement,
# then the paired re-preparation, then any terminal readout
_PH_OP, _PH_MEASURE, _PH_PREPARE, _PH_TERMINAL = 0, 1, 2, 3

Time = tuple[int, int]


@dataclass(frozen=True)
class CutSpec:
    """Gate cuts by op index; wire cuts by (qubit, after-op-index) position."""

    gate_cuts: tuple[int, ...] = ()
    wire_cuts: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gate_cuts", tuple(int(i) for i in self.gate_cuts))
        object.__setattr__(
            self, "wire_cuts", tuple((int(q), int(j)) for q, j in self.wire_cuts)
        )
        if len(set(self.gate_cuts)) != len(self.gate_cuts):
            raise ValueError("duplicate gate cut indices")
        if len(set(self.wire_cuts)) != len(self.wire_cuts):
            raise ValueError("duplicate wire cut positions")

    @property
    def n_space(self) -> int:
        return len(self.gate_cuts)

    @property
    def n_time(self) -> int:
        return len(self.wire_cuts)

    def validate(self, circuit: CircuitIR):
        for index in self.gate_cuts:
            if not 0 <= index < len(circuit.ops):
                raise ValueError(f"gate cut references op {index}, circuit has {len(circuit.ops)} ops")
            if not circuit.ops[index].is_cuttable:
                raise ValueError(
                    f"gate cut at op {index} ({circuit.ops[index].name}) targets a non-cuttable op"
                )
        for qubit, after in self.wire_cuts:
            if not 0 <= qubit < circuit.n_qubits:
                raise ValueError(f"wire cut on qubit {qubit} out of range")
            if not 0 <= after < len(circuit.ops):
                raise ValueError(f"wire cut position {after} out of range")


def cut_spec_to_json(spec: CutSpec, *, indent: int | None = 2) -> str:
    return json.dumps(
        {"gate_cuts": list(spec.gate_cuts), "wire_cuts": [list(w) for w in spec.wire_cuts]},
        indent=indent,
        sort_keys=True,
    )


def cut_spec_from_json(text: str) -> CutSpec:
    data = json.loads(text)
    return CutSpec(
        gate_cuts=tuple(data.get("gate_cuts", ())),
        wire_cuts=tuple((q, j) for q, j in data.get("wire_cuts", ())),
    )


def decomposition_for_gate(op: Gate) -> CutDecomposition:
    """Decomposition family matching a cuttable op."""
    if op.name == "CZ":
        return cuts.cz_cut()
    if op.name == "CNOT":
        return cuts.cnot_cut()
    if op.name == "RPP":
        return cuts.gate_cut(op.theta, PauliAxis(op.paulis[0]), PauliAxis(op.paulis[1]))
    if op.name == "PROJ":
        return cuts.scaled_projection_cut(PauliAxis(op.paulis[0]), PauliAxis(op.paulis[1]))
    raise ValueError(f"op {op.name!r} has no cut decomposition")


# --- analysis ----------------------------------------------------------------


@dataclass
class _Segment:
    qubit: int
    index: int
    incoming_cut: int | None = None  # wire-cut index preparing this segment
    outgoing_cut: int | None = None  # wire-cut index measuring it out
    terminal: bool = False
    first: Time | None = None
    last: Time | None = None

    def touch(self, time: Time):
        if self.first is None or time < self.first:
            self.first = time
        if self.last is None or time > self.last:
            self.last = time


@dataclass(frozen=True)
class _Event:
    time: Time
    kind: str  # "op" | "endpoint" | "measure" | "prepare" | "terminal"
    segments: tuple[int, ...]  # segment ids, in operand order where relevant
    op_index: int = -1
    cut_index: int = -1
    side: int = -1


@dataclass(frozen=True)
class FragmentTemplate:
    """One fragment: its events, line assignments, and reported width."""

    segments: tuple[int, ...]
    events: tuple[_Event, ...]
    width: int  # packed line count (device qubits needed)
    shot_lines: dict
    oracle_lines: dict
    reset_segments: frozenset
    qubits: tuple[int, ...]  # original qubits with a terminal bit here

    @property
    def n_segments(self) -> int:
        return len(self.segments)


@dataclass(frozen=True)
class FragmentSet:
    """Fragmentation result: templates plus the widest packed width."""

    fragments: tuple[FragmentTemplate, ...]
    max_width: int
    segments: tuple[_Segment, ...]


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def fragment(
    circuit: CircuitIR, spec: CutSpec, *, qubit_budget: int | None = None
) -> FragmentSet:
    """Split the circuit at the cuts and pack each fragment onto lines.

    With ``qubit_budget`` set, raises :class:`WidthLimitError` naming any
    fragment whose packed width exceeds it.
    """
    spec.validate(circuit)
    gate_cut_index = {op: i for i, op in enumerate(spec.gate_cuts)}
    cuts_by_qubit: dict[int, list[tuple[int, int]]] = {q: [] for q in range(circuit.n_qubits)}
    for l, (qubit, after) in enumerate(spec.wire_cuts):
        cuts_by_qubit[qubit].append((after, l))
    for positions in cuts_by_qubit.values():
        positions.sort()

    # segment ids per qubit: boundaries at the wire-cut positions
    segments: list[_Segment] = []
    seg_of: dict[int, list[tuple[int, int]]] = {}  # qubit -> [(boundary_after, seg_id)]
    for q in range(circuit.n_qubits):
        table = []
        for k, (after, l) in enumerate(cuts_by_qubit[q]):
            seg = _Segment(q, k)
            seg.outgoing_cut = l
            if k > 0:
                seg.incoming_cut = cuts_by_qubit[q][k - 1][1]
            table.append((after, len(segments)))
            segments.append(seg)
        seg = _Segment(q, len(cuts_by_qubit[q]), terminal=True)
        if cuts_by_qubit[q]:
            seg.incoming_cut = cuts_by_qubit[q][-1][1]
        table.append((len(circuit.ops), len(segments)))
        segments.append(seg)
        seg_of[q] = table

    def active_segment(qubit: int, op_index: int) -> int:
        for after, seg_id in seg_of[qubit]:
            if op_index <= after:
                return seg_id
        raise AssertionError("op index beyond the final segment")

    events: list[_Event] = []
    union = _UnionFind(len(segments))
    for k, op in enumerate(circuit.ops):
        operand_segs = tuple(active_segment(q, k) for q in op.qubits)
        time = (k, _PH_OP)
        for s in operand_segs:
            segments[s].touch(time)
        if k in gate_cut_index:
            ci = gate_cut_index[k]
            for side, s in enumerate(operand_segs):
                events.append(_Event(time, "endpoint", (s,), op_index=k, cut_index=ci, side=side))
        else:
            events.append(_Event(time, "op", operand_segs, op_index=k))
            for s in operand_segs[1:]:
                union.union(operand_segs[0], s)
    for l, (qubit, after) in enumerate(spec.wire_cuts):
        upstream = next(
            seg_id for seg_after, seg_id in seg_of[qubit] if seg_after == after
        )
        downstream = upstream + 1  # same qubit's segments are created consecutively
        events.append(_Event((after, _PH_MEASURE), "measure", (upstream,), cut_index=l))
        segments[upstream].touch((after, _PH_MEASURE))
        events.append(_Event((after, _PH_PREPARE), "prepare", (downstream,), cut_index=l))
        segments[downstream].touch((after, _PH_PREPARE))
    for s, seg in enumerate(segments):
        if seg.terminal:
            if seg.first is None:
                # untouched |0> line: give it an instant at the very start
                seg.touch((-1, _PH_TERMINAL))
            time = (seg.last[0], _PH_TERMINAL)
            events.append(_Event(time, "terminal", (s,)))
            seg.touch(time)

    events.sort(key=lambda e: e.time)

    groups: dict[int, list[int]] = {}
    for s in range(len(segments)):
        groups.setdefault(union.find(s), []).append(s)

    templates = []
    for root in sorted(groups):
        members = sorted(groups[root])
        member_set = set(members)
        frag_events = tuple(e for e in events if e.segments[0] in member_set)
        shot_lines, width, reused = _pack_lines(members, segments)
        oracle_lines = {s: i for i, s in enumerate(members)}
        reset = frozenset(
            s for s in reused if segments[s].incoming_cut is None
        )
        qubits = tuple(
            sorted(segments[s].qubit for s in members if segments[s].terminal)
        )
        templates.append(
            FragmentTemplate(
                segments=tuple(members),
                events=frag_events,
                width=width,
                shot_lines=shot_lines,
                oracle_lines=oracle_lines,
                reset_segments=reset,
                qubits=qubits,
            )
        )
    max_width = max((t.width for t in templates), default=0)
    if qubit_budget is not None:
        for t in templates:
            if t.width > qubit_budget:
                raise WidthLimitError(
                    f"fragment over qubits {t.qubits} needs width {t.width}, budget is {qubit_budget}"
                )
    return FragmentSet(tuple(templates), max_width, tuple(segments))


def _pack_lines(
    members: list[int], segments: list[_Segment]
) -> tuple[dict, int, set]:
    """Greedy interval packing of segment lifetimes onto lines."""
    order = sorted(members, key=lambda s: segments[s].first)
    release: list[Time] = []  # per line, when it frees up
    assignment: dict[int, int] = {}
    reused: set[int] = set()
    for s in order:
        seg = segments[s]
        line = None
        for i, freed in enumerate(release):
            if freed < seg.first:
                line = i
                break
        if line is None:
            line = len(release)
            release.append(seg.last)
        else:
            release[line] = seg.last
            reused.add(s)
        assignment[s] = line
    return assignment, len(release), reused


# --- compilation -------------------------------------------------------------


@dataclass(frozen=True)
class _Hole:
    kind: str  # "endpoint" | "measure" | "prepare"
    cut_index: int
    side: int
    line: int


Entry = Step | _Hole


@dataclass
class _CompiledFragment:
    entries: tuple[Entry, ...]
    width: int
    terminal_lines: tuple[int, ...]
    bit_positions: tuple[int, ...]


def _coalesce_unitaries(steps: Sequence[Step]) -> tuple[Step, ...]:
    """Fuse runs of adjacent unitaries into single full-width matrices."""
    out: list[Step] = []
    for step in steps:
        if isinstance(step, ApplyMatrix) and out and isinstance(out[-1], ApplyMatrix):
            out[-1] = ApplyMatrix(step.matrix @ out[-1].matrix)
        else:
            out.append(step)
    return tuple(out)


class ExecutablePlan:
    """A circuit, its cuts, and precompiled fragment programs.

    Gate cut ``k`` draws terms from ``decompositions[k]``; wire cuts share the
    eight-term wire decomposition. ``programs(selection)`` returns runnable
    fragment programs with every hole filled, cached per selection.
    """

    def __init__(self, circuit: CircuitIR, spec: CutSpec, *, qubit_budget: int | None = None):
        self.circuit = circuit
        self.spec = spec
        self.fragment_set = fragment(circuit, spec, qubit_budget=qubit_budget)
        self.decompositions = tuple(
            decomposition_for_gate(circuit.ops[i]) for i in spec.gate_cuts
        )
        self.wire = cuts.wire_cut()
        self.n_space = spec.n_space
        self.n_time = spec.n_time
        self.n_slots = self.n_space + self.n_time
        self.term_counts = tuple(
            [len(d.terms) for d in self.decompositions] + [len(self.wire.terms)] * self.n_time
        )
        self._shot = [
            self._compile(t, per_shot=True) for t in self.fragment_set.fragments
        ]
        self._oracle = [
            self._compile(t, per_shot=False) for t in self.fragment_set.fragments
        ]
        self._fill_cache: dict = {}
        self._program_cache: dict = {}

    # -- compilation helpers

    def _compile(self, template: FragmentTemplate, *, per_shot: bool) -> _CompiledFragment:
        lines = template.shot_lines if per_shot else template.oracle_lines
        width = template.width if per_shot else template.n_segments
        segments = self.fragment_set.segments
        entries: list[Entry] = []
        started: set[int] = set()
        terminal_lines: list[int] = []
        bit_positions: list[int] = []

        def ensure_started(seg_id: int):
            if seg_id in started:
                return
            started.add(seg_id)
            if per_shot and seg_id in template.reset_segments:
                entries.append(ReplaceQubit(lines[seg_id], _ZERO_STATE))

        # a terminal line needs in-place sampling only if another segment
        # takes the line over afterwards; otherwise it survives to the end
        reused_after: set[int] = set()
        if per_shot:
            for s in template.segments:
                for t in template.segments:
                    if (
                        t != s
                        and lines[t] == lines[s]
                        and segments[t].first > segments[s].last
                    ):
                        reused_after.add(s)

        for event in template.events:
            if event.kind == "op":
                for s in event.segments:
                    ensure_started(s)
                op = self.circuit.ops[event.op_index]
                targets = [lines[s] for s in event.segments]
                matrix = embed_operator(gate_matrix(op), targets, width)
                entries.append(
                    ApplyProjection(matrix) if op.is_projection else ApplyMatrix(matrix)
                )
            elif event.kind == "endpoint":
                ensure_started(event.segments[0])
                entries.append(
                    _Hole("endpoint", event.cut_index, event.side, lines[event.segments[0]])
                )
            elif event.kind == "measure":
                ensure_started(event.segments[0])
                entries.append(_Hole("measure", event.cut_index, 0, lines[event.segments[0]]))
            elif event.kind == "prepare":
                started.add(event.segments[0])
                entries.append(_Hole("prepare", event.cut_index, 1, lines[event.segments[0]]))
            else:  # terminal
                seg_id = event.segments[0]
                ensure_started(seg_id)
                position = segments[seg_id].qubit
                if per_shot and seg_id in reused_after:
                    zero = np.zeros((2, 2), dtype=complex)
                    zero[0, 0] = 1.0
                    entries.append(
                        SampleBit(
                            lines[seg_id],
                            position,
                            embed_operator(zero, [lines[seg_id]], width),
                        )
                    )
                else:
                    terminal_lines.append(lines[seg_id])
                    bit_positions.append(position)
        return _CompiledFragment(tuple(entries), width, tuple(terminal_lines), tuple(bit_positions))

    def _sign_measure_step(self, axis: PauliAxis, line: int, width: int, slot: int) -> MeasureSign:
        matrix = axis.matrix
        projector = (np.eye(2, dtype=complex) + matrix) / 2
        return MeasureSign(
            axis,
            line,
            slot,
            projector=embed_operator(projector, [line], width),
            axis_full=embed_operator(matrix, [line], width),
        )

    def _channel_steps(
        self, channels: Sequence[LocalChannelSpec], line: int, width: int, slot: int
    ) -> tuple[Step, ...]:
        steps: list[Step] = []
        for spec in channels:
            if spec.kind == "identity":
                continue
            if spec.kind == "apply_pauli":
                steps.append(ApplyMatrix(embed_operator(spec.axis.matrix, [line], width)))
            elif spec.kind == "rotate":
                steps.append(
                    ApplyMatrix(
                        embed_operator(rotation_matrix(spec.axis, spec.angle), [line], width)
                    )
                )
            elif spec.kind == "sign_measure":
                steps.append(self._sign_measure_step(spec.axis, line, width, slot))
            else:
                raise ValueError(
                    f"channel kind {spec.kind!r} cannot run inside a fragment program"
                )
        return tuple(steps)

    def _hole_fill(self, hole: _Hole, term: int, width: int, flavor: str) -> tuple[Step, ...]:
        key = (hole, term, flavor)
        cached = self._fill_cache.get(key)
        if cached is not None:
            return cached
        if hole.kind == "endpoint":
            decomp = self.decompositions[hole.cut_index]
            channels = decomp.terms[term].channels[hole.side]
            steps = self._channel_steps(channels, hole.line, width, hole.cut_index)
        elif hole.kind == "measure":
            (read,), _ = self.wire.terms[term].channels
            if read.observable == "I":
                steps = ()
            else:
                steps = (
                    self._sign_measure_step(
                        PauliAxis(read.observable),
                        hole.line,
                        width,
                        self.n_space + hole.cut_index,
                    ),
                )
        else:  # prepare
            _, (prep,) = self.wire.terms[term].channels
            steps = (ReplaceQubit(hole.line, cuts.PREPARE_STATES[prep.state]),)
        self._fill_cache[key] = steps
        return steps

    # -- public surface

    @property
    def max_width(self) -> int:
        return self.fragment_set.max_width

    def selections(self) -> Iterable[tuple[int, ...]]:
        """Every term combination, lexicographic."""
        return itertools.product(*(range(c) for c in self.term_counts))

    def coefficient(self, selection: Sequence[int]) -> float:
        out = 1.0
        for k, term in enumerate(selection[: self.n_space]):
            out *= self.decompositions[k].terms[term].coefficient
        for term in selection[self.n_space :]:
            out *= self.wire.terms[term].coefficient
        return out

    def sampling_scale(self) -> int:
        """Uniform-sampling rescale factor: the size of the term grid."""
        out = 1
        for c in self.term_counts:
            out *= c
        return out

    def magnitude_bound(self) -> float:
        """Worst-case |X| for uniform term sampling."""
        out = 1.0
        for k, d in enumerate(self.decompositions):
            out *= len(d.terms) * max(abs(t.coefficient) for t in d.terms)
        out *= (len(self.wire.terms) * 0.5) ** self.n_time
        return out

    def gamma(self) -> float:
        """Product of per-cut coefficient 1-norms."""
        out = 1.0
        for d in self.decompositions:
            out *= d.gamma
        out *= self.wire.gamma**self.n_time
        return out

    def programs(self, selection: Sequence[int], flavor: str = "shots") -> tuple[FragmentProgram, ...]:
        selection = tuple(selection)
        if len(selection) != len(self.term_counts):
            raise ValueError(
                f"selection needs {len(self.term_counts)} entries, got {len(selection)}"
            )
        key = (selection, flavor)
        cached = self._program_cache.get(key)
        if cached is not None:
            return cached
        compiled = self._shot if flavor == "shots" else self._oracle
        programs = []
        for frag in compiled:
            steps: list[Step] = []
            for entry in frag.entries:
                if isinstance(entry, _Hole):
                    term = selection[
                        entry.cut_index if entry.kind == "endpoint" else self.n_space + entry.cut_index
                    ]
                    steps.extend(self._hole_fill(entry, term, frag.width, flavor))
                else:
                    steps.append(entry)
            programs.append(
                FragmentProgram(
                    width=frag.width,
                    steps=_coalesce_unitaries(steps),
                    terminal_lines=frag.terminal_lines,
                    bit_positions=frag.bit_positions,
                    n_slots=self.n_slots,
                )
            )
        result = tuple(programs)
        self._program_cache[key] = result
        return result
