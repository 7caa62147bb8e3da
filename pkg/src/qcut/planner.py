"""Cost-driven cut planning: exhaustive subset search under a width budget.

The cost of a plan multiplies each gate cut's squared coefficient 1-norm with
16 per wire cut, which is ``9^Ms * 16^Mt`` when every gate cut is CZ-grade.
Search enumerates subsets of the candidate cut positions in increasing size
(capped), keeping the cheapest subset whose fragments all fit the qubit
budget; optimality is guaranteed only within the searched space.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

from .circuits import CircuitIR
from .densmat import WidthLimitError
from .fragments import CutSpec, FragmentSet, decomposition_for_gate, fragment

__all__ = ["Plan", "plan_cost", "plan_cuts", "plan_to_json"]


@dataclass(frozen=True)
class Plan:
    """Search result: the chosen cuts, their cost, and feasibility."""

    spec: CutSpec
    cost: float
    feasible: bool
    max_width: int
    evaluated: int
    capped: bool


def plan_cost(spec: CutSpec, circuit: CircuitIR) -> float:
    """Product of per-cut overhead factors: gamma^2 per gate cut, 16 per wire cut."""
    spec.validate(circuit)
    cost = 1.0
    for index in spec.gate_cuts:
        cost *= decomposition_for_gate(circuit.ops[index]).gamma ** 2
    cost *= 16.0 ** len(spec.wire_cuts)
    return cost


def _wire_candidates(circuit: CircuitIR) -> list[tuple[int, int]]:
    """Positions (qubit, after-op) strictly before the qubit's last op."""
    touches: dict[int, list[int]] = {q: [] for q in range(circuit.n_qubits)}
    for k, op in enumerate(circuit.ops):
        for q in op.qubits:
            touches[q].append(k)
    out = []
    for q, indices in touches.items():
        for k in indices[:-1]:
            out.append((q, k))
    return sorted(set(out))


def plan_cuts(
    circuit: CircuitIR,
    qubit_budget: int,
    *,
    allow_gate_cuts: bool = True,
    allow_wire_cuts: bool = True,
    candidate_cap: int = 2**20,
) -> Plan:
    """Find the cheapest cut set whose fragments fit ``qubit_budget`` qubits.

    Ties break toward fewer cuts, then lexicographically earlier specs. When
    no feasible subset exists within ``candidate_cap`` evaluations the result
    is marked infeasible rather than raising.
    """
    if qubit_budget < 1:
        raise ValueError("qubit budget must be positive")
    baseline = fragment(circuit, CutSpec())
    if baseline.max_width <= qubit_budget:
        return Plan(CutSpec(), 1.0, True, baseline.max_width, 1, False)

    gate_candidates = (
        [k for k, op in enumerate(circuit.ops) if op.is_cuttable] if allow_gate_cuts else []
    )
    wire_candidates = _wire_candidates(circuit) if allow_wire_cuts else []
    candidates: list[tuple[str, object, float]] = [
        ("gate", k, decomposition_for_gate(circuit.ops[k]).gamma ** 2)
        for k in gate_candidates
    ] + [("wire", pos, 16.0) for pos in wire_candidates]

    best: Plan | None = None
    best_key = None
    evaluated = 0
    capped = False
    min_factor = min((factor for _, _, factor in candidates), default=float("inf"))
    for size in range(1, len(candidates) + 1):
        if best is not None and min_factor > 1.0 and min_factor**size > best.cost:
            break
        for combo in itertools.combinations(range(len(candidates)), size):
            if evaluated >= candidate_cap:
                capped = True
                break
            evaluated += 1
            gate_cuts = tuple(
                candidates[i][1] for i in combo if candidates[i][0] == "gate"
            )
            wire_cuts = tuple(
                candidates[i][1] for i in combo if candidates[i][0] == "wire"
            )
            spec = CutSpec(gate_cuts=gate_cuts, wire_cuts=wire_cuts)
            frags = fragment(circuit, spec)
            if frags.max_width > qubit_budget:
                continue
            cost = plan_cost(spec, circuit)
            key = (cost, size, gate_cuts, wire_cuts)
            if best is None or key < best_key:
                best = Plan(spec, cost, True, frags.max_width, evaluated, False)
                best_key = key
        if capped:
            break
    if best is None:
        return Plan(CutSpec(), float("inf"), False, baseline.max_width, evaluated, capped)
    return Plan(
        best.spec, best.cost, True, best.max_width, evaluated, capped
    )


def plan_to_json(plan: Plan, fragments: FragmentSet | None = None, *, indent: int | None = 2) -> str:
    payload = {
        "gate_cuts": list(plan.spec.gate_cuts),
        "wire_cuts": [list(w) for w in plan.spec.wire_cuts],
        "cost": plan.cost,
        "feasible": plan.feasible,
        "max_width": plan.max_width,
        "evaluated": plan.evaluated,
        "capped": plan.capped,
    }
    if fragments is not None:
        payload["fragments"] = [
            {"width": t.width, "terminal_qubits": list(t.qubits), "segments": t.n_segments}
            for t in fragments.fragments
        ]
    return json.dumps(payload, indent=indent, sort_keys=True)
