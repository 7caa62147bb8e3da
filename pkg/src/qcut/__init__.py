"""Quasi-probability circuit cutting on a dense density-matrix simulator.

Decompose non-local gates, non-local projections, and wires into sampled
local operations, run the width-bounded fragments exactly or shot-by-shot,
and reconstruct expectation values with Monte-Carlo or equal-allocation
estimators, with every decomposition verifiable against its target channel.
"""

from .paulis import (
    PauliAxis,
    PauliTransferMatrix,
    PauliVector,
    expectation,
    pauli_vector_of_density,
    ptm_of_general_map,
    ptm_of_unitary,
    tensor,
)
from .cuts import (
    CutDecomposition,
    CutTerm,
    LocalChannelSpec,
    cnot_cut,
    cz_cut,
    gate_cut,
    measurement_cut,
    scaled_projection_cut,
    verify_cut,
    wire_cut,
)
from .densmat import (
    DensityState,
    OutputFunction,
    ShotOutcome,
    apply_unitary,
    exact_expectation,
    init_zero_state,
    measure_pauli_postselected,
    measure_pauli_sampled,
    run_shot,
)
from .circuits import CircuitIR, Gate, generate_qaoa_example, parse_circuit, serialize_circuit
from .fragments import CutSpec, ExecutablePlan, fragment
from .planner import Plan, plan_cost, plan_cuts
from .estimator import (
    Estimate,
    SampleBudget,
    empirical_variance,
    exact_cut_expectation,
    exact_uncut_expectation,
    run_equal_allocation,
    run_monte_carlo,
    sample_budget,
)
from .rng import ShotRng

__version__ = "0.1.0"
