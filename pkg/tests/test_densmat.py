import numpy as np
import pytest

from qcut.densmat import (
    ApplyMatrix,
    FragmentProgram,
    MeasureSign,
    OutputFunction,
    ReplaceQubit,
    WidthLimitError,
    apply_unitary,
    embed_operator,
    exact_expectation,
    exact_fragment_weights,
    init_zero_state,
    measure_pauli_postselected,
    measure_pauli_sampled,
    replace_qubit,
    run_shot,
)
from qcut.paulis import PauliAxis, ptm_of_general_map
from qcut.rng import ShotRng

from conftest import PAULI, lift, random_density, random_unitary

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def test_init_zero_state():
    one = init_zero_state(1)
    assert np.array_equal(one.matrix, np.diag([1, 0]).astype(complex))
    two = init_zero_state(2)
    assert np.linalg.matrix_rank(two.matrix) == 1
    assert two.matrix[0, 0] == 1
    for n in range(1, 7):
        assert init_zero_state(n).trace == pytest.approx(1.0)
    with pytest.raises(WidthLimitError):
        init_zero_state(13)
    with pytest.raises(WidthLimitError):
        init_zero_state(0)


def test_apply_unitary_examples():
    state = init_zero_state(1)
    flipped = apply_unitary(state, PAULI["X"], [0])
    assert np.array_equal(flipped.matrix, np.diag([0, 1]).astype(complex))
    back = apply_unitary(apply_unitary(state, H, [0]), H, [0])
    assert np.abs(back.matrix - state.matrix).max() < 1e-12


def test_apply_unitary_validation():
    state = init_zero_state(2)
    with pytest.raises(ValueError, match="distinct"):
        apply_unitary(state, np.eye(4), [0, 0])
    with pytest.raises(ValueError, match="range"):
        apply_unitary(state, np.eye(4), [0, 2])
    with pytest.raises(ValueError, match="unitary"):
        apply_unitary(state, 2 * np.eye(4), [0, 1])


def test_zz_rotation_with_local_phases_equals_cz():
    # exp(-i pi Z(x)Z/4) followed by exp(+i pi Z/4) on each qubit conjugates
    # like CZ on |++>
    plus2 = np.full((4, 4), 0.25, dtype=complex)
    from qcut.densmat import DensityState

    state = DensityState(2, plus2)
    zz = np.kron(PAULI["Z"], PAULI["Z"])
    u1 = np.cos(np.pi / 4) * np.eye(4) - 1j * np.sin(np.pi / 4) * zz
    state = apply_unitary(state, u1, [0, 1])
    rz = np.cos(np.pi / 4) * np.eye(2) + 1j * np.sin(np.pi / 4) * PAULI["Z"]
    state = apply_unitary(state, rz, [0])
    state = apply_unitary(state, rz, [1])
    cz = np.diag([1, 1, 1, -1]).astype(complex)
    want = cz @ plus2 @ cz.conj().T
    assert np.abs(state.matrix - want).max() < 1e-12


def test_trace_preserved_over_random_sequences(rng):
    state = init_zero_state(3)
    for _ in range(30):
        targets = sorted(rng.choice(3, size=2, replace=False).tolist())
        state = apply_unitary(state, random_unitary(rng, 4), targets)
    assert abs(state.trace - 1.0) < 1e-10


def test_measure_z_on_zero_is_deterministic():
    gen = ShotRng(1).generator(0)
    state = init_zero_state(1)
    for _ in range(32):
        post, sign = measure_pauli_sampled(state, PauliAxis.Z, 0, gen)
        assert sign == +1
        assert np.abs(post.matrix - state.matrix).max() < 1e-12


def test_measure_frequencies_follow_born_rule():
    stream = ShotRng(11)
    plus = apply_unitary(init_zero_state(1), H, [0])
    hits = 0
    shots = 100_000
    for i in range(shots):
        _, sign = measure_pauli_sampled(plus, PauliAxis.Z, 0, stream.generator(i))
        hits += sign > 0
    sigma = np.sqrt(0.25 / shots)
    assert abs(hits / shots - 0.5) < 3 * sigma + 1e-9

    hits = 0
    zero = init_zero_state(1)
    for i in range(shots):
        _, sign = measure_pauli_sampled(zero, PauliAxis.X, 0, stream.generator(i + shots))
        hits += sign > 0
    assert abs(hits / shots - 0.5) < 3 * sigma + 1e-9


def test_measure_rejects_identity_axis():
    with pytest.raises(ValueError):
        measure_pauli_sampled(init_zero_state(1), PauliAxis.I, 0, ShotRng(1).generator(0))


def test_postselected_branches():
    zero = init_zero_state(1)
    kept, p = measure_pauli_postselected(zero, PauliAxis.Z, 0, +1)
    assert p == pytest.approx(1.0)
    assert np.abs(kept.matrix - zero.matrix).max() < 1e-14

    dead, p = measure_pauli_postselected(zero, PauliAxis.Z, 0, -1)
    assert p == pytest.approx(0.0)
    assert np.abs(dead.matrix).max() < 1e-14

    branch, p = measure_pauli_postselected(zero, PauliAxis.X, 0, +1)
    assert p == pytest.approx(0.5)
    assert branch.trace == pytest.approx(0.5)
    assert np.abs(branch.matrix - np.full((2, 2), 0.25)).max() < 1e-14


def test_born_consistency_against_transfer_matrix(rng):
    # the signed reassembly sum_a a * P_a rho P_a matches (S(I+A)-S(I-A))/4
    for axis in (PauliAxis.X, PauliAxis.Y, PauliAxis.Z):
        rho = random_density(rng, 2)
        from qcut.densmat import DensityState

        state = DensityState(1, rho)
        plus, p_plus = measure_pauli_postselected(state, axis, 0, +1)
        minus, p_minus = measure_pauli_postselected(state, axis, 0, -1)
        assert p_plus + p_minus == pytest.approx(1.0, abs=1e-12)
        signed = plus.matrix - minus.matrix
        a = PAULI[axis.value]
        eye = np.eye(2)
        ptm = (
            ptm_of_general_map(eye + a, eye + a).entries
            - ptm_of_general_map(eye - a, eye - a).entries
        ) / 4.0
        from qcut.paulis import density_of_pauli_vector, pauli_vector_of_density

        vec = pauli_vector_of_density(rho)
        predicted = density_of_pauli_vector(
            type(vec)(1, ptm @ vec.coefficients)
        )
        assert np.abs(signed - predicted).max() < 1e-10


def test_replace_qubit_installs_fresh_state(rng):
    rho = random_density(rng, 4)
    from qcut.densmat import DensityState

    state = DensityState(2, rho)
    sigma = np.array([[0.25, 0], [0, 0.75]], dtype=complex)
    replaced = replace_qubit(state, 1, sigma)
    # reduced state on qubit 0 survives, qubit 1 becomes sigma
    reduced = np.trace(rho.reshape(2, 2, 2, 2), axis1=1, axis2=3)
    want = np.kron(reduced, sigma)
    assert np.abs(replaced.matrix - want).max() < 1e-12


def _trivial_program(n, steps=(), terminal=None, positions=None, slots=0):
    terminal = tuple(range(n)) if terminal is None else terminal
    positions = tuple(range(n)) if positions is None else positions
    return FragmentProgram(n, tuple(steps), terminal, positions, slots)


def test_run_shot_without_cuts_yields_zero_bits():
    program = _trivial_program(3)
    outcome = run_shot([program], 3, 0, ShotRng(3).generator(0))
    assert outcome.bits == (0, 0, 0)
    assert outcome.cut_signs == ()
    assert outcome.weight == 1.0


def test_run_shot_sign_measure_on_plus_is_balanced():
    h_full = embed_operator(H, [0], 1)
    program = _trivial_program(
        1, steps=[ApplyMatrix(h_full), MeasureSign(PauliAxis.Z, 0, 0)], slots=1
    )
    stream = ShotRng(5)
    ups = 0
    shots = 20_000
    for i in range(shots):
        outcome = run_shot([program], 1, 1, stream.generator(i))
        assert outcome.cut_signs[0] in (-1, 1)
        ups += outcome.cut_signs[0] > 0
    assert abs(ups / shots - 0.5) < 3 * np.sqrt(0.25 / shots)


def test_run_shot_streams_are_reproducible():
    program = _trivial_program(
        1, steps=[ApplyMatrix(embed_operator(H, [0], 1)), MeasureSign(PauliAxis.Z, 0, 0)], slots=1
    )

    def stream(seed):
        rng = ShotRng(seed)
        return [run_shot([program], 1, 1, rng.generator(i)) for i in range(50)]

    assert stream(8) == stream(8)
    assert stream(8) != stream(9)


def test_exact_expectation_of_empty_program_is_one():
    program = _trivial_program(2)
    obs = OutputFunction(2, zstring="ZZ")
    assert exact_expectation([program], obs) == pytest.approx(1.0)


def test_exact_expectation_matches_reference_simulator(rng):
    # random 4-qubit circuits without cuts against the kron-chain reference
    for _ in range(10):
        ops = []
        steps = []
        for _ in range(6):
            targets = sorted(rng.choice(4, size=2, replace=False).tolist())
            u = random_unitary(rng, 4)
            ops.append((u, targets, False))
            steps.append(ApplyMatrix(embed_operator(u, targets, 4)))
        table = rng.uniform(-1, 1, size=16)
        obs = OutputFunction(4, table=table)
        program = _trivial_program(4, steps=steps)
        got = exact_expectation([program], obs)
        want = sum(
            table[idx] * p
            for idx, p in enumerate(_reference_probs(ops, 4))
        )
        assert got == pytest.approx(want, abs=1e-10)


def _reference_probs(ops, n):
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1.0
    for u, targets, _ in ops:
        full = lift(u, targets, n)
        rho = full @ rho @ full.conj().T
    return np.real(np.diagonal(rho))


def test_sampled_mean_tracks_exact_value(rng):
    # per-shot sampling agrees with the closed form within 5 sigma
    for trial in range(5):
        n = int(rng.integers(2, 5))
        steps = []
        ops = []
        for _ in range(4):
            targets = sorted(rng.choice(n, size=min(2, n), replace=False).tolist())
            u = random_unitary(rng, 2 ** len(targets))
            ops.append((u, targets))
            steps.append(ApplyMatrix(embed_operator(u, targets, n)))
        program = _trivial_program(n, steps=steps)
        obs = OutputFunction(n, zstring="Z" * n)
        exact = exact_expectation([program], obs)
        shots = 20_000
        stream = ShotRng(100 + trial)
        total = 0.0
        for i in range(shots):
            outcome = run_shot([program], n, 0, stream.generator(i))
            value = 1.0
            for b in outcome.bits:
                value *= 1 - 2 * b
            total += value
        mean = total / shots
        assert abs(mean - exact) < 5 / np.sqrt(shots) + 1e-9


def test_exact_weights_reject_mid_run_sampling():
    from qcut.densmat import SampleBit

    program = _trivial_program(1, steps=[SampleBit(0, 0)], terminal=(), positions=())
    with pytest.raises(ValueError, match="mid-run"):
        exact_fragment_weights(program)


def test_output_function_validation():
    with pytest.raises(ValueError):
        OutputFunction(2, zstring="ZX")
    with pytest.raises(ValueError):
        OutputFunction(2, zstring="Z")
    with pytest.raises(ValueError):
        OutputFunction(1, table=np.array([1.5, 0.0]))
    with pytest.raises(ValueError):
        OutputFunction(1)
    with pytest.raises(ValueError):
        OutputFunction(1, zstring="Z", table=np.array([1.0, 1.0]))


def test_output_function_values():
    obs = OutputFunction(3, zstring="ZIZ")
    assert obs.value(0b000) == 1
    assert obs.value(0b100) == -1
    assert obs.value(0b101) == 1
    assert obs.value(0b010) == 1
    vec = obs.values_vector()
    assert vec.shape == (8,)
    assert vec[0b101] == 1
    table = OutputFunction(2, table=np.array([0.5, -0.5, 0.25, 1.0]))
    assert table.value(2) == pytest.approx(0.25)
    assert not table.factorizes
    sub = obs.restricted_zstring([0, 2])
    assert sub.zstring == "ZZ"


def test_width_limits_enforced():
    wide = _trivial_program(9)
    with pytest.raises(WidthLimitError):
        run_shot([wide], 9, 0, ShotRng(0).generator(0))
    huge = _trivial_program(13)
    with pytest.raises(WidthLimitError):
        exact_fragment_weights(huge)
