"""Monte-Carlo and equal-allocation estimators over cut circuits.

The Monte-Carlo estimator draws a term for every cut uniformly (optionally
proportionally to |coefficient|), runs all fragments once per shot, and
averages the rescaled weighted samples; the shot budget guaranteeing accuracy
``epsilon`` with failure probability ``delta`` is
``ceil(2 * 9^Ms * 16^Mt / epsilon^2 * ln(1/(2 delta)))`` for plans whose gate
cuts are CZ-grade (a refined budget from the actual per-cut magnitudes is also
available).

The equal-allocation estimator instead runs the same number of shots for every
term in the grid, forms sign-weighted per-fragment means, and combines them
with the term coefficients; its standard error comes from propagating the
independent per-fragment means through the products.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .densmat import OutputFunction, run_fragment_shot
from .fragments import ExecutablePlan
from .rng import ShotRng

__all__ = [
    "SampleBudget",
    "TermSelection",
    "WeightedSample",
    "TermStats",
    "Estimate",
    "sample_budget",
    "refined_sample_budget",
    "empirical_variance",
    "run_monte_carlo",
    "run_equal_allocation",
    "exact_uncut_expectation",
    "exact_cut_expectation",
    "write_shot_log",
    "read_shot_log",
]

_RNG_CONTEXT_MC = 0
_RNG_CONTEXT_EQUAL = 1


@dataclass(frozen=True)
class SampleBudget:
    """Hoeffding shot budget for the uniform-term Monte-Carlo estimator."""

    n_space: int
    n_time: int
    epsilon: float
    delta: float
    shots: int


def _budget_from_magnitude(
    magnitude: float, n_space: int, n_time: int, epsilon: float, delta: float
) -> SampleBudget:
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    n = math.ceil(2.0 * magnitude**2 / epsilon**2 * math.log(1.0 / (2.0 * delta)))
    return SampleBudget(n_space, n_time, epsilon, delta, max(int(n), 1))


def sample_budget(n_space: int, n_time: int, epsilon: float, delta: float) -> SampleBudget:
    """Budget ``ceil(2 * 9^Ms * 16^Mt / eps^2 * ln(1/(2 delta)))``.

    Assumes CZ-grade gate cuts (per-shot magnitude ``3^Ms * 4^Mt``).
    """
    if n_space < 0 or n_time < 0:
        raise ValueError("cut counts must be non-negative")
    magnitude = 3.0**n_space * 4.0**n_time
    return _budget_from_magnitude(magnitude, n_space, n_time, epsilon, delta)


def refined_sample_budget(plan: ExecutablePlan, epsilon: float, delta: float) -> SampleBudget:
    """Budget from the plan's actual per-shot magnitude bound.

    For gate cuts at angles other than +-pi/4 the per-cut magnitude differs
    from the CZ-grade value 3; this refinement uses the constructed
    decompositions instead of the worst-case constants.
    """
    return _budget_from_magnitude(
        plan.magnitude_bound(), plan.n_space, plan.n_time, epsilon, delta
    )


@dataclass(frozen=True)
class TermSelection:
    """Term indices per cut: gate cuts first, wire cuts second (0-based)."""

    space: tuple[int, ...]
    time: tuple[int, ...]

    @classmethod
    def from_flat(cls, flat: Sequence[int], n_space: int) -> "TermSelection":
        flat = tuple(flat)
        return cls(flat[:n_space], flat[n_space:])

    @property
    def flat(self) -> tuple[int, ...]:
        return self.space + self.time


@dataclass(frozen=True)
class WeightedSample:
    selection: TermSelection
    value: float


@dataclass(frozen=True)
class TermStats:
    selection: TermSelection
    count: int
    mean: float
    variance: float  # variance of this term's estimate, not of single shots


@dataclass(frozen=True)
class Estimate:
    """Estimator output: mean, standard error of the mean, and bookkeeping."""

    mean: float
    stderr: float
    shots: int
    per_term_stats: tuple[TermStats, ...] | None = None

    @property
    def variance(self) -> float:
        return self.stderr**2


def empirical_variance(samples: Iterable) -> float:
    """Unbiased sample variance of raw values or ``WeightedSample`` items."""
    values = np.asarray(
        [s.value if isinstance(s, WeightedSample) else float(s) for s in samples]
    )
    if values.size < 2:
        raise ValueError("variance needs at least 2 samples")
    return float(values.var(ddof=1))


def _as_shots(budget: "SampleBudget | int") -> int:
    shots = budget.shots if isinstance(budget, SampleBudget) else int(budget)
    if shots < 1:
        raise ValueError(f"shot count must be positive, got {shots}")
    return shots


def _fragment_zstring_signs(obs: OutputFunction, qubits: Sequence[int], bits: list[int]) -> float:
    acc = 1.0
    for q in qubits:
        if obs.zstring[q] == "Z" and bits[q]:
            acc = -acc
    return acc


def _bits_to_int(bits: Sequence[int]) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | b
    return out


def _importance_tables(plan: ExecutablePlan) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per cut: cumulative |c|/gamma and the signed rescale gamma*sign(c)."""
    cumulative, rescale = [], []
    for decomp in list(plan.decompositions) + [plan.wire] * plan.n_time:
        weights = np.array([abs(t.coefficient) for t in decomp.terms])
        gamma = weights.sum()
        cumulative.append(np.cumsum(weights / gamma))
        rescale.append(
            np.array([gamma * math.copysign(1.0, t.coefficient) for t in decomp.terms])
        )
    return cumulative, rescale


def run_monte_carlo(
    plan: ExecutablePlan,
    budget: "SampleBudget | int",
    seed: int,
    *,
    threads: int = 1,
    importance: bool = False,
    collect_per_term: bool = False,
    shot_log: BinaryIO | None = None,
    csv_path: "str | None" = None,
) -> Estimate:
    """Uniform-random-term Monte-Carlo estimate of the cut circuit's output.

    Each shot draws one term per cut, executes every fragment, and forms the
    rescaled product of coefficients, cut signs, and the output value; the
    estimator is the plain mean. Shots are addressed by a counter-based keyed
    stream, so any ``threads`` count produces identical results.
    """
    shots = _as_shots(budget)
    obs = plan.circuit.observable
    n_bits = plan.circuit.n_qubits
    counts = plan.term_counts
    scale = float(plan.sampling_scale())
    bound = plan.magnitude_bound() * (1 + 1e-12) + 1e-12
    cumulative, rescale = _importance_tables(plan) if importance else (None, None)

    values = np.empty(shots)
    selections: list[tuple[int, ...]] = [()] * shots if (collect_per_term or shot_log) else []
    signs_log: list[tuple[int, ...]] = [] if shot_log else None
    bits_log: list[int] = [] if shot_log else None

    def run_range(lo: int, hi: int):
        rng = ShotRng(seed, _RNG_CONTEXT_MC)
        for i in range(lo, hi):
            gen = rng.generator(i)
            if importance:
                draws = gen.random(len(counts))
                selection = tuple(
                    int(np.searchsorted(cumulative[k], draws[k], side="right"))
                    for k in range(len(counts))
                )
                factor = 1.0
                for k, term in enumerate(selection):
                    factor *= rescale[k][term]
            else:
                selection = tuple(int(gen.integers(c)) for c in counts)
                factor = scale * plan.coefficient(selection)
            programs = plan.programs(selection)
            signs = [1] * plan.n_slots
            bits = [0] * n_bits
            weight = 1.0
            for program in programs:
                weight *= run_fragment_shot(program, gen, signs, bits)
            x = factor * math.prod(signs) * weight * obs.value(_bits_to_int(bits))
            if abs(x) > bound:
                raise RuntimeError(
                    f"weighted sample {x!r} exceeds the magnitude bound {bound!r}"
                )
            values[i] = x
            if selections:
                selections[i] = selection
            if shot_log is not None:
                signs_log.append(tuple(signs))
                bits_log.append(_bits_to_int(bits))

    _run_partitioned(run_range, shots, threads)

    if shot_log is not None:
        write_shot_log(shot_log, plan, selections, signs_log, bits_log, values)
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("shot,value\n")
            for i, v in enumerate(values):
                fh.write(f"{i},{float(v)!r}\n")

    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(shots)) if shots > 1 else float("inf")
    per_term = None
    if collect_per_term:
        per_term = _group_term_stats(plan, selections, values)
    return Estimate(mean, stderr, shots, per_term)


def _run_partitioned(run_range, shots: int, threads: int):
    if threads <= 1:
        run_range(0, shots)
        return
    from concurrent.futures import ThreadPoolExecutor

    chunk = math.ceil(shots / threads)
    bounds = [(lo, min(lo + chunk, shots)) for lo in range(0, shots, chunk)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(lambda b: run_range(*b), bounds))


def _group_term_stats(
    plan: ExecutablePlan, selections: list, values: np.ndarray
) -> tuple[TermStats, ...]:
    groups: dict[tuple[int, ...], list[float]] = {}
    for sel, v in zip(selections, values):
        groups.setdefault(sel, []).append(float(v))
    stats = []
    for sel in sorted(groups):
        vals = np.asarray(groups[sel])
        var = float(vals.var(ddof=1) / vals.size) if vals.size > 1 else float("inf")
        stats.append(
            TermStats(
                TermSelection.from_flat(sel, plan.n_space),
                int(vals.size),
                float(vals.mean()),
                var,
            )
        )
    return tuple(stats)


def run_equal_allocation(
    plan: ExecutablePlan,
    total_shots: int,
    seed: int,
    *,
    threads: int = 1,
) -> Estimate:
    """Equal shots for every term in the grid, combined with coefficients.

    For Z-string observables each term is estimated as the product of
    independent per-fragment sign-weighted means (the measured cluster values
    multiply); for table observables the joint per-shot product is averaged
    instead. The requested total is rounded up to a multiple of the term
    count, and the standard error propagates the per-fragment variances.
    """
    total_shots = _as_shots(total_shots)
    obs = plan.circuit.observable
    n_bits = plan.circuit.n_qubits
    terms = list(plan.selections())
    n_terms = len(terms)
    per_term = math.ceil(total_shots / n_terms)
    factorize = obs.factorizes
    fragment_qubits = [t.qubits for t in plan.fragment_set.fragments]
    n_frag = len(fragment_qubits)

    term_means = np.empty(n_terms)
    term_vars = np.empty(n_terms)

    def run_term(j: int):
        rng = ShotRng(seed, _RNG_CONTEXT_EQUAL)
        selection = terms[j]
        programs = plan.programs(selection)
        if factorize:
            sums = np.zeros(n_frag)
            sumsq = np.zeros(n_frag)
        else:
            sums = 0.0
            sumsq = 0.0
        for r in range(per_term):
            gen = rng.generator(j, r)
            bits = [0] * n_bits
            joint = 1.0
            for f, program in enumerate(programs):
                signs = [1] * plan.n_slots
                weight = run_fragment_shot(program, gen, signs, bits)
                sample = math.prod(signs) * weight
                if factorize:
                    sample *= _fragment_zstring_signs(obs, fragment_qubits[f], bits)
                    sums[f] += sample
                    sumsq[f] += sample * sample
                else:
                    joint *= sample
            if not factorize:
                joint *= obs.value(_bits_to_int(bits))
                sums += joint
                sumsq += joint * joint
        if factorize:
            means = sums / per_term
            variances = np.maximum(sumsq / per_term - means**2, 0.0)
            if per_term > 1:
                variances *= per_term / (per_term - 1)
            variances /= per_term  # variance of each fragment mean
            mean, var = _product_moments(means, variances)
        else:
            mean = sums / per_term
            var = max(sumsq / per_term - mean**2, 0.0)
            if per_term > 1:
                var *= per_term / (per_term - 1)
            var /= per_term
        term_means[j] = mean
        term_vars[j] = var

    _run_partitioned(lambda lo, hi: [run_term(j) for j in range(lo, hi)], n_terms, threads)

    coeffs = np.array([plan.coefficient(sel) for sel in terms])
    mean = float(coeffs @ term_means)
    variance = float((coeffs**2) @ term_vars)
    stats = tuple(
        TermStats(
            TermSelection.from_flat(terms[j], plan.n_space),
            per_term,
            float(term_means[j]),
            float(term_vars[j]),
        )
        for j in range(n_terms)
    )
    return Estimate(mean, math.sqrt(variance), per_term * n_terms, stats)


def _product_moments(means: np.ndarray, variances: np.ndarray) -> tuple[float, float]:
    """Mean and variance of a product of independent estimators."""
    mean = float(np.prod(means))
    second = float(np.prod(means**2 + variances))
    return mean, max(second - mean**2, 0.0)


# --- exact (oracle) evaluation ----------------------------------------------


def exact_uncut_expectation(circuit) -> float:
    """Closed-form expectation of the uncut circuit."""
    from .densmat import exact_expectation
    from .fragments import CutSpec

    plan = ExecutablePlan(circuit, CutSpec())
    return exact_expectation(plan.programs((), flavor="oracle"), circuit.observable)


def exact_cut_expectation(plan: ExecutablePlan) -> float:
    """Coefficient-weighted sum of exact per-term values over the whole grid.

    Equals the uncut expectation for every valid decomposition; this is the
    estimator's population mean, evaluated without sampling.
    """
    from .densmat import exact_expectation

    total = 0.0
    for selection in plan.selections():
        value = exact_expectation(
            plan.programs(selection, flavor="oracle"), plan.circuit.observable
        )
        total += plan.coefficient(selection) * value
    return total


# --- binary shot log ----------------------------------------------------------

_LOG_MAGIC = b"QCUTLOG1"


def write_shot_log(
    stream: BinaryIO,
    plan: ExecutablePlan,
    selections: Sequence[tuple[int, ...]],
    signs: Sequence[tuple[int, ...]],
    bits: Sequence[int],
    values: np.ndarray,
):
    """Fixed-width binary log, one record per shot.

    Header: magic ``QCUTLOG1``, then ``<BBB`` (gate cuts, wire cuts, qubit
    count). Record: one ``uint8`` term index per cut, one ``int8`` sign per
    cut, the output bits packed into a little-endian ``uint64`` (qubit 0 most
    significant), and the weighted sample as ``float64``.
    """
    n_cuts = plan.n_slots
    stream.write(_LOG_MAGIC)
    stream.write(struct.pack("<BBB", plan.n_space, plan.n_time, plan.circuit.n_qubits))
    record = struct.Struct(f"<{n_cuts}B{n_cuts}bQd")
    for sel, sg, y, x in zip(selections, signs, bits, values):
        stream.write(record.pack(*sel, *sg, y, float(x)))


def read_shot_log(stream: BinaryIO) -> dict:
    magic = stream.read(len(_LOG_MAGIC))
    if magic != _LOG_MAGIC:
        raise ValueError("not a shot log (bad magic)")
    n_space, n_time, n_qubits = struct.unpack("<BBB", stream.read(3))
    n_cuts = n_space + n_time
    record = struct.Struct(f"<{n_cuts}B{n_cuts}bQd")
    selections, signs, bits, values = [], [], [], []
    while True:
        raw = stream.read(record.size)
        if not raw:
            break
        fields = record.unpack(raw)
        selections.append(tuple(fields[:n_cuts]))
        signs.append(tuple(fields[n_cuts : 2 * n_cuts]))
        bits.append(fields[2 * n_cuts])
        values.append(fields[2 * n_cuts + 1])
    return {
        "n_space": n_space,
        "n_time": n_time,
        "n_qubits": n_qubits,
        "selections": selections,
        "signs": signs,
        "bits": bits,
        "values": np.asarray(values),
    }
