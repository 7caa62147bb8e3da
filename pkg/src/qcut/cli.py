"""Command-line front end: verify, run, plan, compare, example.

Exit codes: 0 on success, 1 on a numeric or statistical failure (residual over
tolerance, estimate off by more than the target accuracy, variance bound
violated, infeasible plan), 2 on input or validation errors. ``--seed`` falls
back to the ``QCUT_SEED`` environment variable, then to 1. Reports are UTF-8
JSON with sorted keys; ``--no-timestamp`` drops the wall-clock fields so that
identical configurations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, circuits, cuts, estimator, fragments, planner
from .densmat import ORACLE_QUBIT_LIMIT, WidthLimitError
from .estimator import run_equal_allocation, run_monte_carlo, sample_budget
from .fragments import CutSpec, ExecutablePlan
from .paulis import ptm_of_unitary

VERIFY_TOLERANCE = 1e-10

# worst-case variance bounds for the single-bridge comparison circuit
SPACE_VARIANCE_BOUND = lambda n: 15.0 / (2.0 * n)  # noqa: E731
TIME_VARIANCE_BOUND = lambda n: 2048.0 / n  # noqa: E731


def _provenance(seed: int, no_timestamp: bool, wall_time: float | None = None) -> dict:
    out = {
        "qcut_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "seed": seed,
    }
    if not no_timestamp:
        out["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        if wall_time is not None:
            out["wall_time_s"] = wall_time
    return out


def _write_json(directory: str | None, name: str, payload: dict):
    if directory is None:
        return None
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    target = path / name
    target.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return str(target)


def _seed_from(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("QCUT_SEED")
    if env is not None:
        return int(env)
    return 1


def _load_circuit(path: str) -> circuits.CircuitIR:
    return circuits.parse_circuit(Path(path).read_text(encoding="utf-8"))


def _load_cut_spec(args, circuit) -> CutSpec:
    if args.cuts is not None:
        spec = fragments.cut_spec_from_json(Path(args.cuts).read_text(encoding="utf-8"))
    elif getattr(args, "auto_plan", False):
        if args.budget is None:
            raise ValueError("--auto-plan requires --budget")
        plan = planner.plan_cuts(circuit, args.budget)
        if not plan.feasible:
            raise ValueError("no feasible plan within the candidate bound")
        spec = plan.spec
    elif circuit.cut_candidates:
        spec = CutSpec(gate_cuts=circuit.cut_candidates)
    else:
        spec = CutSpec()
    spec.validate(circuit)
    return spec


def _target_ptm(op: circuits.Gate):
    matrix = circuits.gate_matrix(op)
    if op.is_projection:
        from .paulis import ptm_of_general_map

        return ptm_of_general_map(matrix, matrix)
    return ptm_of_unitary(matrix)


def cmd_verify(args) -> int:
    circuit = _load_circuit(args.circuit)
    spec = _load_cut_spec(args, circuit)
    decomp_file = None
    if args.decomps:
        decomp_file = json.loads(Path(args.decomps).read_text(encoding="utf-8"))
    results = []
    failed = False
    for position, index in enumerate(spec.gate_cuts):
        op = circuit.ops[index]
        if decomp_file is not None:
            decomp = cuts.decomposition_from_json(json.dumps(decomp_file[position]))
        else:
            decomp = fragments.decomposition_for_gate(op)
        residual = cuts.verify_cut(decomp, _target_ptm(op))
        ok = residual < VERIFY_TOLERANCE
        failed |= not ok
        results.append(
            {"cut": f"gate@{index}", "target": decomp.target, "residual": residual, "ok": ok}
        )
        print(f"gate cut at op {index} ({op.name}): residual {residual:.3e} {'ok' if ok else 'FAIL'}")
        if not ok:
            worst = max(decomp.terms, key=lambda t: abs(t.coefficient))
            print(f"  offending decomposition: {decomp.target}, largest term coefficient {worst.coefficient}")
    from .paulis import identity_ptm

    for qubit, after in spec.wire_cuts:
        residual = cuts.verify_cut(cuts.wire_cut(), identity_ptm(1))
        ok = residual < VERIFY_TOLERANCE
        failed |= not ok
        results.append(
            {"cut": f"wire@({qubit},{after})", "target": "wire-cut", "residual": residual, "ok": ok}
        )
        print(f"wire cut at ({qubit}, {after}): residual {residual:.3e} {'ok' if ok else 'FAIL'}")
    payload = {
        "command": "verify",
        "tolerance": VERIFY_TOLERANCE,
        "results": results,
        "provenance": _provenance(_seed_from(args), args.no_timestamp),
    }
    _write_json(args.out, "verify.json", payload)
    return 1 if failed else 0


def _budget_for(args, spec: CutSpec):
    if args.shots is not None:
        return None, args.shots
    epsilon = args.epsilon if args.epsilon is not None else 0.1
    delta = args.delta if args.delta is not None else 0.05
    budget = sample_budget(spec.n_space, spec.n_time, epsilon, delta)
    return budget, budget.shots


def cmd_run(args) -> int:
    circuit = _load_circuit(args.circuit)
    spec = _load_cut_spec(args, circuit)

    if args.mode == "cost":
        cost = planner.plan_cost(spec, circuit)
        print(f"{cost:g}")
        payload = {
            "command": "run",
            "mode": "cost",
            "gate_cuts": list(spec.gate_cuts),
            "wire_cuts": [list(w) for w in spec.wire_cuts],
            "cost": cost,
            "provenance": _provenance(_seed_from(args), args.no_timestamp),
        }
        _write_json(args.out, "report.json", payload)
        return 0

    seed = _seed_from(args)
    started = time.perf_counter()
    plan = ExecutablePlan(circuit, spec, qubit_budget=args.budget)

    exact = None
    if circuit.n_qubits <= ORACLE_QUBIT_LIMIT:
        exact = estimator.exact_uncut_expectation(circuit)

    report: dict = {
        "command": "run",
        "mode": args.mode,
        "gate_cuts": list(spec.gate_cuts),
        "wire_cuts": [list(w) for w in spec.wire_cuts],
        "gamma": plan.gamma(),
        "max_width": plan.max_width,
        "exact": exact,
    }
    status = 0
    if args.mode == "oracle":
        value = estimator.exact_cut_expectation(plan)
        print(f"exact term-weighted value: {value:.12f} +- 0")
        report["estimate"] = {"mean": value, "stderr": 0.0, "shots": 0}
        if exact is not None:
            report["deviation"] = abs(value - exact)
            print(f"uncut oracle: {exact:.12f}  deviation {abs(value - exact):.3e}")
    else:
        budget, shots = _budget_for(args, spec)
        log_stream = None
        if args.shot_log and args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            log_stream = open(Path(args.out) / "shots.bin", "wb")
        csv_path = None
        if args.csv and args.out and args.mode == "montecarlo":
            Path(args.out).mkdir(parents=True, exist_ok=True)
            csv_path = str(Path(args.out) / "shots.csv")
        try:
            if args.mode == "montecarlo":
                result = run_monte_carlo(
                    plan,
                    shots,
                    seed,
                    threads=args.threads,
                    importance=args.importance,
                    collect_per_term=args.per_term,
                    shot_log=log_stream,
                    csv_path=csv_path,
                )
            else:  # allocation
                result = run_equal_allocation(plan, shots, seed, threads=args.threads)
        finally:
            if log_stream is not None:
                log_stream.close()
        print(f"mean {result.mean:+.9f} +- {result.stderr:.9f}  ({result.shots} shots)")
        report["estimate"] = {
            "mean": result.mean,
            "stderr": result.stderr,
            "shots": result.shots,
        }
        if budget is not None:
            report["budget"] = {
                "n_space": budget.n_space,
                "n_time": budget.n_time,
                "epsilon": budget.epsilon,
                "delta": budget.delta,
                "shots": budget.shots,
            }
        if result.per_term_stats:
            report["per_term"] = [
                {
                    "space": list(t.selection.space),
                    "time": list(t.selection.time),
                    "count": t.count,
                    "mean": t.mean,
                    "variance": t.variance,
                }
                for t in result.per_term_stats
            ]
        if exact is not None:
            deviation = abs(result.mean - exact)
            report["deviation"] = deviation
            print(f"uncut oracle: {exact:+.9f}  deviation {deviation:.3e}")
            if args.mode == "montecarlo" and args.epsilon is not None and deviation > args.epsilon:
                print(f"deviation exceeds the target accuracy {args.epsilon}", file=sys.stderr)
                status = 1
    report["provenance"] = _provenance(seed, args.no_timestamp, time.perf_counter() - started)
    if args.no_timestamp:
        report["provenance"].pop("wall_time_s", None)
    _write_json(args.out, "report.json", payload=report)
    return status


def cmd_plan(args) -> int:
    circuit = _load_circuit(args.circuit)
    if args.budget is None:
        raise ValueError("plan requires --budget")
    plan = planner.plan_cuts(
        circuit,
        args.budget,
        allow_gate_cuts=not args.no_gate_cuts,
        allow_wire_cuts=not args.no_wire_cuts,
    )
    frags = fragments.fragment(circuit, plan.spec) if plan.feasible else None
    text = planner.plan_to_json(plan, frags)
    print(text)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "plan.json").write_text(text + "\n", encoding="utf-8")
    return 0 if plan.feasible else 1


def cmd_compare(args) -> int:
    circuit = _load_circuit(args.circuit)
    seed = _seed_from(args)
    shots = args.shots if args.shots is not None else 60_000
    if shots < 100:
        print(
            "warning: fewer than 100 shots; the large-sample variance analysis "
            "does not apply",
            file=sys.stderr,
        )
    if args.gate_cuts_file:
        gate_spec = fragments.cut_spec_from_json(Path(args.gate_cuts_file).read_text(encoding="utf-8"))
    else:
        gate_plan = planner.plan_cuts(circuit, args.budget, allow_wire_cuts=False)
        if not gate_plan.feasible:
            raise ValueError("circuit admits no gate-cut plan within the budget")
        gate_spec = gate_plan.spec
    if args.wire_cuts_file:
        wire_spec = fragments.cut_spec_from_json(Path(args.wire_cuts_file).read_text(encoding="utf-8"))
    else:
        # the pass-through wire borrows one line, so allow one extra qubit
        wire_plan = planner.plan_cuts(circuit, args.budget + 1, allow_gate_cuts=False)
        if not wire_plan.feasible:
            raise ValueError("circuit admits no wire-cut plan within the budget")
        wire_spec = wire_plan.spec

    gate_plan_exec = ExecutablePlan(circuit, gate_spec)
    wire_plan_exec = ExecutablePlan(circuit, wire_spec)
    bound_space = SPACE_VARIANCE_BOUND(shots)
    bound_time = TIME_VARIANCE_BOUND(shots)

    rows = []
    violations = 0
    print(f"{'plan':<12}{'seed':>6}{'shots':>8}{'variance':>14}{'bound':>12}  ok")
    for offset in range(args.repeats):
        run_seed = seed + offset
        for label, plan, bound in (
            ("space-like", gate_plan_exec, bound_space),
            ("time-like", wire_plan_exec, bound_time),
        ):
            result = run_equal_allocation(plan, shots, run_seed, threads=args.threads)
            ok = result.variance <= bound
            violations += not ok
            rows.append(
                {
                    "plan": label,
                    "seed": run_seed,
                    "shots": result.shots,
                    "mean": result.mean,
                    "variance": result.variance,
                    "bound": bound,
                    "ok": ok,
                }
            )
            print(
                f"{label:<12}{run_seed:>6}{result.shots:>8}{result.variance:>14.3e}"
                f"{bound:>12.3e}  {'yes' if ok else 'NO'}"
            )
    space_vars = [r["variance"] for r in rows if r["plan"] == "space-like"]
    time_vars = [r["variance"] for r in rows if r["plan"] == "time-like"]
    ordering = sum(s < t for s, t in zip(space_vars, time_vars))
    print(f"space-like below time-like in {ordering}/{args.repeats} seeds")
    payload = {
        "command": "compare",
        "shots": shots,
        "rows": rows,
        "ordering_wins": ordering,
        "provenance": _provenance(seed, args.no_timestamp),
    }
    _write_json(args.out, "compare.json", payload)
    if args.out:
        lines = ["plan,seed,shots,mean,variance,bound,ok"]
        for r in rows:
            lines.append(
                f"{r['plan']},{r['seed']},{r['shots']},{r['mean']!r},{r['variance']!r},{r['bound']!r},{int(r['ok'])}"
            )
        (Path(args.out) / "compare.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 1 if violations else 0


def cmd_example(args) -> int:
    if args.kind == "qaoa":
        i, j = (int(x) for x in args.long_edge.split(","))
        p = args.layers
        beta = [args.beta] * p
        gamma = [args.gamma] * p
        circuit = circuits.generate_qaoa_example(args.ring, (i, j), p, beta, gamma)
    else:
        circuit = circuits.generate_clustered_pair_example(args.layer_seed)
    text = circuits.serialize_circuit(circuit)
    if args.out_file:
        Path(args.out_file).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.out_file}")
    else:
        print(text)
    if args.cuts_out:
        spec = CutSpec(gate_cuts=circuit.cut_candidates)
        Path(args.cuts_out).write_text(fragments.cut_spec_to_json(spec) + "\n", encoding="utf-8")
        print(f"wrote {args.cuts_out}")
    if args.wire_cuts_out:
        if not circuit.cut_candidates:
            raise ValueError("circuit has no flagged ops to derive wire cuts from")
        bridge = circuit.cut_candidates[0]
        qubit = circuit.ops[bridge].qubits[0]
        spec = CutSpec(wire_cuts=((qubit, bridge - 1), (qubit, bridge)))
        Path(args.wire_cuts_out).write_text(fragments.cut_spec_to_json(spec) + "\n", encoding="utf-8")
        print(f"wrote {args.wire_cuts_out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcut", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--circuit", required=True, help="circuit JSON file")
        p.add_argument("--cuts", help="cut spec JSON file")
        p.add_argument("--auto-plan", action="store_true", help="derive cuts with the planner")
        p.add_argument("--budget", type=int, help="qubit budget for planning/width checks")
        p.add_argument("--seed", type=int, help="random seed (default: QCUT_SEED or 1)")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results identical)")
        p.add_argument("--out", help="directory for report files")
        p.add_argument("--no-timestamp", action="store_true", help="omit wall-clock fields")

    p = sub.add_parser("verify", help="check every cut's reconstruction residual")
    common(p)
    p.add_argument("--decomps", help="serialized decomposition term lists to audit")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("run", help="estimate the circuit's expectation value")
    common(p)
    p.add_argument(
        "--mode",
        choices=("oracle", "montecarlo", "allocation", "cost"),
        default="montecarlo",
    )
    p.add_argument("--epsilon", type=float, help="target accuracy (with --delta)")
    p.add_argument("--delta", type=float, help="failure probability (with --epsilon)")
    p.add_argument("--shots", type=int, help="explicit shot count (overrides budget)")
    p.add_argument("--importance", action="store_true", help="sample terms by |coefficient|")
    p.add_argument("--per-term", action="store_true", help="include per-term statistics")
    p.add_argument("--csv", action="store_true", help="also write per-shot CSV traces")
    p.add_argument("--shot-log", action="store_true", help="write the binary shot log")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plan", help="search for the cheapest feasible cut set")
    common(p)
    p.add_argument("--no-gate-cuts", action="store_true")
    p.add_argument("--no-wire-cuts", action="store_true")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("compare", help="equal-allocation gate-cut vs wire-cut variances")
    common(p)
    p.add_argument("--shots", type=int, help="shots per estimator (default 60000)")
    p.add_argument("--repeats", type=int, default=10, help="number of seeds")
    p.add_argument("--gate-cuts-file", help="explicit gate-cut spec JSON")
    p.add_argument("--wire-cuts-file", help="explicit wire-cut spec JSON")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("example", help="emit a demo circuit")
    p.add_argument("kind", choices=("qaoa", "clusters"))
    p.add_argument("--ring", type=int, default=6)
    p.add_argument("--long-edge", default="0,3")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--beta", type=float, default=np.pi / 4)
    p.add_argument("--gamma", type=float, default=np.pi / 4)
    p.add_argument("--layer-seed", type=int, default=7)
    p.add_argument("--out-file", help="circuit JSON destination (default: stdout)")
    p.add_argument("--cuts-out", help="also write the flagged gate-cut spec")
    p.add_argument("--wire-cuts-out", help="also write the bridge wire-cut spec")
    p.set_defaults(func=cmd_example)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, WidthLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
