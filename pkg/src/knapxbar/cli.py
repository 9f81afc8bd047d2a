"""Command line interface.

Subcommands: oracle, encode, solve, sweep, noise-study, mitigation, rng-test.
Exit codes: 0 success, 1 runtime failure, 2 bad configuration or input.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from . import experiments, solver
from .crossbar import CrossbarConfig
from .encoder import (
    PenaltyWeights,
    build_hamiltonian,
    default_penalties,
    hamiltonian_csv,
    parse_encoding,
)
from .experiments import ConfigError, ExperimentSpec, GeneratorParams
from .knapsack import brute_force_optimum, load_instance, save_instance
from .solver import SolverConfig, run_trial, trace_csv


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("problem source (file or generator)")
    src.add_argument("--problem", type=str, help="instance JSON path")
    src.add_argument("--objects", type=int, help="generate an instance with this many items")
    src.add_argument("--weight-range", type=str, default="1:8", metavar="LO:HI")
    src.add_argument("--value-range", type=str, default="1:12", metavar="LO:HI")
    src.add_argument(
        "--capacity-fraction", type=float, default=0.5,
        help="capacity as a fraction of total weight (generator only)",
    )


def _add_common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, help="output path (stdout when omitted)")
    p.add_argument("--backend", choices=("exact", "crossbar"), default="crossbar")
    p.add_argument("--encoding", type=str, default="unary",
                   help="unary, shrink:<step>, or log")
    p.add_argument("--sigma1", type=float, help="reward weight (default 1)")
    p.add_argument("--sigma2", type=float, help="one-hot penalty (default max value + 1)")
    p.add_argument("--sigma3", type=float, help="load-match penalty (default max value + 1)")
    xb = p.add_argument_group("crossbar")
    xb.add_argument("--noise", type=float, default=1.0, metavar="MULT",
                    help="noise multiplier (0 = ideal array)")
    xb.add_argument("--replicas", type=int, default=1)
    xb.add_argument("--quant-bits", type=int, default=7)
    xb.add_argument("--prog-noise-std", type=float,
                    default=CrossbarConfig.prog_noise_std)
    xb.add_argument("--read-noise-std", type=float,
                    default=CrossbarConfig.read_noise_std)
    xb.add_argument("--g-max", type=float, default=1.0)
    sv = p.add_argument_group("solver")
    sv.add_argument("--flip-initial", type=int, help="default min(5, n)")
    sv.add_argument("--flip-final", type=int, default=1)
    sv.add_argument("--flip-schedule", choices=("linear", "constant"), default="linear")
    sv.add_argument("--acceptance", choices=("greedy", "always", "metropolis"),
                    default="greedy")
    sv.add_argument("--adopt-prob", type=float, default=0.1)
    sv.add_argument("--rng-source", choices=("software", "device-bank"),
                    default="software")
    sv.add_argument("--shared-plan", action="store_true",
                    help="both states use the same flip plan each iteration")
    sv.add_argument("--stall-window", type=int, default=0)
    sv.add_argument("--target-energy", type=float)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError as exc:
        raise ConfigError(f"range must look like LO:HI, got {text!r}") from exc


def _parse_budgets(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(b) for b in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad iteration list {text!r}") from exc


def _penalties(args, instance) -> PenaltyWeights | None:
    if args.sigma1 is None and args.sigma2 is None and args.sigma3 is None:
        return None
    base = default_penalties(instance)
    return PenaltyWeights(
        args.sigma1 if args.sigma1 is not None else base.sigma1,
        args.sigma2 if args.sigma2 is not None else base.sigma2,
        args.sigma3 if args.sigma3 is not None else base.sigma3,
    )


def _generator(args) -> GeneratorParams | None:
    if args.objects is None:
        return None
    return GeneratorParams(
        n_objects=args.objects,
        weight_range=_parse_range(args.weight_range),
        value_range=_parse_range(args.value_range),
        capacity_fraction=args.capacity_fraction,
    )


def _spec(args, budgets) -> ExperimentSpec:
    return ExperimentSpec(
        problem_path=args.problem,
        generator=_generator(args),
        encoding=parse_encoding(args.encoding),
        penalties=None,  # resolved per instance below when sigma flags given
        backend=args.backend,
        crossbar=CrossbarConfig(
            g_max=args.g_max,
            quant_bits=args.quant_bits,
            prog_noise_std=args.prog_noise_std,
            read_noise_std=args.read_noise_std,
            noise_multiplier=args.noise,
            replicas=args.replicas,
        ),
        solver=SolverConfig(
            flip_max_initial=args.flip_initial,
            flip_max_final=args.flip_final,
            schedule=args.flip_schedule,
            acceptance=args.acceptance,
            adopt_probability=args.adopt_prob,
            rng_source=args.rng_source,
            shared_flip_plan=args.shared_plan,
            stall_window=args.stall_window,
            target_energy=args.target_energy,
        ),
        budgets=budgets,
        trials=args.trials,
        seed=args.seed,
        workers=args.workers,
    )


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _emit_json(payload: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_outputs(args, csv_text, instance, sidecar, generated: bool) -> None:
    _emit(csv_text, args.out)
    if args.out is not None:
        _emit_json(sidecar, f"{args.out}.meta.json")
        if generated:
            save_instance(instance, f"{args.out}.instance.json")


def cmd_oracle(args) -> int:
    instance = load_instance(args.problem)
    best = brute_force_optimum(instance)
    payload = {
        "chosen": list(best.chosen),
        "value": best.total_value,
        "weight": best.total_weight,
    }
    text = json.dumps(payload, indent=2) + "\n"
    _emit(text, args.out)
    return 0


def cmd_encode(args) -> int:
    instance = load_instance(args.problem)
    hamiltonian = build_hamiltonian(
        instance, parse_encoding(args.encoding), _penalties(args, instance)
    )
    _emit(hamiltonian_csv(hamiltonian), args.out)
    return 0


def cmd_solve(args) -> int:
    budgets = _parse_budgets(args.iterations)
    if len(budgets) != 1:
        raise ConfigError("solve takes a single iteration count")
    spec = _spec(args, budgets)
    instance, origin = experiments.resolve_problem(spec)
    if spec.penalties is None:
        spec = replace(spec, penalties=_penalties(args, instance))
    backend = experiments.build_backend(spec, instance)
    cfg = replace(spec.solver, max_iterations=budgets[0])
    result = run_trial(
        backend, instance, cfg,
        solver.trial_seed(spec.seed, budgets[0], 0),
        record_trace=args.trace is not None,
    )
    if args.trace is not None:
        _emit(trace_csv(result), args.trace)
    optimal = brute_force_optimum(instance)
    payload = {
        "instance": instance.to_dict(),
        "origin": origin,
        "backend": spec.backend,
        "chosen": list(result.selection.chosen),
        "value": result.selection.total_value,
        "weight": result.selection.total_weight,
        "feasible": result.selection.feasible,
        "slot_one_hot_ok": result.slot_report.one_hot_ok,
        "slot_load_match_ok": result.slot_report.load_match_ok,
        "best_noisy_energy": result.best_noisy_energy,
        "best_exact_energy": result.best_exact_energy,
        "iterations_run": result.iterations_run,
        "iteration_of_best": result.iteration_of_best,
        "optimal_value": optimal.total_value,
        "success": result.success,
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def cmd_sweep(args) -> int:
    spec = _spec(args, _parse_budgets(args.iterations))
    instance, _ = experiments.resolve_problem(spec)
    if spec.penalties is None:
        spec = replace(spec, penalties=_penalties(args, instance))
    rows, instance, sidecar = experiments.run_sweep(spec)
    _write_outputs(args, experiments.sweep_csv(rows), instance, sidecar,
                   spec.generator is not None)
    return 0


def cmd_noise_study(args) -> int:
    spec = _spec(args, _parse_budgets(args.iterations))
    try:
        multipliers = tuple(float(m) for m in args.multipliers.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad multiplier list {args.multipliers!r}") from exc
    instance, _ = experiments.resolve_problem(spec)
    if spec.penalties is None:
        spec = replace(spec, penalties=_penalties(args, instance))
    rows, instance, sidecar = experiments.run_noise_study(spec, multipliers)
    _write_outputs(args, experiments.noise_study_csv(rows), instance, sidecar,
                   spec.generator is not None)
    return 0


def cmd_mitigation(args) -> int:
    spec = _spec(args, _parse_budgets(args.iterations))
    try:
        replica_counts = tuple(int(r) for r in args.replica_counts.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad replica list {args.replica_counts!r}") from exc
    instance, _ = experiments.resolve_problem(spec)
    if spec.penalties is None:
        spec = replace(spec, penalties=_penalties(args, instance))
    rows, instance, sidecar = experiments.run_mitigation(spec, replica_counts)
    _write_outputs(args, experiments.mitigation_csv(rows), instance, sidecar,
                   spec.generator is not None)
    return 0


def cmd_rng_test(args) -> int:
    report = experiments.run_rng_test(args.objects, args.draws, args.seed)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    _emit(text, args.out)
    return 0 if report["uniform_at_99"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knapxbar",
        description="Knapsack optimization on a simulated noisy analog crossbar.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("oracle", help="exhaustive optimum of an instance file")
    p.add_argument("problem", type=str, help="instance JSON path")
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("encode", help="emit the energy matrix as CSV")
    p.add_argument("problem", type=str, help="instance JSON path")
    p.add_argument("--out", type=str)
    p.add_argument("--encoding", type=str, default="unary")
    p.add_argument("--sigma1", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--sigma3", type=float)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("solve", help="run one search trial")
    _add_problem_args(p)
    _add_common_args(p)
    p.add_argument("--iterations", type=str, default="1000")
    p.add_argument("--trace", type=str, help="write per-iteration energies to this CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="success probability vs iteration budget")
    _add_problem_args(p)
    _add_common_args(p)
    p.add_argument("--iterations", type=str,
                   default=",".join(str(b) for b in range(5, 101, 5)))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("noise-study", help="sweep across noise multipliers")
    _add_problem_args(p)
    _add_common_args(p)
    p.add_argument("--iterations", type=str, default="100")
    p.add_argument("--multipliers", type=str, default="0,1,3,10")
    p.set_defaults(func=cmd_noise_study)

    p = sub.add_parser("mitigation", help="replica-averaging study")
    _add_problem_args(p)
    _add_common_args(p)
    p.add_argument("--iterations", type=str, default="100")
    p.add_argument("--replica-counts", type=str, default="1,3")
    p.set_defaults(func=cmd_mitigation)

    p = sub.add_parser("rng-test", help="uniformity check of the device-bank source")
    p.add_argument("--objects", type=int, required=True,
                   help="number of equally likely outcomes")
    p.add_argument("--draws", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_rng_test)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
