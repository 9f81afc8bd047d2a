"""Time the compiled search kernel against its pure-Python mirror.

Runs identical seeded trial batches through every available kernel, checks
the outputs agree bit for bit, and reports wall time per kernel. The Python
mirror is the correctness reference; the compiled kernel only earns its keep
if it wins here without changing a single byte of output.

Usage: python benchmarks/bench_kernels.py [--trials N] [--iterations N]
"""

import argparse
import time

import numpy as np

from knapxbar import _backend, knapsack
from knapxbar._backend import implementations
from knapxbar.crossbar import CrossbarConfig, evaluate_energy, program
from knapxbar.encoder import build_hamiltonian
from knapxbar.solver import (
    CrossbarBackend,
    ExactBackend,
    SolverConfig,
    run_trial,
    trial_seed,
)


def run_batch(impl, backend, instance, cfg, trials, seed):
    original = _backend.run_trial_kernel
    _backend.run_trial_kernel = impl.run_trial_kernel
    try:
        start = time.perf_counter()
        results = [
            run_trial(
                backend, instance, cfg, trial_seed(seed, cfg.max_iterations, t),
                optimal_value=24, record_trace=True,
            )
            for t in range(trials)
        ]
        elapsed = time.perf_counter() - start
    finally:
        _backend.run_trial_kernel = original
    return results, elapsed


def assert_batches_identical(reference, candidate, label):
    for a, b in zip(reference, candidate):
        same = (
            np.array_equal(a.best_state, b.best_state)
            and a.best_noisy_energy == b.best_noisy_energy
            and a.best_exact_energy == b.best_exact_energy
            and a.iterations_run == b.iterations_run
            and a.iteration_of_best == b.iteration_of_best
            and np.array_equal(a.energy_trace.e1, b.energy_trace.e1)
            and np.array_equal(a.energy_trace.e2, b.energy_trace.e2)
            and np.array_equal(a.energy_trace.best, b.energy_trace.best)
        )
        if not same:
            raise SystemExit(f"kernel outputs diverge on the {label} path")


def bench_reads(impl, xbar, states, seed):
    original = _backend.read_energy
    _backend.read_energy = impl.read_energy
    try:
        gen = np.random.default_rng(seed)
        start = time.perf_counter()
        values = [evaluate_energy(xbar, state, gen) for state in states]
        elapsed = time.perf_counter() - start
    finally:
        _backend.read_energy = original
    return values, elapsed


def report(title, rows, unit_count, unit_name):
    print(f"\n{title}")
    baseline = rows["python"]
    for name, elapsed in rows.items():
        rate = elapsed / unit_count * 1e6
        speedup = baseline / elapsed
        print(
            f"  {name:<9} {elapsed:8.3f} s   {rate:8.2f} us/{unit_name}"
            f"   {speedup:5.2f}x vs python"
        )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=200)
    parser.add_argument("--iterations", type=int, default=300)
    parser.add_argument("--reads", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    impls = implementations()
    print("kernels:", ", ".join(impls))
    if len(impls) < 2:
        print("compiled kernel unavailable; timing the Python mirror alone")

    instance = knapsack.load_instance(knapsack.bundled_instance_path())
    hamiltonian = build_hamiltonian(instance)
    xbar = program(hamiltonian, CrossbarConfig(), np.random.default_rng(args.seed))
    cfg = SolverConfig(max_iterations=args.iterations)
    total_iterations = args.trials * args.iterations

    for label, backend in (
        ("noisy crossbar trials", CrossbarBackend(xbar)),
        ("exact matrix trials", ExactBackend(hamiltonian)),
    ):
        batches = {}
        times = {}
        for name, impl in impls.items():
            batches[name], times[name] = run_batch(
                impl, backend, instance, cfg, args.trials, args.seed
            )
        for name, batch in batches.items():
            if name != "python":
                assert_batches_identical(batches["python"], batch, label)
        report(
            f"{label} ({args.trials} trials x {args.iterations} iterations)",
            times, total_iterations, "iteration",
        )

    state_rng = np.random.default_rng(args.seed + 1)
    states = [
        state_rng.integers(0, 2, size=hamiltonian.dimension).astype(np.uint8)
        for _ in range(args.reads)
    ]
    reads = {}
    read_times = {}
    for name, impl in impls.items():
        reads[name], read_times[name] = bench_reads(impl, xbar, states, args.seed)
    for name, values in reads.items():
        if name != "python" and values != reads["python"]:
            raise SystemExit("kernel outputs diverge on the readout path")
    report(f"noisy readouts ({args.reads} reads)", read_times, args.reads, "read")

    print("\nall kernels agree bit for bit")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
