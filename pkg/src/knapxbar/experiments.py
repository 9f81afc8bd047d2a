"""Reproducible experiment harness: sweeps, noise studies, replica
mitigation, and random-source quality checks.

Every run derives all randomness from one master seed through fixed spawn
keys, so a repeated invocation writes byte-identical outputs:

  (budget, trial)  per-trial search stream
  (2**32 - 1,)     crossbar programming
  (2**32 - 2,)     instance generation
  (2**32 - 3,)     device-bank draws in rng-test
  (2**32 - 4,)     readout std measurement

The 1-tuples cannot collide with the 2-tuple trial keys.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from io import StringIO

import numpy as np
from scipy import stats as scipy_stats

from . import solver
from .crossbar import (
    CrossbarConfig,
    DeviceBank,
    draw_bits,
    evaluate_energy,
    min_devices,
    pattern_from_bits,
    program,
)
from .encoder import (
    CapacityEncoding,
    PenaltyWeights,
    UNARY,
    build_hamiltonian,
    default_penalties,
    solution_state,
)
from .knapsack import KnapsackInstance, brute_force_optimum, load_instance
from .solver import CrossbarBackend, ExactBackend, SolverConfig, SuccessStats

_PROGRAM_KEY = 2**32 - 1
_GENERATE_KEY = 2**32 - 2
_RNG_TEST_KEY = 2**32 - 3
_STD_KEY = 2**32 - 4


class ConfigError(ValueError):
    """Bad experiment setup (exit code 2 territory, not a runtime failure)."""


@dataclass(frozen=True)
class GeneratorParams:
    """Random-instance shape: item count, ranges, capacity fraction."""

    n_objects: int
    weight_range: tuple[int, int] = (1, 8)
    value_range: tuple[int, int] = (1, 12)
    capacity_fraction: float = 0.5

    def __post_init__(self):
        if self.n_objects < 1:
            raise ConfigError("n_objects must be >= 1")
        for name, (lo, hi) in (
            ("weight_range", self.weight_range),
            ("value_range", self.value_range),
        ):
            if not 1 <= lo <= hi:
                raise ConfigError(f"{name} must satisfy 1 <= lo <= hi, got ({lo}, {hi})")
        if not 0.0 < self.capacity_fraction <= 1.0:
            raise ConfigError("capacity_fraction must be in (0, 1]")


def generate_instance(params: GeneratorParams, seed) -> KnapsackInstance:
    """Instance with uniform integer weights/values and a fractional capacity."""
    gen = solver._as_generator(seed)
    lo, hi = params.weight_range
    weights = tuple(int(w) for w in gen.integers(lo, hi + 1, size=params.n_objects))
    lo, hi = params.value_range
    values = tuple(int(v) for v in gen.integers(lo, hi + 1, size=params.n_objects))
    capacity = max(1, round(params.capacity_fraction * sum(weights)))
    return KnapsackInstance(values, weights, capacity)


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything a run needs: problem source, encoding, backend, budgets."""

    problem_path: str | None = None
    generator: GeneratorParams | None = None
    encoding: CapacityEncoding = UNARY
    penalties: PenaltyWeights | None = None
    backend: str = "crossbar"
    crossbar: CrossbarConfig = CrossbarConfig()
    solver: SolverConfig = SolverConfig()
    budgets: tuple[int, ...] = (1000,)
    trials: int = 100
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if (self.problem_path is None) == (self.generator is None):
            raise ConfigError("provide exactly one of problem_path or generator")
        if self.backend not in ("exact", "crossbar"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if not self.budgets or any(b < 1 for b in self.budgets):
            raise ConfigError("budgets must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def resolve_problem(spec: ExperimentSpec) -> tuple[KnapsackInstance, dict]:
    """Load or generate the instance plus a provenance record for the sidecar."""
    if spec.problem_path is not None:
        instance = load_instance(spec.problem_path)
        origin = {"source": "file", "path": str(spec.problem_path)}
    else:
        g = spec.generator
        instance = generate_instance(
            g, np.random.SeedSequence(spec.seed, spawn_key=(_GENERATE_KEY,))
        )
        origin = {
            "source": "generated",
            "n_objects": g.n_objects,
            "weight_range": list(g.weight_range),
            "value_range": list(g.value_range),
            "capacity_fraction": g.capacity_fraction,
        }
    return instance, origin


def build_backend(
    spec: ExperimentSpec, instance: KnapsackInstance, crossbar_cfg: CrossbarConfig | None = None
):
    """Backend per spec; crossbar programming draws from the master seed."""
    hamiltonian = build_hamiltonian(
        instance, spec.encoding, spec.penalties or default_penalties(instance)
    )
    if spec.backend == "exact":
        return ExactBackend(hamiltonian)
    cfg = crossbar_cfg if crossbar_cfg is not None else spec.crossbar
    gen = solver._as_generator(
        np.random.SeedSequence(spec.seed, spawn_key=(_PROGRAM_KEY,))
    )
    return CrossbarBackend(program(hamiltonian, cfg, gen))


@dataclass(frozen=True)
class SweepRow:
    """One budget's statistics; repeat counts are None when p == 0."""

    budget: int
    trials: int
    successes: int
    probability: float
    wilson_low: float
    wilson_high: float
    repeats_99: int | None
    total_iterations: int | None


def _to_row(s: SuccessStats) -> SweepRow:
    if s.probability > 0.0:
        repeats = solver.repeats_for_confidence(s.probability)
        total = s.budget * repeats
    else:
        repeats = None
        total = None
    return SweepRow(
        s.budget, s.trials, s.successes, s.probability,
        s.wilson_low, s.wilson_high, repeats, total,
    )


def run_sweep(spec: ExperimentSpec) -> tuple[list[SweepRow], KnapsackInstance, dict]:
    """Success probability at each iteration budget."""
    instance, origin = resolve_problem(spec)
    backend = build_backend(spec, instance)
    optimal = brute_force_optimum(instance)
    rows = []
    for budget in spec.budgets:
        stats = solver.success_probability(
            backend, instance, spec.solver, budget, spec.trials, spec.seed,
            optimal_value=optimal.total_value, workers=spec.workers,
        )
        rows.append(_to_row(stats))
    sidecar = _sidecar(spec, instance, origin, optimal)
    return rows, instance, sidecar


def run_noise_study(
    spec: ExperimentSpec, multipliers: tuple[float, ...]
) -> tuple[list[tuple[float, SweepRow]], KnapsackInstance, dict]:
    """Sweep repeated at several noise multipliers (crossbar backend only)."""
    if spec.backend != "crossbar":
        raise ConfigError("noise study requires the crossbar backend")
    if any(m < 0 for m in multipliers):
        raise ConfigError("noise multipliers must be >= 0")
    instance, origin = resolve_problem(spec)
    optimal = brute_force_optimum(instance)
    rows: list[tuple[float, SweepRow]] = []
    for mult in multipliers:
        cfg = replace(spec.crossbar, noise_multiplier=float(mult))
        backend = build_backend(spec, instance, cfg)
        for budget in spec.budgets:
            stats = solver.success_probability(
                backend, instance, spec.solver, budget, spec.trials, spec.seed,
                optimal_value=optimal.total_value, workers=spec.workers,
            )
            rows.append((float(mult), _to_row(stats)))
    sidecar = _sidecar(spec, instance, origin, optimal)
    sidecar["multipliers"] = [float(m) for m in multipliers]
    return rows, instance, sidecar


def measure_read_std(backend: CrossbarBackend, state, seed: int, reads: int = 2000) -> float:
    """Sample std of repeated energy readouts of one state."""
    gen = solver._as_generator(np.random.SeedSequence(seed, spawn_key=(_STD_KEY,)))
    samples = [evaluate_energy(backend.xbar, state, gen) for _ in range(reads)]
    return float(np.std(np.asarray(samples), ddof=1))


def run_mitigation(
    spec: ExperimentSpec, replica_counts: tuple[int, ...] = (1, 3)
) -> tuple[list[tuple[int, SweepRow, float]], KnapsackInstance, dict]:
    """Replica averaging study: success and readout spread per replica count."""
    if spec.backend != "crossbar":
        raise ConfigError("mitigation study requires the crossbar backend")
    if any(r < 1 for r in replica_counts):
        raise ConfigError("replica counts must be >= 1")
    instance, origin = resolve_problem(spec)
    optimal = brute_force_optimum(instance)
    rows: list[tuple[int, SweepRow, float]] = []
    for replicas in replica_counts:
        cfg = replace(spec.crossbar, replicas=int(replicas))
        backend = build_backend(spec, instance, cfg)
        probe = solution_state(backend.hamiltonian, optimal)
        read_std = measure_read_std(backend, probe, spec.seed)
        for budget in spec.budgets:
            stats = solver.success_probability(
                backend, instance, spec.solver, budget, spec.trials, spec.seed,
                optimal_value=optimal.total_value, workers=spec.workers,
            )
            rows.append((int(replicas), _to_row(stats), read_std))
    sidecar = _sidecar(spec, instance, origin, optimal)
    sidecar["replica_counts"] = [int(r) for r in replica_counts]
    sidecar["read_std"] = {str(r): std for r, row, std in rows if row.budget == spec.budgets[0]}
    return rows, instance, sidecar


def run_rng_test(outcomes: int, draws: int, seed: int) -> dict:
    """Draw uniforms from a sized device bank and test them for uniformity.

    Chi-square goodness of fit at the 99% level plus the observed redundancy
    (rejection) rate against its ideal value (2^d mod outcomes) / 2^d.
    """
    if outcomes < 2:
        raise ConfigError("outcomes must be >= 2")
    if draws < 1:
        raise ConfigError("draws must be >= 1")
    devices = min_devices(outcomes)
    bank = DeviceBank.sized(devices)
    gen = solver._as_generator(np.random.SeedSequence(seed, spawn_key=(_RNG_TEST_KEY,)))
    space = 1 << devices
    limit = space - (space % outcomes)
    counts = np.zeros(outcomes, dtype=np.int64)
    rejected = 0
    patterns = 0
    for _ in range(draws):
        # Instrumented copy of draw_uniform so rejections are countable.
        pattern = 0
        for _attempt in range(64):
            pattern = pattern_from_bits(draw_bits(bank, gen))
            patterns += 1
            if pattern < limit:
                break
            rejected += 1
        counts[pattern % outcomes] += 1
    expected = draws / outcomes
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    critical = float(scipy_stats.chi2.ppf(0.99, outcomes - 1))
    return {
        "outcomes": outcomes,
        "devices": devices,
        "draws": draws,
        "seed": seed,
        "counts": counts.tolist(),
        "chi2": chi2,
        "chi2_critical_99": critical,
        "uniform_at_99": bool(chi2 <= critical),
        "patterns_drawn": patterns,
        "rejected": rejected,
        "redundancy_rate": rejected / patterns if patterns else 0.0,
        "ideal_redundancy_rate": (space % outcomes) / space,
    }


def _sidecar(spec: ExperimentSpec, instance, origin, optimal) -> dict:
    return {
        "instance": instance.to_dict(),
        "origin": origin,
        "optimal_value": optimal.total_value,
        "optimal_weight": optimal.total_weight,
        "optimal_chosen": list(optimal.chosen),
        "encoding": str(spec.encoding),
        "backend": spec.backend,
        "seed": spec.seed,
        "trials": spec.trials,
        "budgets": list(spec.budgets),
        "crossbar": {
            "quant_bits": spec.crossbar.quant_bits,
            "prog_noise_std": spec.crossbar.prog_noise_std,
            "read_noise_std": spec.crossbar.read_noise_std,
            "noise_multiplier": spec.crossbar.noise_multiplier,
            "replicas": spec.crossbar.replicas,
            "g_max": spec.crossbar.g_max,
        },
        "solver": {
            "flip_max_initial": spec.solver.flip_max_initial,
            "flip_max_final": spec.solver.flip_max_final,
            "schedule": spec.solver.schedule,
            "acceptance": spec.solver.acceptance,
            "adopt_probability": spec.solver.adopt_probability,
            "rng_source": spec.solver.rng_source,
            "shared_flip_plan": spec.solver.shared_flip_plan,
        },
        "kernel": solver._backend.KERNEL_NAME,
    }


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


_SWEEP_HEADER = "budget,trials,successes,p,wilson_lo,wilson_hi,repeats_99,total_iterations"


def _row_fields(row: SweepRow) -> list:
    return [
        row.budget, row.trials, row.successes, row.probability,
        row.wilson_low, row.wilson_high, row.repeats_99, row.total_iterations,
    ]


def sweep_csv(rows: list[SweepRow]) -> str:
    out = StringIO()
    out.write(_SWEEP_HEADER + "\n")
    for row in rows:
        out.write(",".join(_fmt(x) for x in _row_fields(row)) + "\n")
    return out.getvalue()


def noise_study_csv(rows: list[tuple[float, SweepRow]]) -> str:
    out = StringIO()
    out.write("multiplier," + _SWEEP_HEADER + "\n")
    for mult, row in rows:
        out.write(",".join(_fmt(x) for x in [mult] + _row_fields(row)) + "\n")
    return out.getvalue()


def mitigation_csv(rows: list[tuple[int, SweepRow, float]]) -> str:
    out = StringIO()
    out.write("replicas," + _SWEEP_HEADER + ",energy_read_std\n")
    for replicas, row, std in rows:
        out.write(
            ",".join(_fmt(x) for x in [replicas] + _row_fields(row) + [std]) + "\n"
        )
    return out.getvalue()
