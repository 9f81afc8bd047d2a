"""Randomized competitive search over neuron states plus run statistics.

Two candidate states evolve side by side: each iteration both propose a
random multi-bit flip, accept or reject it against their own energy readout,
and occasionally the trailing state adopts the leading one. The number of
flipped bits is drawn uniformly from [0, bound] where bound follows a
schedule that narrows from a wide initial hop to single flips. An elitist
register keeps the best state ever read.

Energy readouts come from a backend: exact matrix evaluation or a noisy
programmed crossbar. Success means the elitist state decodes to an item pick
whose total value matches the exhaustive optimum.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from io import StringIO

import numpy as np

from . import _backend, _kernel_py
from .crossbar import (
    DeviceBank,
    ProgrammedCrossbar,
    evaluate_energy,
    min_devices,
    read_arrays,
)
from .encoder import Hamiltonian, SlotReport, decode, energy_exact
from .knapsack import KnapsackInstance, Selection, brute_force_optimum

_ACCEPTANCE_CODES = {
    "greedy": _kernel_py.ACCEPT_GREEDY,
    "always": _kernel_py.ACCEPT_ALWAYS,
    "metropolis": _kernel_py.ACCEPT_METROPOLIS,
}
_RNG_CODES = {
    "software": _kernel_py.RNG_SOFTWARE,
    "device-bank": _kernel_py.RNG_DEVICE_BANK,
}

# 95% two-sided normal quantile used by the Wilson interval.
_WILSON_Z = 1.959963984540054


@dataclass(frozen=True)
class SolverConfig:
    """Search knobs; flip_max_initial=None resolves to min(5, n)."""

    max_iterations: int = 1000
    flip_max_initial: int | None = None
    flip_max_final: int = 1
    schedule: str = "linear"
    acceptance: str = "greedy"
    metropolis_t0: float = 1000.0
    metropolis_decay: float = 0.95
    adopt_probability: float = 0.1
    rng_source: str = "software"
    shared_flip_plan: bool = False
    stall_window: int = 0
    target_energy: float | None = None

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.schedule not in ("linear", "constant"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.acceptance not in _ACCEPTANCE_CODES:
            raise ValueError(f"unknown acceptance rule {self.acceptance!r}")
        if self.rng_source not in _RNG_CODES:
            raise ValueError(f"unknown rng source {self.rng_source!r}")
        if not 0.0 <= self.adopt_probability <= 1.0:
            raise ValueError("adopt_probability must be in [0, 1]")
        if self.stall_window < 0:
            raise ValueError("stall_window must be >= 0")


def resolve_config(config: SolverConfig, n_neurons: int) -> SolverConfig:
    """Fill flip_max_initial and check the flip bounds against n_neurons."""
    initial = config.flip_max_initial
    if initial is None:
        initial = min(5, n_neurons)
    if not 1 <= config.flip_max_final <= initial <= n_neurons:
        raise ValueError(
            f"need 1 <= flip_max_final <= flip_max_initial <= {n_neurons}, "
            f"got final={config.flip_max_final} initial={initial}"
        )
    return replace(config, flip_max_initial=initial)


def flip_bound(iteration: int, config: SolverConfig) -> int:
    """Largest flip count allowed at an iteration under the schedule.

    Linear interpolation from flip_max_initial at iteration 0 to
    flip_max_final at the last iteration, rounded half up.
    """
    if config.flip_max_initial is None:
        raise ValueError("config must be resolved first")
    if not 0 <= iteration < config.max_iterations:
        raise ValueError(f"iteration {iteration} outside [0, {config.max_iterations})")
    initial, final = config.flip_max_initial, config.flip_max_final
    if config.schedule == "constant" or config.max_iterations == 1:
        return initial
    span = config.max_iterations - 1
    x = initial + (final - initial) * iteration / span
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class FlipPlan:
    """How many bits to flip and which ones (distinct, in draw order)."""

    flip_count: int
    indices: tuple[int, ...]


def sample_flip_plan(
    n_neurons: int,
    bound: int,
    rng: np.random.Generator,
    bank: DeviceBank | None = None,
) -> FlipPlan:
    """Draw a flip count uniform on [0, bound] and that many distinct indices."""
    if bound < 1:
        raise ValueError(f"flip bound must be >= 1, got {bound}")
    if bound > n_neurons:
        raise ValueError(f"flip bound {bound} exceeds {n_neurons} neurons")
    if bank is None:
        m, idx = _kernel_py._sample_plan(
            rng, n_neurons, bound, _kernel_py.RNG_SOFTWARE, None
        )
    else:
        m, idx = _kernel_py._sample_plan(
            rng, n_neurons, bound, _kernel_py.RNG_DEVICE_BANK, bank.stds
        )
    return FlipPlan(m, tuple(idx))


@dataclass(frozen=True, eq=False)
class EnergyTrace:
    """Per-iteration readouts; row 0 is the initial state, flips are 0 there."""

    e1: np.ndarray
    e2: np.ndarray
    best: np.ndarray
    flips1: np.ndarray
    flips2: np.ndarray


@dataclass(frozen=True, eq=False)
class TrialResult:
    """Outcome of one search trial."""

    best_state: np.ndarray
    best_noisy_energy: float
    best_exact_energy: float
    iterations_run: int
    iteration_of_best: int
    success: bool
    selection: Selection
    slot_report: SlotReport
    energy_trace: EnergyTrace | None = None
    state_trace: tuple[np.ndarray, np.ndarray] | None = None


class ExactBackend:
    """Noise-free energies straight from the ideal weight matrix."""

    name = "exact"

    def __init__(self, hamiltonian: Hamiltonian):
        self.hamiltonian = hamiltonian

    @property
    def dimension(self) -> int:
        return self.hamiltonian.dimension

    def read(self, bits, rng=None) -> float:
        return energy_exact(self.hamiltonian, bits)


class CrossbarBackend:
    """Energies from gated noisy readout of a programmed array."""

    name = "crossbar"

    def __init__(self, xbar: ProgrammedCrossbar):
        self.xbar = xbar
        self.hamiltonian = xbar.hamiltonian

    @property
    def dimension(self) -> int:
        return self.hamiltonian.dimension

    def read(self, bits, rng) -> float:
        return evaluate_energy(self.xbar, bits, rng)


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def device_bank_for(n_neurons: int, bound: int) -> DeviceBank:
    """Bank sized for both index draws (n outcomes) and counts (bound+1)."""
    return DeviceBank.sized(min_devices(max(n_neurons, bound + 1)))


def run_trial(
    backend,
    instance: KnapsackInstance,
    config: SolverConfig,
    seed,
    optimal_value: int | None = None,
    record_trace: bool = False,
    record_states: bool = False,
) -> TrialResult:
    """One full search on the backend, judged against the exhaustive optimum."""
    if not isinstance(backend, (ExactBackend, CrossbarBackend)):
        raise TypeError(f"unsupported backend {backend!r}")
    n = backend.dimension
    cfg = resolve_config(config, n)
    if record_states and n > 64:
        raise ValueError("state recording packs states into 64-bit words")
    bounds = np.array(
        [flip_bound(t, cfg) for t in range(cfg.max_iterations)], dtype=np.int64
    )
    gen = _as_generator(seed)

    rng_mode = _RNG_CODES[cfg.rng_source]
    if rng_mode == _kernel_py.RNG_DEVICE_BANK:
        bank_stds = device_bank_for(n, cfg.flip_max_initial).stds
    else:
        bank_stds = np.empty(0, dtype=np.float64)

    dummy2 = np.zeros((1, 1), dtype=np.float64)
    dummy3 = np.zeros((1, 1, 1), dtype=np.float64)
    if isinstance(backend, ExactBackend):
        args = (0, backend.hamiltonian.upper, dummy3, dummy3, 1.0,
                float(backend.hamiltonian.offset), 0.0)
    else:
        xbar = backend.xbar
        pos, neg = read_arrays(xbar)
        args = (
            1, dummy2, pos, neg, xbar.scale,
            float(xbar.hamiltonian.offset),
            xbar.config.effective_read_std * xbar.config.g_max,
        )

    raw = _backend.run_trial_kernel(
        *args,
        bounds,
        _ACCEPTANCE_CODES[cfg.acceptance],
        cfg.metropolis_t0,
        cfg.metropolis_decay,
        cfg.adopt_probability,
        cfg.shared_flip_plan,
        rng_mode,
        bank_stds,
        cfg.stall_window,
        cfg.target_energy if cfg.target_energy is not None else 0.0,
        cfg.target_energy is not None,
        gen,
        record_trace,
        record_states,
    )

    hamiltonian = backend.hamiltonian
    best_state = raw["best_state"]
    selection, slot_report = decode(hamiltonian, best_state, instance)
    if optimal_value is None:
        optimal_value = brute_force_optimum(instance).total_value
    success = selection.feasible and selection.total_value == optimal_value
    trace = None
    if record_trace:
        trace = EnergyTrace(
            raw["e1"], raw["e2"], raw["best_trace"], raw["flips1"], raw["flips2"]
        )
    states = (raw["states1"], raw["states2"]) if record_states else None
    return TrialResult(
        best_state=best_state,
        best_noisy_energy=raw["best_energy"],
        best_exact_energy=energy_exact(hamiltonian, best_state),
        iterations_run=raw["iterations_run"],
        iteration_of_best=raw["iteration_of_best"],
        success=success,
        selection=selection,
        slot_report=slot_report,
        energy_trace=trace,
        state_trace=states,
    )


def trace_csv(result: TrialResult) -> str:
    """CSV rows iteration,e1,e2,best,flips1,flips2 for a recorded trial."""
    if result.energy_trace is None:
        raise ValueError("trial was run without record_trace")
    t = result.energy_trace
    out = StringIO()
    out.write("iteration,e1,e2,best,flips1,flips2\n")
    for i in range(t.e1.shape[0]):
        out.write(
            f"{i},{float(t.e1[i])!r},{float(t.e2[i])!r},{float(t.best[i])!r},"
            f"{int(t.flips1[i])},{int(t.flips2[i])}\n"
        )
    return out.getvalue()


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes must be in [0, trials]")
    z = _WILSON_Z
    p_hat = successes / trials
    denom = 1.0 + z * z / trials
    center = (p_hat + z * z / (2 * trials)) / denom
    half = (
        z
        * math.sqrt(p_hat * (1.0 - p_hat) / trials + z * z / (4 * trials * trials))
        / denom
    )
    # The boundary cases are exactly 0 and 1; keep rounding residue out.
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == trials else min(1.0, center + half)
    return low, high


def repeats_for_confidence(p: float) -> int:
    """Fewest repeats r with (1-p)^r <= 0.01, i.e. 99% chance of a success.

    p = 1 returns 1 by convention; p outside (0, 1] is an error.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"success probability must be in (0, 1], got {p}")
    if p == 1.0:
        return 1
    q = 1.0 - p
    # Plain ceil of the log ratio; representation edges (1 - 0.99 lands a
    # hair above 0.01) must not bump the count past the intended value.
    return max(1, math.ceil(math.log(0.01) / math.log(q)))


def total_iterations(budget: int, p: float) -> int:
    """Iterations needed for 99% confidence when each repeat gets `budget`."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    return budget * repeats_for_confidence(p)


@dataclass(frozen=True)
class SuccessStats:
    """Estimated success probability at one iteration budget."""

    budget: int
    trials: int
    successes: int
    probability: float
    wilson_low: float
    wilson_high: float


def trial_seed(master_seed: int, budget: int, trial_index: int) -> np.random.SeedSequence:
    """Independent stream per (budget, trial); stable under parallelism."""
    return np.random.SeedSequence(master_seed, spawn_key=(budget, trial_index))


def success_probability(
    backend,
    instance: KnapsackInstance,
    config: SolverConfig,
    budget: int,
    trials: int,
    master_seed: int,
    optimal_value: int | None = None,
    workers: int = 1,
) -> SuccessStats:
    """Fraction of independent trials that land on the optimum."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if optimal_value is None:
        optimal_value = brute_force_optimum(instance).total_value
    cfg = replace(config, max_iterations=budget)

    def one(t: int) -> bool:
        seed = trial_seed(master_seed, budget, t)
        return run_trial(
            backend, instance, cfg, seed, optimal_value=optimal_value
        ).success

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, range(trials)))
    else:
        outcomes = [one(t) for t in range(trials)]
    successes = sum(outcomes)
    low, high = wilson_interval(successes, trials)
    return SuccessStats(budget, trials, successes, successes / trials, low, high)
