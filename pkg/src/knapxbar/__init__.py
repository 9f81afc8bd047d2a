"""Knapsack optimization on a simulated noisy analog crossbar.

Pipeline: encode a 0/1 knapsack instance as a quadratic binary energy,
program the weight matrix into a simulated memristor crossbar (quantized,
noisy, optionally replicated), then run a randomized competitive search whose
energy readouts come from the array. Statistics helpers quantify success
probability and iteration cost; a device bank of noisy threshold readings can
replace the software random source.
"""

from ._backend import HAVE_EXTENSION, KERNEL_NAME
from .crossbar import (
    CrossbarConfig,
    DeviceBank,
    ProgrammedCrossbar,
    draw_bits,
    draw_uniform,
    evaluate_energy,
    min_devices,
    program,
    readout_matrix,
)
from .encoder import (
    CapacityEncoding,
    Hamiltonian,
    PenaltyWeights,
    UNARY,
    build_hamiltonian,
    capacity_slots,
    decode,
    default_penalties,
    energy_exact,
    exhaustive_min,
    parse_encoding,
)
from .knapsack import (
    KnapsackInstance,
    Selection,
    brute_force_optimum,
    evaluate_selection,
    load_instance,
    save_instance,
    validate,
)
from .solver import (
    CrossbarBackend,
    ExactBackend,
    SolverConfig,
    TrialResult,
    repeats_for_confidence,
    run_trial,
    success_probability,
    total_iterations,
    wilson_interval,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityEncoding",
    "CrossbarBackend",
    "CrossbarConfig",
    "DeviceBank",
    "ExactBackend",
    "HAVE_EXTENSION",
    "Hamiltonian",
    "KERNEL_NAME",
    "KnapsackInstance",
    "PenaltyWeights",
    "ProgrammedCrossbar",
    "Selection",
    "SolverConfig",
    "TrialResult",
    "UNARY",
    "brute_force_optimum",
    "build_hamiltonian",
    "capacity_slots",
    "decode",
    "default_penalties",
    "draw_bits",
    "draw_uniform",
    "energy_exact",
    "evaluate_energy",
    "evaluate_selection",
    "exhaustive_min",
    "load_instance",
    "min_devices",
    "parse_encoding",
    "program",
    "readout_matrix",
    "repeats_for_confidence",
    "run_trial",
    "save_instance",
    "success_probability",
    "total_iterations",
    "validate",
    "wilson_interval",
]
