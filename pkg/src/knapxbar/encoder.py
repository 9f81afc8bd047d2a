"""Quadratic binary energy encoding of knapsack instances.

An instance with N items maps to a neuron vector q = [x_1..x_N, y_1..y_M]
(item bits first, then capacity-slot bits that label the achieved load) and an
upper-triangular weight matrix H with constant offset such that

    E(q) = q H q^T + offset
         = -s1 * sum(v_i x_i) + s2 * (1 - sum(y_j))^2
           + s3 * (sum(c_j y_j) - sum(w_i x_i))^2

for the one-hot slot ladders (unary and shrink), where exactly one slot bit
labels the achieved load. The log encoding instead treats the slot bits as a
binary register whose subset sum IS the load, so the one-hot term drops out:

    E(q) = -s1 * sum(v_i x_i) + s3 * (sum(c_j y_j) - sum(w_i x_i))^2

Minimizing E over q solves the instance when the penalty weights s2, s3
dominate the largest reachable reward s1 * max(v).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from io import StringIO

import numpy as np

from .knapsack import KnapsackInstance, Selection, check_valid, evaluate_selection

# 2^22 states is the largest neuron-space enumeration we are willing to run.
EXHAUSTIVE_CAP = 22
_CHUNK_BITS = 16


@dataclass(frozen=True)
class CapacityEncoding:
    """Rule that picks the slot coefficients c_1..c_M for a capacity W.

    unary    : c_j = j, one slot per unit of load (M = W).
    shrink   : c_j = j*step, coarser unary ladder (M = ceil(W / step)).
               Loads that are not multiples of step cannot be labelled
               exactly, so the size-match penalty may bind off-lattice.
    log      : powers of two 1, 2, 4, ... plus a closing coefficient
               W + 1 - 2^k so subset sums cover 0..W with M = floor(log2 W) + 1.
               Slots act as a binary load register (several may be set), so
               the one-hot penalty does not apply to this kind.
    """

    kind: str
    shrink_step: int = 1

    def __post_init__(self):
        if self.kind not in ("unary", "shrink", "log"):
            raise ValueError(f"unknown capacity encoding {self.kind!r}")
        if self.kind == "shrink" and self.shrink_step < 1:
            raise ValueError(f"shrink step must be >= 1, got {self.shrink_step}")

    def __str__(self) -> str:
        if self.kind == "shrink":
            return f"shrink:{self.shrink_step}"
        return self.kind


UNARY = CapacityEncoding("unary")


def parse_encoding(text: str) -> CapacityEncoding:
    """Parse 'unary', 'log', or 'shrink:<step>'."""
    if text in ("unary", "log"):
        return CapacityEncoding(text)
    if text.startswith("shrink:"):
        try:
            step = int(text.split(":", 1)[1])
        except ValueError as exc:
            raise ValueError(f"bad shrink step in {text!r}") from exc
        return CapacityEncoding("shrink", step)
    raise ValueError(f"unknown capacity encoding {text!r}")


def capacity_slots(capacity: int, encoding: CapacityEncoding = UNARY) -> tuple[int, ...]:
    """Slot coefficients for the given capacity under the encoding rule."""
    if capacity < 1:
        raise ValueError(f"capacity must be >= 1, got {capacity}")
    if encoding.kind == "unary":
        return tuple(range(1, capacity + 1))
    if encoding.kind == "shrink":
        step = encoding.shrink_step
        if step > capacity:
            raise ValueError(f"shrink step {step} exceeds capacity {capacity}")
        count = -(-capacity // step)
        return tuple(j * step for j in range(1, count + 1))
    # log: 1, 2, ..., 2^(k-1) then W + 1 - 2^k, with k = floor(log2 W)
    k = capacity.bit_length() - 1
    coeffs = [1 << j for j in range(k)]
    coeffs.append(capacity + 1 - (1 << k))
    return tuple(coeffs)


@dataclass(frozen=True)
class PenaltyWeights:
    """Strengths of the reward (sigma1) and the two constraint penalties."""

    sigma1: float
    sigma2: float
    sigma3: float

    def __post_init__(self):
        for name, value in (("sigma1", self.sigma1), ("sigma2", self.sigma2),
                            ("sigma3", self.sigma3)):
            if not value > 0:
                raise ValueError(f"{name} must be > 0, got {value}")


def default_penalties(instance: KnapsackInstance) -> PenaltyWeights:
    """sigma1 = 1 with both penalties one unit above the largest reward."""
    bound = float(max(instance.values)) + 1.0
    return PenaltyWeights(1.0, bound, bound)


def check_penalties(penalties: PenaltyWeights, instance: KnapsackInstance) -> None:
    # Penalties below the largest reachable reward let constraint-violating
    # states undercut the feasible optimum.
    bound = penalties.sigma1 * max(instance.values)
    if not (penalties.sigma2 > bound and penalties.sigma3 > bound):
        raise ValueError(
            f"penalties must exceed sigma1*max(value) = {bound}; "
            f"got sigma2={penalties.sigma2}, sigma3={penalties.sigma3}"
        )


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Upper-triangular weight matrix, constant offset, and layout metadata.

    one_hot records the slot semantics: True for the unary/shrink ladders
    (exactly one slot bit should be set), False for the log register.
    """

    upper: np.ndarray
    offset: float
    n_items: int
    slot_coeffs: tuple[int, ...]
    penalties: PenaltyWeights
    one_hot: bool = True

    @property
    def dimension(self) -> int:
        return self.upper.shape[0]

    @property
    def n_slots(self) -> int:
        return len(self.slot_coeffs)


def build_hamiltonian(
    instance: KnapsackInstance,
    encoding: CapacityEncoding = UNARY,
    penalties: PenaltyWeights | None = None,
) -> Hamiltonian:
    """Expand the reward and squared penalty terms into matrix entries."""
    check_valid(instance)
    if penalties is None:
        penalties = default_penalties(instance)
    check_penalties(penalties, instance)
    slots = capacity_slots(instance.capacity, encoding)
    s1, s2, s3 = penalties.sigma1, penalties.sigma2, penalties.sigma3
    v = np.asarray(instance.values, dtype=np.float64)
    w = np.asarray(instance.weights, dtype=np.float64)
    c = np.asarray(slots, dtype=np.float64)
    n_items = w.size
    n = n_items + c.size

    one_hot = encoding.kind != "log"

    upper = np.zeros((n, n), dtype=np.float64)
    items = slice(0, n_items)
    slot_block = slice(n_items, n)
    # Cross terms carry a factor 2 because each unordered pair appears once.
    upper[items, items] = np.triu(2.0 * s3 * np.outer(w, w), k=1)
    upper[items, slot_block] = -2.0 * s3 * np.outer(w, c)
    if one_hot:
        upper[slot_block, slot_block] = np.triu(
            2.0 * s2 + 2.0 * s3 * np.outer(c, c), k=1
        )
        slot_diag = s3 * c * c - s2
        offset = float(s2)
    else:
        # Log register: the load is the subset sum of the active slots, so
        # there is no one-hot term and no constant left over.
        upper[slot_block, slot_block] = np.triu(2.0 * s3 * np.outer(c, c), k=1)
        slot_diag = s3 * c * c
        offset = 0.0
    diag = np.concatenate([s3 * w * w - s1 * v, slot_diag])
    upper[np.diag_indices(n)] = diag
    upper.setflags(write=False)
    return Hamiltonian(upper, offset, n_items, slots, penalties, one_hot)


def _check_state(hamiltonian: Hamiltonian, bits) -> np.ndarray:
    state = np.asarray(bits, dtype=np.uint8)
    if state.ndim != 1 or state.size != hamiltonian.dimension:
        raise ValueError(
            f"state must have {hamiltonian.dimension} bits, got shape {state.shape}"
        )
    if np.any(state > 1):
        raise ValueError("state bits must be 0 or 1")
    return state


def energy_exact(hamiltonian: Hamiltonian, bits) -> float:
    """q H q^T + offset, folded over active upper-triangle entries in row order.

    The fold order matches the readout kernels so noise-free backends agree
    bit for bit.
    """
    state = _check_state(hamiltonian, bits)
    active = np.flatnonzero(state)
    sub = hamiltonian.upper[np.ix_(active, active)]
    terms = sub[np.triu_indices(active.size)]
    if terms.size == 0:
        return float(hamiltonian.offset)
    return float(np.add.accumulate(terms)[-1] + hamiltonian.offset)


def energy_by_terms(
    instance: KnapsackInstance,
    bits,
    encoding: CapacityEncoding = UNARY,
    penalties: PenaltyWeights | None = None,
) -> float:
    """Evaluate the reward and penalty terms directly, bypassing the matrix.

    Reference path used to cross-check build_hamiltonian/energy_exact.
    """
    if penalties is None:
        penalties = default_penalties(instance)
    slots = capacity_slots(instance.capacity, encoding)
    n_items = instance.n_items
    state = [int(b) for b in bits]
    if len(state) != n_items + len(slots):
        raise ValueError("state length does not match item+slot count")
    x, y = state[:n_items], state[n_items:]
    reward = sum(v * b for v, b in zip(instance.values, x))
    one_hot_gap = 1 - sum(y)
    load_gap = sum(c * b for c, b in zip(slots, y)) - sum(
        w * b for w, b in zip(instance.weights, x)
    )
    if encoding.kind == "log":
        return -penalties.sigma1 * reward + penalties.sigma3 * load_gap**2
    return (
        -penalties.sigma1 * reward
        + penalties.sigma2 * one_hot_gap**2
        + penalties.sigma3 * load_gap**2
    )


@dataclass(frozen=True)
class SlotReport:
    """Constraint diagnostics for the slot half of a decoded state.

    one_hot_ok reports the exactly-one-slot fact; under the log register
    several active slots are legitimate, so only load_match_ok binds there.
    """

    active_slots: int
    slot_total: int
    one_hot_ok: bool
    load_match_ok: bool


def decode(
    hamiltonian: Hamiltonian, bits, instance: KnapsackInstance
) -> tuple[Selection, SlotReport]:
    """Split a neuron state into the item selection and slot diagnostics."""
    state = _check_state(hamiltonian, bits)
    selection = evaluate_selection(instance, state[: hamiltonian.n_items])
    slot_bits = state[hamiltonian.n_items :]
    active = int(slot_bits.sum())
    slot_total = int(sum(c * int(b) for c, b in zip(hamiltonian.slot_coeffs, slot_bits)))
    return selection, SlotReport(
        active_slots=active,
        slot_total=slot_total,
        one_hot_ok=active == 1,
        load_match_ok=slot_total == selection.total_weight,
    )


def _register_bits(slot_coeffs: tuple[int, ...], load: int) -> list[int]:
    # Coefficients are 1, 2, ..., 2^(k-1) plus a closing W + 1 - 2^k; any
    # load above 2^k - 1 needs the closing slot, the rest is plain binary.
    bits = [0] * len(slot_coeffs)
    head = 1 << (len(slot_coeffs) - 1)
    if load > head - 1:
        bits[-1] = 1
        load -= slot_coeffs[-1]
    for j in range(len(slot_coeffs) - 1):
        if load & (1 << j):
            bits[j] = 1
            load &= ~(1 << j)
    if load:
        raise ValueError(f"load not representable by register {slot_coeffs}")
    return bits


def solution_state(
    hamiltonian: Hamiltonian, selection: Selection
) -> np.ndarray:
    """Neuron state for a selection: item bits plus matching slot bits.

    One-hot ladders set the single slot whose coefficient equals the
    selection's total weight and raise if none does (e.g. off-lattice loads
    under a shrink encoding). The log register sets the subset of slots
    summing to the load instead.
    """
    state = np.zeros(hamiltonian.dimension, dtype=np.uint8)
    state[: hamiltonian.n_items] = selection.chosen
    if not hamiltonian.one_hot:
        bits = _register_bits(hamiltonian.slot_coeffs, selection.total_weight)
        state[hamiltonian.n_items :] = bits
        return state
    try:
        j = hamiltonian.slot_coeffs.index(selection.total_weight)
    except ValueError as exc:
        raise ValueError(
            f"no slot coefficient equals load {selection.total_weight}"
        ) from exc
    state[hamiltonian.n_items + j] = 1
    return state


def exhaustive_min(hamiltonian: Hamiltonian) -> tuple[np.ndarray, float]:
    """Scan all 2^n states for the energy minimum.

    Ties resolve to the lexicographically smallest state (bit 0 is the most
    significant position). Refuses matrices above EXHAUSTIVE_CAP neurons.
    """
    n = hamiltonian.dimension
    if n > EXHAUSTIVE_CAP:
        raise ValueError(f"exhaustive scan capped at {EXHAUSTIVE_CAP} neurons, got {n}")
    diag = np.diag(hamiltonian.upper).copy()
    cross = np.triu(hamiltonian.upper, k=1)
    shifts = np.arange(n - 1, -1, -1, dtype=np.uint64)
    best_energy = math.inf
    best_mask = 0
    total = 1 << n
    chunk = 1 << min(n, _CHUNK_BITS)
    for start in range(0, total, chunk):
        masks = np.arange(start, min(start + chunk, total), dtype=np.uint64)
        bits = ((masks[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.float64)
        energies = bits @ diag + np.einsum("ij,ij->i", bits @ cross, bits)
        k = int(np.argmin(energies))
        if energies[k] < best_energy:
            best_energy = float(energies[k])
            best_mask = start + k
    state = np.array([(best_mask >> int(s)) & 1 for s in shifts], dtype=np.uint8)
    return state, best_energy + float(hamiltonian.offset)


def _fmt(x: float) -> str:
    return repr(float(x))


def hamiltonian_csv(hamiltonian: Hamiltonian) -> str:
    """Render the matrix as CSV with a one-line layout header.

    Header: n, items, slots, the three penalty weights, and the offset.
    Then one row of the upper-triangular matrix per line.
    """
    p = hamiltonian.penalties
    out = StringIO()
    out.write(
        f"# n={hamiltonian.dimension},items={hamiltonian.n_items},"
        f"slots={hamiltonian.n_slots},sigma1={_fmt(p.sigma1)},"
        f"sigma2={_fmt(p.sigma2)},sigma3={_fmt(p.sigma3)},"
        f"offset={_fmt(hamiltonian.offset)}\n"
    )
    for row in hamiltonian.upper:
        out.write(",".join(_fmt(x) for x in row))
        out.write("\n")
    return out.getvalue()
