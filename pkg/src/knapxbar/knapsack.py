"""0/1 knapsack instances, selection scoring, and an exhaustive optimum oracle."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# 2^30 states is the largest enumeration we are willing to run.
BRUTE_FORCE_CAP = 30
_CHUNK_BITS = 16

DATA_DIR = Path(__file__).parent / "data"


@dataclass(frozen=True)
class KnapsackInstance:
    """Item values and weights plus a capacity limit, all positive integers."""

    values: tuple[int, ...]
    weights: tuple[int, ...]
    capacity: int

    @property
    def n_items(self) -> int:
        return len(self.values)

    def to_dict(self) -> dict:
        return {
            "values": list(self.values),
            "weights": list(self.weights),
            "capacity": self.capacity,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KnapsackInstance":
        try:
            values = tuple(int(v) for v in data["values"])
            weights = tuple(int(w) for w in data["weights"])
            capacity = int(data["capacity"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed instance data: {exc}") from exc
        return cls(values, weights, capacity)


@dataclass(frozen=True)
class Selection:
    """A 0/1 pick per item with its totals and capacity verdict."""

    chosen: tuple[int, ...]
    total_value: int
    total_weight: int
    feasible: bool


def validate(instance: KnapsackInstance) -> list[str]:
    """Return a list of violated invariants; an empty list means valid."""
    problems: list[str] = []
    if len(instance.values) != len(instance.weights):
        problems.append(
            f"values has {len(instance.values)} entries but weights has {len(instance.weights)}"
        )
    if len(instance.values) == 0:
        problems.append("instance has no items")
    for label, seq in (("value", instance.values), ("weight", instance.weights)):
        for i, entry in enumerate(seq):
            if not isinstance(entry, (int, np.integer)) or isinstance(entry, bool):
                problems.append(f"{label}[{i}] is not an integer: {entry!r}")
            elif entry < 1:
                problems.append(f"{label}[{i}] must be >= 1, got {entry}")
    if not isinstance(instance.capacity, (int, np.integer)) or isinstance(instance.capacity, bool):
        problems.append(f"capacity is not an integer: {instance.capacity!r}")
    elif instance.capacity < 1:
        problems.append(f"capacity must be >= 1, got {instance.capacity}")
    return problems


def check_valid(instance: KnapsackInstance) -> None:
    problems = validate(instance)
    if problems:
        raise ValueError("invalid instance: " + "; ".join(problems))


def evaluate_selection(instance: KnapsackInstance, chosen) -> Selection:
    """Score a 0/1 item pick against the instance."""
    bits = tuple(int(b) for b in chosen)
    if len(bits) != instance.n_items:
        raise ValueError(f"selection has {len(bits)} bits for {instance.n_items} items")
    if any(b not in (0, 1) for b in bits):
        raise ValueError("selection bits must be 0 or 1")
    total_value = sum(v for v, b in zip(instance.values, bits) if b)
    total_weight = sum(w for w, b in zip(instance.weights, bits) if b)
    return Selection(bits, total_value, total_weight, total_weight <= instance.capacity)


def brute_force_optimum(instance: KnapsackInstance) -> Selection:
    """Enumerate every subset and return the best feasible one.

    Ties on total value resolve to the lexicographically smallest bit vector.
    Refuses instances above BRUTE_FORCE_CAP items.
    """
    check_valid(instance)
    n = instance.n_items
    if n > BRUTE_FORCE_CAP:
        raise ValueError(f"exhaustive search capped at {BRUTE_FORCE_CAP} items, got {n}")
    values = np.asarray(instance.values, dtype=np.int64)
    weights = np.asarray(instance.weights, dtype=np.int64)
    # Bit 0 of the vector maps to the most significant bit of the mask, so
    # mask order is lexicographic order and argmax's first-hit rule gives the
    # lexicographically smallest winner.
    shifts = np.arange(n - 1, -1, -1, dtype=np.uint64)
    best_value = -1
    best_mask = 0
    total = 1 << n
    chunk = 1 << min(n, _CHUNK_BITS)
    for start in range(0, total, chunk):
        masks = np.arange(start, min(start + chunk, total), dtype=np.uint64)
        bits = ((masks[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.int64)
        totals = bits @ values
        totals[bits @ weights > instance.capacity] = -1
        k = int(np.argmax(totals))
        if totals[k] > best_value:
            best_value = int(totals[k])
            best_mask = start + k
    chosen = tuple(int((best_mask >> int(s)) & 1) for s in shifts)
    return evaluate_selection(instance, chosen)


def load_instance(path) -> KnapsackInstance:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    instance = KnapsackInstance.from_dict(data)
    check_valid(instance)
    return instance


def save_instance(instance: KnapsackInstance, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(instance.to_dict(), fh, indent=2)
        fh.write("\n")


def bundled_instance_path(name: str = "five_items") -> Path:
    """Path of a data file shipped with the package."""
    return DATA_DIR / f"{name}.json"
