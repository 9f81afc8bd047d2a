"""Simulated analog in-memory compute array for quadratic energy readout.

A weight matrix is split into positive and negative parts, scaled so the
largest magnitude hits the top conductance, quantized to the device's level
grid, and written once per replica with frozen Gaussian programming error.
Energy readout activates the rows/columns of the set bits, adds fresh
Gaussian read noise to every active cell, averages replicas, and maps the
conductance sum back to energy units.

Also provides a bank of noisy threshold devices used as a physical random
number source.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from io import StringIO

import numpy as np

from .encoder import Hamiltonian, _check_state


@dataclass(frozen=True)
class CrossbarConfig:
    """Array geometry, conductance range, quantization, and noise levels.

    Noise scales are fractions of g_max. noise_multiplier scales both noise
    sources together (0 gives an ideal array); replicas is the number of
    independently programmed copies averaged at readout.

    The default stds are calibrated so that at unit multiplier the search
    statistics match a noiseless array on the bundled problem, while a few
    multiples of them measurably degrade success; absolute device noise is
    a free parameter of the model, only these orderings are meaningful.
    """

    rows: int = 64
    cols: int = 64
    g_max: float = 1.0
    quant_bits: int = 7
    prog_noise_std: float = 1.5e-6
    read_noise_std: float = 1.5e-6
    noise_multiplier: float = 1.0
    replicas: int = 1

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array must have at least one row and column")
        if not self.g_max > 0:
            raise ValueError(f"g_max must be > 0, got {self.g_max}")
        # 24 bits is already far below float64 rounding for these matrices;
        # larger instances need >16 bits to keep unit value gaps resolvable.
        if not 1 <= self.quant_bits <= 24:
            raise ValueError(f"quant_bits must be in 1..24, got {self.quant_bits}")
        if self.prog_noise_std < 0 or self.read_noise_std < 0:
            raise ValueError("noise std must be >= 0")
        if self.noise_multiplier < 0:
            raise ValueError("noise multiplier must be >= 0")
        if self.replicas < 1:
            raise ValueError(f"replicas must be >= 1, got {self.replicas}")

    @property
    def effective_prog_std(self) -> float:
        return self.prog_noise_std * self.noise_multiplier

    @property
    def effective_read_std(self) -> float:
        return self.read_noise_std * self.noise_multiplier


def split_signed(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split into element-wise positive and negative parts (both >= 0)."""
    m = np.asarray(matrix, dtype=np.float64)
    return np.maximum(m, 0.0), np.maximum(-m, 0.0)


def quantize(values: np.ndarray, g_max: float, quant_bits: int) -> np.ndarray:
    """Snap conductances in [0, g_max] to 2^quant_bits uniform levels."""
    levels = (1 << quant_bits) - 1
    arr = np.asarray(values, dtype=np.float64)
    if np.any(arr < 0) or np.any(arr > g_max):
        raise ValueError("conductance targets must lie in [0, g_max]")
    return np.rint(arr / g_max * levels) * (g_max / levels)


@dataclass(frozen=True, eq=False)
class ProgrammedCrossbar:
    """Replica conductance pairs holding one weight matrix.

    pos/neg have shape (replicas, n, n); targets are the quantized noise-free
    conductances. scale converts conductance differences back to energy
    units: H approx (pos - neg) * scale.
    """

    pos: np.ndarray
    neg: np.ndarray
    pos_target: np.ndarray
    neg_target: np.ndarray
    scale: float
    config: CrossbarConfig
    hamiltonian: Hamiltonian

    @property
    def dimension(self) -> int:
        return self.pos.shape[1]

    @property
    def replicas(self) -> int:
        return self.pos.shape[0]


def program(
    hamiltonian: Hamiltonian,
    config: CrossbarConfig = CrossbarConfig(),
    rng: np.random.Generator | None = None,
) -> ProgrammedCrossbar:
    """Write the matrix into replica arrays with frozen programming error.

    Draw order (when programming noise is on): for each replica, one (n, n)
    Gaussian block for the positive array, then one for the negative array.
    """
    n = hamiltonian.dimension
    if n > config.rows or n > config.cols:
        raise ValueError(
            f"matrix needs {n}x{n} cells but the array is {config.rows}x{config.cols}"
        )
    pos_part, neg_part = split_signed(hamiltonian.upper)
    max_abs = float(np.max(np.abs(hamiltonian.upper)))
    # scale is in energy units per conductance unit; an all-zero matrix keeps
    # scale = 1 so readout still returns the offset.
    scale = max_abs / config.g_max if max_abs > 0 else 1.0
    gain = config.g_max / max_abs if max_abs > 0 else 1.0
    pos_target = quantize(pos_part * gain, config.g_max, config.quant_bits)
    neg_target = quantize(neg_part * gain, config.g_max, config.quant_bits)

    sd = config.effective_prog_std * config.g_max
    reps = []
    for _ in range(config.replicas):
        if sd > 0:
            if rng is None:
                raise ValueError("programming noise requires an rng")
            p = np.clip(pos_target + sd * rng.standard_normal((n, n)), 0.0, config.g_max)
            q = np.clip(neg_target + sd * rng.standard_normal((n, n)), 0.0, config.g_max)
        else:
            p, q = pos_target.copy(), neg_target.copy()
        reps.append((p, q))
    pos = np.stack([p for p, _ in reps])
    neg = np.stack([q for _, q in reps])
    for arr in (pos, neg, pos_target, neg_target):
        arr.setflags(write=False)
    return ProgrammedCrossbar(
        pos, neg, pos_target, neg_target, scale, config, hamiltonian
    )


def with_replicas(xbar: ProgrammedCrossbar, replicas: int) -> ProgrammedCrossbar:
    """Reuse the first programmed replica pair, truncated/required to exist."""
    if replicas > xbar.replicas:
        raise ValueError(f"only {xbar.replicas} replicas programmed")
    cfg = replace(xbar.config, replicas=replicas)
    pos = xbar.pos[:replicas]
    neg = xbar.neg[:replicas]
    return ProgrammedCrossbar(
        pos, neg, xbar.pos_target, xbar.neg_target, xbar.scale, cfg, xbar.hamiltonian
    )


def read_arrays(xbar: ProgrammedCrossbar) -> tuple[np.ndarray, np.ndarray]:
    """Replica arrays as seen by readout.

    Fully noiseless replicas are bit-identical copies; reading just one keeps
    the mean exact in float arithmetic, so replica count cannot perturb
    noise-free results in the last bit.
    """
    if xbar.config.effective_prog_std == 0 and xbar.config.effective_read_std == 0:
        return xbar.pos[:1], xbar.neg[:1]
    return xbar.pos, xbar.neg


def evaluate_energy(
    xbar: ProgrammedCrossbar, bits, rng: np.random.Generator | None
) -> float:
    """One noisy gated readout of q H q^T + offset.

    Active cells are all (i, j) pairs with both bits set (the stored zeros of
    the lower triangle included). Per replica the positive contributions are
    accumulated in row-major order, then the negative ones, each cell with a
    fresh Gaussian read error; replica sums are averaged and mapped back to
    energy units.
    """
    from . import _backend

    state = _check_state(xbar.hamiltonian, bits)
    sd = xbar.config.effective_read_std * xbar.config.g_max
    if sd > 0 and rng is None:
        raise ValueError("read noise requires an rng")
    pos, neg = read_arrays(xbar)
    return _backend.read_energy(
        pos, neg, xbar.scale, float(xbar.hamiltonian.offset), sd, state, rng
    )


def readout_matrix(
    xbar: ProgrammedCrossbar, rng: np.random.Generator | None
) -> tuple[np.ndarray, np.ndarray]:
    """One noisy read of every cell.

    Returns (effective, errors): the replica-averaged signed matrix mapped to
    energy units, and the per-cell deviation from the ideal weights. Draw
    order: per replica, an (n, n) Gaussian block for the positive array, then
    one for the negative array.
    """
    n = xbar.dimension
    sd = xbar.config.effective_read_std * xbar.config.g_max
    total = np.zeros((n, n), dtype=np.float64)
    for r in range(xbar.replicas):
        p, m = xbar.pos[r], xbar.neg[r]
        if sd > 0:
            if rng is None:
                raise ValueError("read noise requires an rng")
            p = p + sd * rng.standard_normal((n, n))
            m = m + sd * rng.standard_normal((n, n))
        total += p - m
    effective = total / xbar.replicas * xbar.scale
    return effective, effective - xbar.hamiltonian.upper


def readout_csv(xbar: ProgrammedCrossbar, rng: np.random.Generator | None) -> str:
    """CSV dump of one full-array read: row,col,ideal,programmed,read,error."""
    effective, errors = readout_matrix(xbar, rng)
    programmed = (
        (xbar.pos.mean(axis=0) - xbar.neg.mean(axis=0)) * xbar.scale
    )
    ideal = xbar.hamiltonian.upper
    out = StringIO()
    out.write("row,col,ideal,programmed,read,error\n")
    n = xbar.dimension
    for i in range(n):
        for j in range(n):
            cells = (ideal[i, j], programmed[i, j], effective[i, j], errors[i, j])
            out.write(f"{i},{j}," + ",".join(repr(float(x)) for x in cells) + "\n")
    return out.getvalue()


def dequantized(xbar: ProgrammedCrossbar) -> np.ndarray:
    """Noise-free reconstruction: (pos_target - neg_target) * scale."""
    return (xbar.pos_target - xbar.neg_target) * xbar.scale


# --- noisy threshold devices as a random bit source ---------------------


@dataclass(frozen=True, eq=False)
class DeviceBank:
    """Fluctuating devices whose sign reads give one random bit each."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        if self.means.shape != self.stds.shape or self.means.ndim != 1:
            raise ValueError("means and stds must be equal-length vectors")
        if self.means.size < 1:
            raise ValueError("bank needs at least one device")
        if np.any(self.stds <= 0):
            raise ValueError("device stds must be > 0")

    @property
    def device_count(self) -> int:
        return self.means.size

    @classmethod
    def sized(cls, device_count: int, mean: float = 0.5, std: float = 0.05) -> "DeviceBank":
        means = np.full(device_count, mean, dtype=np.float64)
        stds = np.full(device_count, std, dtype=np.float64)
        means.setflags(write=False)
        stds.setflags(write=False)
        return cls(means, stds)


def draw_bits(bank: DeviceBank, rng: np.random.Generator) -> np.ndarray:
    """Read every device once; bit = 1 when the fluctuation is above mean."""
    z = rng.standard_normal(bank.device_count)
    return (bank.stds * z > 0.0).astype(np.uint8)


def pattern_from_bits(bits: np.ndarray) -> int:
    """Interpret device reads as an unsigned integer, first device = MSB."""
    pattern = 0
    for b in bits:
        pattern = (pattern << 1) | int(b)
    return pattern


# Rejection sampling retries at most this many times before falling back to a
# plain modulo (a bias of at most count/2^D).
REJECTION_CAP = 64


def draw_uniform(bank: DeviceBank, count: int, rng: np.random.Generator) -> int:
    """Uniform integer in [0, count) by rejection over device patterns."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    d = bank.device_count
    space = 1 << d
    if space < count:
        raise ValueError(f"{d} devices cannot address {count} outcomes")
    limit = space - (space % count)
    pattern = 0
    for _ in range(REJECTION_CAP):
        pattern = pattern_from_bits(draw_bits(bank, rng))
        if pattern < limit:
            return pattern % count
    return pattern % count


def min_devices(count: int) -> int:
    """Fewest devices d0 <= d <= d0+2 minimizing rejection waste for count.

    d0 = ceil(log2 count); waste is (2^d mod count) / 2^d, the chance a
    pattern falls in the redundant tail. Ties keep the smaller bank.
    """
    if count < 2:
        raise ValueError(f"count must be >= 2, got {count}")
    d0 = (count - 1).bit_length()
    best_d = d0
    best_waste = None
    for d in range(d0, d0 + 3):
        space = 1 << d
        waste = (space % count) / space
        if best_waste is None or waste < best_waste:
            best_waste = waste
            best_d = d
    return best_d
