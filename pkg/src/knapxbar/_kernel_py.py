"""Pure-Python search kernel, bit-compatible with the compiled extension.

Both kernels consume one shared PCG64 stream through the same two primitives
(standard normal, uniform [0, 1)) in a frozen draw order, so a trial produces
byte-identical results whichever kernel runs it. The order is:

  setup    n uniforms -> state 1 bits (u < 0.5), n uniforms -> state 2 bits,
           read(state 1), read(state 2)
  per step flip plan 1 (count then indices), flip plan 2 (skipped when the
           plan is shared), read(candidate 1), read(candidate 2),
           per-state metropolis uniform only when the candidate is worse,
           one adoption uniform when adopt_probability > 0
  read     per replica: one normal per active cell of the positive array in
           row-major order, then the negative array; nothing when the read
           std is zero
  plan     flip count m uniform in [0, bound], then m distinct indices,
           redrawing duplicates; software source uses floor(u * k), the
           device bank uses rejection-sampled threshold patterns

Trial results never depend on which kernel ran: the compiled path exists for
speed only.
"""

from __future__ import annotations

import math

import numpy as np

ACCEPT_GREEDY = 0
ACCEPT_ALWAYS = 1
ACCEPT_METROPOLIS = 2

RNG_SOFTWARE = 0
RNG_DEVICE_BANK = 1


def _uniform_int(gen: np.random.Generator, k: int) -> int:
    v = int(gen.random() * k)
    return k - 1 if v >= k else v


def _bank_uniform(gen: np.random.Generator, bank_stds: np.ndarray, count: int) -> int:
    d = bank_stds.shape[0]
    space = 1 << d
    limit = space - (space % count)
    pattern = 0
    for _ in range(64):
        z = gen.standard_normal(d)
        pattern = 0
        for k in range(d):
            pattern = (pattern << 1) | (1 if bank_stds[k] * z[k] > 0.0 else 0)
        if pattern < limit:
            return pattern % count
    return pattern % count


def _draw_int(gen, k, rng_mode, bank_stds) -> int:
    if rng_mode == RNG_DEVICE_BANK:
        return _bank_uniform(gen, bank_stds, k)
    return _uniform_int(gen, k)


def _read_crossbar(pos, neg, scale, offset, read_sd, active, gen) -> float:
    replicas = pos.shape[0]
    total = 0.0
    a = active.size
    if read_sd > 0.0 and a > 0:
        for r in range(replicas):
            sub_p = pos[r][np.ix_(active, active)].ravel()
            sub_n = neg[r][np.ix_(active, active)].ravel()
            sub_p = sub_p + read_sd * gen.standard_normal(a * a)
            sub_n = sub_n + read_sd * gen.standard_normal(a * a)
            contrib = np.concatenate([sub_p, -sub_n])
            total += float(np.add.accumulate(contrib)[-1])
        return (total / replicas) * scale + offset
    # Noise-free reads fold signed scaled cells row-major over the full
    # active block. Quantized targets are exactly zero below the diagonal,
    # where adding 0.0 never moves a partial sum, so this agrees bit for bit
    # with _read_exact; programmed arrays keep their clipped residue there.
    for r in range(replicas):
        sub = (pos[r][np.ix_(active, active)] - neg[r][np.ix_(active, active)]) * scale
        terms = sub.ravel()
        if terms.size:
            total += float(np.add.accumulate(terms)[-1])
    return total / replicas + offset


def _read_exact(upper, offset, active) -> float:
    sub = upper[np.ix_(active, active)]
    terms = sub[np.triu_indices(active.size)]
    if terms.size == 0:
        return float(offset)
    return float(np.add.accumulate(terms)[-1] + offset)


def read_energy(pos, neg, scale, offset, read_sd, bits, gen) -> float:
    """One gated noisy readout; gen may be None when read_sd == 0."""
    active = np.flatnonzero(bits)
    return _read_crossbar(pos, neg, scale, offset, read_sd, active, gen)


def _sample_plan(gen, n, bound, rng_mode, bank_stds):
    m = _draw_int(gen, bound + 1, rng_mode, bank_stds)
    indices: list[int] = []
    while len(indices) < m:
        idx = _draw_int(gen, n, rng_mode, bank_stds)
        if idx not in indices:
            indices.append(idx)
    return m, indices


def _accept(e_cur, e_cand, step, acceptance, t0, decay, gen) -> bool:
    if acceptance == ACCEPT_ALWAYS:
        return True
    if e_cand <= e_cur:
        return True
    if acceptance == ACCEPT_GREEDY:
        return False
    temp = t0 * decay**step
    if temp <= 0.0:
        return False
    return gen.random() < math.exp(-(e_cand - e_cur) / temp)


def _pack_state(state) -> int:
    word = 0
    for b in state:
        word = (word << 1) | int(b)
    return word


def run_trial_kernel(
    mode: int,
    upper: np.ndarray,
    pos: np.ndarray,
    neg: np.ndarray,
    scale: float,
    offset: float,
    read_sd: float,
    flip_bounds: np.ndarray,
    acceptance: int,
    t0: float,
    decay: float,
    adopt_probability: float,
    shared_plan: bool,
    rng_mode: int,
    bank_stds: np.ndarray,
    stall_window: int,
    target_energy: float,
    has_target: bool,
    gen: np.random.Generator,
    record_trace: bool,
    record_states: bool,
) -> dict:
    """Run one competitive search trial; mode 0 reads `upper` exactly, mode 1
    reads the programmed pos/neg replica arrays with noise."""
    n = upper.shape[0] if mode == 0 else pos.shape[1]
    max_iter = flip_bounds.shape[0]

    def read(state):
        active = np.flatnonzero(state)
        if mode == 0:
            return _read_exact(upper, offset, active)
        return _read_crossbar(pos, neg, scale, offset, read_sd, active, gen)

    q1 = (gen.random(n) < 0.5).astype(np.uint8)
    q2 = (gen.random(n) < 0.5).astype(np.uint8)
    e1 = read(q1)
    e2 = read(q2)
    if e1 <= e2:
        best, best_e = q1.copy(), e1
    else:
        best, best_e = q2.copy(), e2
    best_iter = 0

    rows = max_iter + 1
    trace_e1 = np.zeros(rows) if record_trace else None
    trace_e2 = np.zeros(rows) if record_trace else None
    trace_best = np.zeros(rows) if record_trace else None
    trace_f1 = np.zeros(rows, dtype=np.int64) if record_trace else None
    trace_f2 = np.zeros(rows, dtype=np.int64) if record_trace else None
    states1 = np.zeros(rows, dtype=np.uint64) if record_states else None
    states2 = np.zeros(rows, dtype=np.uint64) if record_states else None
    if record_trace:
        trace_e1[0], trace_e2[0], trace_best[0] = e1, e2, best_e
    if record_states:
        states1[0] = _pack_state(q1)
        states2[0] = _pack_state(q2)

    steps_run = 0
    stall = 0
    stopped = has_target and best_e <= target_energy
    for step in range(max_iter):
        if stopped:
            break
        bound = int(flip_bounds[step])
        m1, idx1 = _sample_plan(gen, n, bound, rng_mode, bank_stds)
        if shared_plan:
            m2, idx2 = m1, idx1
        else:
            m2, idx2 = _sample_plan(gen, n, bound, rng_mode, bank_stds)
        c1 = q1.copy()
        c1[idx1] ^= 1
        c2 = q2.copy()
        c2[idx2] ^= 1
        ec1 = read(c1)
        ec2 = read(c2)
        if _accept(e1, ec1, step, acceptance, t0, decay, gen):
            q1, e1 = c1, ec1
        if _accept(e2, ec2, step, acceptance, t0, decay, gen):
            q2, e2 = c2, ec2
        if adopt_probability > 0.0 and gen.random() < adopt_probability and e1 != e2:
            if e1 < e2:
                q2, e2 = q1.copy(), e1
            else:
                q1, e1 = q2.copy(), e2
        round_e = e1 if e1 <= e2 else e2
        round_q = q1 if e1 <= e2 else q2
        if round_e < best_e:
            best_e = round_e
            best = round_q.copy()
            best_iter = step + 1
            stall = 0
        else:
            stall += 1
        steps_run = step + 1
        if record_trace:
            trace_e1[steps_run], trace_e2[steps_run] = e1, e2
            trace_best[steps_run] = best_e
            trace_f1[steps_run], trace_f2[steps_run] = m1, m2
        if record_states:
            states1[steps_run] = _pack_state(q1)
            states2[steps_run] = _pack_state(q2)
        if has_target and best_e <= target_energy:
            break
        if stall_window > 0 and stall >= stall_window:
            break

    end = steps_run + 1
    return {
        "best_state": best,
        "best_energy": float(best_e),
        "iterations_run": steps_run,
        "iteration_of_best": best_iter,
        "e1": trace_e1[:end] if record_trace else None,
        "e2": trace_e2[:end] if record_trace else None,
        "best_trace": trace_best[:end] if record_trace else None,
        "flips1": trace_f1[:end] if record_trace else None,
        "flips2": trace_f2[:end] if record_trace else None,
        "states1": states1[:end] if record_states else None,
        "states2": states2[:end] if record_states else None,
    }
