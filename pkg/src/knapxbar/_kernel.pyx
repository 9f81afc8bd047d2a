"""Compiled search kernel; see _kernel_py for the frozen draw protocol.

Consumes the caller's PCG64 stream through numpy's C entry points so results
are byte-identical to the pure-Python kernel on the same seed.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport exp, pow
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (random_standard_normal,
                                           random_standard_uniform)

cnp.import_array()

# Codes shared with _kernel_py; literals reappear in nogil helpers below
# because Python-level globals are not visible there.
ACCEPT_GREEDY = 0
ACCEPT_ALWAYS = 1
ACCEPT_METROPOLIS = 2

RNG_SOFTWARE = 0
RNG_DEVICE_BANK = 1

cdef const char *CAPSULE_NAME = "BitGenerator"


cdef bitgen_t *_bitgen_from(object gen) except NULL:
    capsule = gen.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, CAPSULE_NAME):
        raise ValueError("invalid BitGenerator capsule")
    return <bitgen_t *>PyCapsule_GetPointer(capsule, CAPSULE_NAME)


cdef inline long _uniform_int(bitgen_t *rng, long k) noexcept nogil:
    cdef double u = random_standard_uniform(rng)
    cdef long v = <long>(u * k)
    if v >= k:
        v = k - 1
    return v


cdef inline long _bank_uniform(bitgen_t *rng, const double[::1] bank_stds,
                               long count) noexcept nogil:
    cdef long d = bank_stds.shape[0]
    cdef long space = (<long>1) << d
    cdef long limit = space - (space % count)
    cdef long pattern = 0
    cdef long attempt, k
    for attempt in range(64):
        pattern = 0
        for k in range(d):
            if bank_stds[k] * random_standard_normal(rng) > 0.0:
                pattern = (pattern << 1) | 1
            else:
                pattern = pattern << 1
        if pattern < limit:
            return pattern % count
    return pattern % count


cdef inline long _draw_int(bitgen_t *rng, long k, int rng_mode,
                           const double[::1] bank_stds) noexcept nogil:
    if rng_mode == 1:  # device bank
        return _bank_uniform(rng, bank_stds, k)
    return _uniform_int(rng, k)


cdef inline double _read_crossbar_c(const double[:, :, ::1] pos,
                                    const double[:, :, ::1] neg,
                                    double scale, double offset, double read_sd,
                                    const long[::1] active, long na,
                                    bitgen_t *rng) noexcept nogil:
    cdef double total = 0.0
    cdef double acc
    cdef long r, ii, jj, i
    cdef long replicas = pos.shape[0]
    for r in range(replicas):
        acc = 0.0
        if read_sd > 0.0:
            for ii in range(na):
                i = active[ii]
                for jj in range(na):
                    acc = acc + (pos[r, i, active[jj]]
                                 + read_sd * random_standard_normal(rng))
            for ii in range(na):
                i = active[ii]
                for jj in range(na):
                    acc = acc - (neg[r, i, active[jj]]
                                 + read_sd * random_standard_normal(rng))
        else:
            # Noise-free reads fold signed scaled cells row-major over the
            # full active block; exact-zero cells below the diagonal of the
            # quantized targets cannot move a partial sum, so this agrees
            # bit for bit with _read_exact_c on them.
            for ii in range(na):
                i = active[ii]
                for jj in range(na):
                    acc = acc + (pos[r, i, active[jj]]
                                 - neg[r, i, active[jj]]) * scale
        total = total + acc
    if read_sd > 0.0:
        return (total / replicas) * scale + offset
    return total / replicas + offset


cdef inline double _read_exact_c(const double[:, ::1] upper, double offset,
                                 const long[::1] active, long na) noexcept nogil:
    cdef double acc = 0.0
    cdef long ii, jj
    for ii in range(na):
        for jj in range(ii, na):
            acc = acc + upper[active[ii], active[jj]]
    return acc + offset


cdef inline long _collect_active(const cnp.uint8_t[::1] state,
                                 long[::1] active) noexcept nogil:
    cdef long n = state.shape[0]
    cdef long i, na = 0
    for i in range(n):
        if state[i]:
            active[na] = i
            na += 1
    return na


def read_energy(pos, neg, scale, offset, read_sd, bits, gen):
    """One gated noisy readout; gen may be None when read_sd == 0."""
    state = np.ascontiguousarray(bits, dtype=np.uint8)
    active = np.flatnonzero(state).astype(np.int_)
    cdef double sd = read_sd
    cdef bitgen_t *rng = NULL
    if sd > 0.0:
        rng = _bitgen_from(gen)
    cdef const double[:, :, ::1] pos_v = pos
    cdef const double[:, :, ::1] neg_v = neg
    cdef const long[::1] active_v = active
    cdef double result
    if sd > 0.0:
        with gen.bit_generator.lock:
            result = _read_crossbar_c(pos_v, neg_v, scale, offset, sd,
                                      active_v, active.shape[0], rng)
    else:
        result = _read_crossbar_c(pos_v, neg_v, scale, offset, sd,
                                  active_v, active.shape[0], NULL)
    return result


cdef inline double _read_state(int mode, const double[:, ::1] upper,
                               const double[:, :, ::1] pos,
                               const double[:, :, ::1] neg,
                               double scale, double offset, double read_sd,
                               const cnp.uint8_t[::1] state, long[::1] active,
                               bitgen_t *rng) noexcept nogil:
    cdef long na = _collect_active(state, active)
    if mode == 0:
        return _read_exact_c(upper, offset, active, na)
    return _read_crossbar_c(pos, neg, scale, offset, read_sd, active, na, rng)


cdef inline bint _accept_c(double e_cur, double e_cand, long step,
                           int acceptance, double t0, double decay,
                           bitgen_t *rng) noexcept nogil:
    cdef double temp
    if acceptance == 1:  # always
        return True
    if e_cand <= e_cur:
        return True
    if acceptance == 0:  # greedy
        return False
    temp = t0 * pow(decay, <double>step)
    if temp <= 0.0:
        return False
    return random_standard_uniform(rng) < exp(-(e_cand - e_cur) / temp)


cdef inline long _sample_plan_c(bitgen_t *rng, long n, long bound,
                                int rng_mode, const double[::1] bank_stds,
                                long[::1] indices) noexcept nogil:
    cdef long m = _draw_int(rng, bound + 1, rng_mode, bank_stds)
    cdef long have = 0
    cdef long idx, k
    cdef bint dup
    while have < m:
        idx = _draw_int(rng, n, rng_mode, bank_stds)
        dup = False
        for k in range(have):
            if indices[k] == idx:
                dup = True
                break
        if not dup:
            indices[have] = idx
            have += 1
    return m


cdef inline cnp.uint64_t _pack_state_c(const cnp.uint8_t[::1] state) noexcept nogil:
    cdef cnp.uint64_t word = 0
    cdef long i
    for i in range(state.shape[0]):
        word = (word << 1) | state[i]
    return word


def run_trial_kernel(int mode, upper, pos, neg, double scale, double offset,
                     double read_sd, flip_bounds, int acceptance, double t0,
                     double decay, double adopt_probability, bint shared_plan,
                     int rng_mode, bank_stds, long stall_window,
                     double target_energy, bint has_target, gen,
                     bint record_trace, bint record_states):
    """Run one competitive search trial; mode 0 reads `upper` exactly, mode 1
    reads the programmed pos/neg replica arrays with noise."""
    cdef const double[:, ::1] upper_v = np.ascontiguousarray(upper, dtype=np.float64)
    cdef const double[:, :, ::1] pos_v = np.ascontiguousarray(pos, dtype=np.float64)
    cdef const double[:, :, ::1] neg_v = np.ascontiguousarray(neg, dtype=np.float64)
    cdef const long[::1] bounds_v = np.ascontiguousarray(flip_bounds, dtype=np.int_)
    cdef const double[::1] stds_v = np.ascontiguousarray(bank_stds, dtype=np.float64)
    cdef long n = upper_v.shape[0] if mode == 0 else pos_v.shape[1]
    cdef long max_iter = bounds_v.shape[0]
    cdef bitgen_t *rng = _bitgen_from(gen)

    q1_arr = np.zeros(n, dtype=np.uint8)
    q2_arr = np.zeros(n, dtype=np.uint8)
    c1_arr = np.zeros(n, dtype=np.uint8)
    c2_arr = np.zeros(n, dtype=np.uint8)
    best_arr = np.zeros(n, dtype=np.uint8)
    active_arr = np.zeros(n, dtype=np.int_)
    idx1_arr = np.zeros(max(n, 1), dtype=np.int_)
    idx2_arr = np.zeros(max(n, 1), dtype=np.int_)
    cdef cnp.uint8_t[::1] q1 = q1_arr
    cdef cnp.uint8_t[::1] q2 = q2_arr
    cdef cnp.uint8_t[::1] c1 = c1_arr
    cdef cnp.uint8_t[::1] c2 = c2_arr
    cdef cnp.uint8_t[::1] best = best_arr
    cdef long[::1] active = active_arr
    cdef long[::1] idx1 = idx1_arr
    cdef long[::1] idx2 = idx2_arr

    cdef long rows = max_iter + 1
    trace_e1 = np.zeros(rows) if record_trace else None
    trace_e2 = np.zeros(rows) if record_trace else None
    trace_best = np.zeros(rows) if record_trace else None
    trace_f1 = np.zeros(rows, dtype=np.int64) if record_trace else None
    trace_f2 = np.zeros(rows, dtype=np.int64) if record_trace else None
    states1 = np.zeros(rows, dtype=np.uint64) if record_states else None
    states2 = np.zeros(rows, dtype=np.uint64) if record_states else None
    cdef double[::1] te1 = trace_e1 if record_trace else None
    cdef double[::1] te2 = trace_e2 if record_trace else None
    cdef double[::1] tbest = trace_best if record_trace else None
    cdef cnp.int64_t[::1] tf1 = trace_f1 if record_trace else None
    cdef cnp.int64_t[::1] tf2 = trace_f2 if record_trace else None
    cdef cnp.uint64_t[::1] ts1 = states1 if record_states else None
    cdef cnp.uint64_t[::1] ts2 = states2 if record_states else None

    cdef double e1, e2, ec1, ec2, best_e, round_e, u
    cdef long i, step, m1, m2, best_iter, steps_run, stall, bound
    cdef bint stopped, one_leads

    with gen.bit_generator.lock, nogil:
        for i in range(n):
            q1[i] = 1 if random_standard_uniform(rng) < 0.5 else 0
        for i in range(n):
            q2[i] = 1 if random_standard_uniform(rng) < 0.5 else 0
        e1 = _read_state(mode, upper_v, pos_v, neg_v, scale, offset, read_sd,
                         q1, active, rng)
        e2 = _read_state(mode, upper_v, pos_v, neg_v, scale, offset, read_sd,
                         q2, active, rng)
        if e1 <= e2:
            best_e = e1
            for i in range(n):
                best[i] = q1[i]
        else:
            best_e = e2
            for i in range(n):
                best[i] = q2[i]
        best_iter = 0
        if record_trace:
            te1[0] = e1
            te2[0] = e2
            tbest[0] = best_e
        if record_states:
            ts1[0] = _pack_state_c(q1)
            ts2[0] = _pack_state_c(q2)

        steps_run = 0
        stall = 0
        stopped = has_target and best_e <= target_energy
        for step in range(max_iter):
            if stopped:
                break
            bound = bounds_v[step]
            m1 = _sample_plan_c(rng, n, bound, rng_mode, stds_v, idx1)
            if shared_plan:
                m2 = m1
                for i in range(m1):
                    idx2[i] = idx1[i]
            else:
                m2 = _sample_plan_c(rng, n, bound, rng_mode, stds_v, idx2)
            for i in range(n):
                c1[i] = q1[i]
                c2[i] = q2[i]
            for i in range(m1):
                c1[idx1[i]] ^= 1
            for i in range(m2):
                c2[idx2[i]] ^= 1
            ec1 = _read_state(mode, upper_v, pos_v, neg_v, scale, offset,
                              read_sd, c1, active, rng)
            ec2 = _read_state(mode, upper_v, pos_v, neg_v, scale, offset,
                              read_sd, c2, active, rng)
            if _accept_c(e1, ec1, step, acceptance, t0, decay, rng):
                e1 = ec1
                for i in range(n):
                    q1[i] = c1[i]
            if _accept_c(e2, ec2, step, acceptance, t0, decay, rng):
                e2 = ec2
                for i in range(n):
                    q2[i] = c2[i]
            if adopt_probability > 0.0:
                u = random_standard_uniform(rng)
                if u < adopt_probability and e1 != e2:
                    if e1 < e2:
                        e2 = e1
                        for i in range(n):
                            q2[i] = q1[i]
                    else:
                        e1 = e2
                        for i in range(n):
                            q1[i] = q2[i]
            one_leads = e1 <= e2
            round_e = e1 if one_leads else e2
            if round_e < best_e:
                best_e = round_e
                if one_leads:
                    for i in range(n):
                        best[i] = q1[i]
                else:
                    for i in range(n):
                        best[i] = q2[i]
                best_iter = step + 1
                stall = 0
            else:
                stall += 1
            steps_run = step + 1
            if record_trace:
                te1[steps_run] = e1
                te2[steps_run] = e2
                tbest[steps_run] = best_e
                tf1[steps_run] = m1
                tf2[steps_run] = m2
            if record_states:
                ts1[steps_run] = _pack_state_c(q1)
                ts2[steps_run] = _pack_state_c(q2)
            if has_target and best_e <= target_energy:
                break
            if stall_window > 0 and stall >= stall_window:
                break

    end = steps_run + 1
    return {
        "best_state": best_arr,
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
