# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled step loop for networks without plastic synapses.

Replicates the NumPy path in ``simulation.py`` exactly: same phase order,
same integer arithmetic, same splitmix64 draws, so both backends produce
bit-identical monitor output. The kernel runs whole chunks of steps and
fills preallocated monitor buffers; it returns early when a spike buffer
would overflow or an integer state leaves the checked range.
"""

from libc.stdint cimport int64_t, uint8_t, uint64_t

import numpy as np


cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX2 = 0x94D049BB133111EBULL
cdef double U01 = 1.0 / 9007199254740992.0  # 2**-53
cdef int64_t STATE_LIMIT = <int64_t>1 << 60
cdef int DECAY_SHIFT = 12
cdef int64_t DECAY_MASK = (<int64_t>1 << 12) - 1


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef inline int64_t _decay(int64_t x, int64_t delta) nogil:
    cdef int64_t mag = x if x >= 0 else -x
    cdef int64_t dec = (mag >> DECAY_SHIFT) * delta + \
        (((mag & DECAY_MASK) * delta + DECAY_MASK) >> DECAY_SHIFT)
    return x - dec if x >= 0 else x + dec


def run_chunk(
    long long t0,
    long long n_steps,
    int64_t[::1] I,
    int64_t[::1] v,
    int64_t[::1] refrac,
    uint8_t[::1] prev_spiked,
    int64_t[::1] delta_i,
    int64_t[::1] delta_v,
    int64_t[::1] vth,
    int64_t[::1] bias,
    int64_t[::1] refractory,
    int64_t[:, ::1] ring,
    long long cursor,
    int64_t[::1] ns_indptr,
    int64_t[::1] ns_tgt,
    int64_t[::1] ns_wt,
    int64_t[::1] ns_off,
    int64_t[::1] gs_indptr,
    int64_t[::1] gs_tgt,
    int64_t[::1] gs_wt,
    int64_t[::1] gs_off,
    double[::1] rates,
    uint64_t[::1] gen_states,
    int64_t[::1] event_steps,
    int64_t[::1] event_gens,
    long long event_cursor,
    int64_t[::1] imon_ids,
    int64_t[:, ::1] imon_out,
    int64_t[::1] vmon_ids,
    int64_t[:, ::1] vmon_out,
    uint8_t[::1] nspk_mask,
    uint8_t[::1] gspk_mask,
    int64_t[::1] spk_step,
    int64_t[::1] spk_unit,
    int64_t[::1] gspk_step,
    int64_t[::1] gspk_unit,
):
    cdef long long n_units = I.shape[0]
    cdef long long n_gens = rates.shape[0]
    cdef long long n_events = event_steps.shape[0]
    cdef long long ring_len = ring.shape[0]
    cdef long long spk_cap = spk_step.shape[0]
    cdef long long gspk_cap = gspk_step.shape[0]
    cdef long long n_imon = imon_ids.shape[0]
    cdef long long n_vmon = vmon_ids.shape[0]

    cdef long long spk_count = 0
    cdef long long gspk_count = 0
    cdef long long done = 0
    cdef long long err_unit = -1

    cdef long long t, step_index, g, u, e, k, slot
    cdef long long spk_mark, gspk_mark
    cdef uint64_t state, z
    cdef double uniform
    cdef int64_t value
    cdef bint spike

    for step_index in range(n_steps):
        if spk_count + n_units > spk_cap or gspk_count + n_gens > gspk_cap:
            break
        t = t0 + step_index
        spk_mark = spk_count
        gspk_mark = gspk_count

        # --- start: generator draws, explicit events, gen deliveries
        for g in range(n_gens):
            state = gen_states[g] + GOLDEN
            gen_states[g] = state
            spike = False
            if rates[g] >= 0.0:
                z = _mix64(state)
                uniform = <double>(z >> 11) * U01
                spike = uniform < rates[g]
            if spike:
                if gspk_mask[g]:
                    gspk_step[gspk_count] = t
                    gspk_unit[gspk_count] = g
                    gspk_count += 1
                for e in range(gs_indptr[g], gs_indptr[g + 1]):
                    slot = (cursor + gs_off[e]) % ring_len
                    ring[slot, gs_tgt[e]] += gs_wt[e]
        while event_cursor < n_events and event_steps[event_cursor] == t:
            g = event_gens[event_cursor]
            event_cursor += 1
            if gspk_mask[g]:
                gspk_step[gspk_count] = t
                gspk_unit[gspk_count] = g
                gspk_count += 1
            for e in range(gs_indptr[g], gs_indptr[g + 1]):
                slot = (cursor + gs_off[e]) % ring_len
                ring[slot, gs_tgt[e]] += gs_wt[e]

        # --- synapses: accumulate this step's deliveries into I
        for u in range(n_units):
            value = I[u] + ring[cursor, u]
            if value > STATE_LIMIT or value < -STATE_LIMIT:
                err_unit = u
                break
            I[u] = value
        if err_unit >= 0:
            spk_count = spk_mark
            gspk_count = gspk_mark
            break
        for k in range(n_imon):
            imon_out[step_index, k] = I[imon_ids[k]]

        # --- groups / thresholds / resets
        for u in range(n_units):
            if refrac[u] > 0:
                refrac[u] -= 1
                prev_spiked[u] = 0
                I[u] = _decay(I[u], delta_i[u])
                continue
            value = _decay(v[u], delta_v[u]) + I[u] + bias[u]
            if value > STATE_LIMIT or value < -STATE_LIMIT:
                err_unit = u
                break
            I[u] = _decay(I[u], delta_i[u])
            if value > vth[u]:
                v[u] = 0
                refrac[u] = refractory[u]
                prev_spiked[u] = 1
                if nspk_mask[u]:
                    spk_step[spk_count] = t
                    spk_unit[spk_count] = u
                    spk_count += 1
                for e in range(ns_indptr[u], ns_indptr[u + 1]):
                    slot = (cursor + ns_off[e]) % ring_len
                    ring[slot, ns_tgt[e]] += ns_wt[e]
            else:
                v[u] = value
                prev_spiked[u] = 0
        if err_unit >= 0:
            spk_count = spk_mark
            gspk_count = gspk_mark
            break

        # --- end: late probes, recycle the consumed slot
        for k in range(n_vmon):
            vmon_out[step_index, k] = v[vmon_ids[k]]
        for u in range(n_units):
            ring[cursor, u] = 0
        cursor = (cursor + 1) % ring_len
        done += 1

    return done, int(cursor), int(event_cursor), int(spk_count), int(gspk_count), int(err_unit)
