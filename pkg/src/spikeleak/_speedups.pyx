# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory kernels.

Line-for-line mirror of ``_fallback``: identical draw order, identical
left-to-right summations, the same fast/slow branch on
max_potential * log(base) <= 700, and the same shared exp table, so a
trajectory is bit-identical across the two backends.  Raw uniforms come
straight from the numpy BitGenerator's next_double slot.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport NAN, exp, isnan, log, log1p
from numpy.random cimport bitgen_t

cnp.import_array()

ctypedef cnp.int64_t i64

cdef enum:
    TABLE_SIZE = 1024
    ABSORBED = 0
    HORIZON = 1
    BUDGET = 2
    TARGET = 3
    DECIDED = 4
    JOINT_SPIKE = 0
    SOLO_SPIKE = 1
    PAIR_LEAK = 2


cdef bitgen_t *_bitgen(object rng) except NULL:
    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("rng does not expose a BitGenerator capsule")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _next(bitgen_t *bg) noexcept:
    return bg.next_double(bg.state)


cdef inline int _ceil_sqrt_c(int n) noexcept:
    cdef int r = <int> (n ** 0.5)
    while (r + 1) * (r + 1) <= n:
        r += 1
    while r * r > n:
        r -= 1
    return r if r * r == n else r + 1


cdef inline int _isqrt_c(int n) noexcept:
    cdef int r = <int> (n ** 0.5)
    while (r + 1) * (r + 1) <= n:
        r += 1
    while r * r > n:
        r -= 1
    return r


cdef int _flags_c(i64[::1] sv, int n, int root, int croot) noexcept:
    cdef int zeros = 0, distinct_pos = 0, mask = 0
    cdef int j
    cdef i64 prev = 0
    cdef bint ok, distinct, block, is_ladder
    for j in range(n):
        if sv[j] != 0:
            break
        zeros += 1
    if n - zeros >= root:
        mask |= 1
    if zeros <= root:
        mask |= 2
    for j in range(n):
        if sv[j] > 0 and sv[j] != prev:
            distinct_pos += 1
            prev = sv[j]
    if distinct_pos >= croot:
        mask |= 4
    ok = True
    for j in range(n):
        if sv[j] < j:
            ok = False
            break
    if ok:
        mask |= 8
    distinct = True
    for j in range(n - 1):
        if sv[j] == sv[j + 1]:
            distinct = False
            break
    if distinct:
        block = True
        for j in range(n - root + 1):
            if sv[j] != j:
                block = False
                break
        if block:
            mask |= 16
            is_ladder = True
            for j in range(n - root + 1, n):
                if sv[j] != j:
                    is_ladder = False
                    break
            if is_ladder:
                mask |= 32
    return mask


cdef void _sorted_spike_c(i64[::1] sv, i64[::1] scratch, i64 spiked_value, int n) noexcept:
    cdef int j, out_idx = 1
    cdef bint skipped = False
    for j in range(n):
        scratch[j] = sv[j]
    for j in range(n):
        if not skipped and scratch[j] == spiked_value:
            skipped = True
            continue
        sv[out_idx] = scratch[j] + 1
        out_idx += 1
    sv[0] = 0


cdef void _sorted_leak_c(i64[::1] sv, i64 old, i64 new) noexcept:
    cdef int pos = 0
    while sv[pos] != old:
        pos += 1
    while pos > 0 and sv[pos - 1] > new:
        sv[pos] = sv[pos - 1]
        pos -= 1
    sv[pos] = new


def run_trajectory(
    u0,
    int leak_kind,
    double log_base,
    bint aux,
    double horizon,
    long long budget,
    int target_id,
    int record_mask,
    bint track_w_time,
    bint log_events,
    const double[::1] table,
    object rng,
):
    """Compiled single-trajectory kernel; contract as in _fallback."""
    cdef i64[::1] u = np.array(u0, dtype=np.int64)
    cdef int n = u.shape[0]
    cdef int root = _isqrt_c(n)
    cdef int croot = _ceil_sqrt_c(n)
    cdef bitgen_t *bg = _bitgen(rng)

    cdef double t = 0.0
    cdef long long jumps = 0, z_spike = 0, z_leak = 0
    cdef double w_time = 0.0
    cdef double[6] hits
    cdef int s
    for s in range(6):
        hits[s] = NAN
    events = [] if log_events else None

    cdef int positives = 0
    cdef int i
    for i in range(n):
        if u[i] > 0:
            positives += 1
    cdef bint track_sets = record_mask != 0 or target_id >= 0 or track_w_time
    cdef i64[::1] sv = np.sort(np.asarray(u)) if track_sets else None
    cdef i64[::1] scratch = np.empty(n, dtype=np.int64) if track_sets else None
    cdef double[::1] w = np.zeros(n, dtype=np.float64)
    cdef int pending = record_mask
    cdef bint in_w = False
    cdef int mask

    if track_sets:
        mask = _flags_c(sv, n, root, croot)
        in_w = (mask & 16) != 0
        for s in range(6):
            if pending & (1 << s) and mask & (1 << s):
                hits[s] = 0.0
                pending &= ~(1 << s)
        if target_id >= 0 and mask & (1 << target_id):
            return _result(TARGET, t, jumps, z_spike, z_leak, NAN, hits, u, w_time, events)

    if positives == 0:
        return _result(ABSORBED, t, jumps, z_spike, z_leak, t, hits, u, w_time, events)

    cdef i64 m, old
    cdef int only_pos, leak_eff, chosen, seen, kind
    cdef long long k
    cdef bint is_leak
    cdef double s_sum, wi, mlb, total, inv, dt, u1, u2, u3, r, c
    cdef i64 d

    with rng.bit_generator.lock:
        while True:
            if jumps >= budget:
                return _result(BUDGET, t, jumps, z_spike, z_leak, NAN, hits, u, w_time, events)

            # pass 1: max potential, positive count, last positive neuron
            m = 0
            only_pos = -1
            for i in range(n):
                if u[i] > m:
                    m = u[i]
                if u[i] > 0:
                    only_pos = i
            # effective leak rate, minus the transition into the trap in aux mode
            if positives > 1:
                leak_eff = positives
            elif aux:
                if leak_kind == 0:
                    leak_eff = 0
                else:
                    leak_eff = 1 if u[only_pos] > 1 else 0
            else:
                leak_eff = 1

            # pass 2: shifted spike weights, left-to-right sum
            s_sum = 0.0
            for i in range(n):
                if u[i] > 0:
                    d = m - u[i]
                    wi = table[d] if d < TABLE_SIZE else exp(<double> (u[i] - m) * log_base)
                    w[i] = wi
                    s_sum += wi
                else:
                    w[i] = 0.0

            mlb = <double> m * log_base
            u1 = _next(bg)
            if mlb <= 700.0:
                total = exp(mlb) * s_sum + leak_eff
                dt = -log1p(-u1) / total
            else:
                inv = exp(-(mlb + log(s_sum)))
                dt = -log1p(-u1) * inv

            if t + dt > horizon:
                if track_w_time and in_w:
                    w_time += horizon - t
                return _result(HORIZON, horizon, jumps, z_spike, z_leak, NAN, hits, u, w_time, events)
            if track_w_time and in_w:
                w_time += dt
            t = t + dt

            u2 = _next(bg)
            if mlb <= 700.0:
                is_leak = u2 * total < leak_eff
            else:
                is_leak = u2 < leak_eff * inv

            u3 = _next(bg)
            if is_leak:
                k = <long long> (u3 * leak_eff)
                if k >= leak_eff:
                    k = leak_eff - 1
                # the (k+1)-th positive neuron in index order
                chosen = -1
                seen = 0
                for i in range(n):
                    if u[i] > 0:
                        if seen == k:
                            chosen = i
                            break
                        seen += 1
                old = u[chosen]
                if leak_kind == 0:
                    u[chosen] = 0
                    positives -= 1
                else:
                    u[chosen] = old - 1
                    if u[chosen] == 0:
                        positives -= 1
                z_leak += 1
                if track_sets:
                    _sorted_leak_c(sv, old, u[chosen])
                kind = 1
            else:
                r = u3 * s_sum
                c = 0.0
                chosen = -1
                for i in range(n):
                    if w[i] > 0.0:
                        chosen = i
                        c += w[i]
                        if r < c:
                            break
                old = u[chosen]
                for i in range(n):
                    u[i] += 1
                u[chosen] = 0
                positives = n - 1
                z_spike += 1
                if track_sets:
                    _sorted_spike_c(sv, scratch, old, n)
                kind = 0

            jumps += 1
            if log_events:
                events.append((jumps, t, chosen + 1, kind))

            if positives == 0:
                return _result(ABSORBED, t, jumps, z_spike, z_leak, t, hits, u, w_time, events)

            if track_sets:
                mask = _flags_c(sv, n, root, croot)
                in_w = (mask & 16) != 0
                if pending:
                    for s in range(6):
                        if pending & (1 << s) and mask & (1 << s):
                            hits[s] = t
                            pending &= ~(1 << s)
                if target_id >= 0 and mask & (1 << target_id):
                    return _result(TARGET, t, jumps, z_spike, z_leak, NAN, hits, u, w_time, events)


cdef dict _result(int reason, double t, long long jumps, long long z_spike,
                  long long z_leak, double tau, double *hits, i64[::1] u,
                  double w_time, object events):
    return {
        "stop_reason": reason,
        "time": t,
        "jumps": jumps,
        "z_spike": z_spike,
        "z_leak": z_leak,
        "tau": tau,
        "hits": [hits[s] for s in range(6)],
        "final": [u[i] for i in range(u.shape[0])],
        "w_time": w_time,
        "events": events,
    }


cdef void _argsort_stable(i64[::1] x, i64[::1] order, int n) noexcept:
    cdef int i, j
    cdef i64 key
    for i in range(n):
        key = i
        j = i
        while j > 0 and x[order[j - 1]] > x[key]:
            order[j] = order[j - 1]
            j -= 1
        order[j] = key


cdef void _apply_spike_c(i64[::1] x, int i, int n, i64[::1] sx, i64[::1] scratch) noexcept:
    cdef i64 old = x[i]
    cdef int j
    for j in range(n):
        x[j] += 1
    x[i] = 0
    _sorted_spike_c(sx, scratch, old, n)


cdef inline bint _is_ladder(i64[::1] s, int n) noexcept:
    cdef int j
    for j in range(n):
        if s[j] != j:
            return False
    return True


def run_coupled(
    u0,
    v0,
    int leak_kind,
    double log_base,
    bint literal_solo,
    double horizon,
    long long budget,
    bint stop_when_decided,
    bint stop_on_ladder,
    const double[::1] table,
    object rng,
):
    """Compiled rank-matched pair kernel; contract as in _fallback."""
    cdef i64[::1] u = np.array(u0, dtype=np.int64)
    cdef i64[::1] v = np.array(v0, dtype=np.int64)
    cdef int n = u.shape[0]
    cdef int croot = _ceil_sqrt_c(n)
    cdef int window = 2 * croot
    cdef bitgen_t *bg = _bitgen(rng)

    cdef i64[::1] su = np.sort(np.asarray(u))
    cdef i64[::1] sv = np.sort(np.asarray(v))
    cdef i64[::1] scratch = np.empty(n, dtype=np.int64)
    cdef i64[::1] ou = np.empty(n, dtype=np.int64)
    cdef i64[::1] ov = np.empty(n, dtype=np.int64)
    cdef double[::1] weights = np.zeros(3 * n, dtype=np.float64)

    cdef double t = 0.0
    cdef long long jumps = 0
    cdef long long n_c = -1, n_dagger = -1
    cdef double t_nc = NAN
    cdef int e1 = -1
    cdef bint violation = False
    cdef double u_ladder_t = NAN, v_ladder_t = NAN

    cdef int j, idx, rank, kind, iu, iv
    cdef i64 a, b, lo, hi, m, d, old
    cdef double s_sum, wj, ws, wl, mlb, total, inv, dt, u1, u2, r, c
    cdef bint coalesced

    coalesced = True
    for j in range(n):
        if su[j] != sv[j]:
            coalesced = False
            break
    if coalesced:
        n_c = 0
        t_nc = 0.0
    if _is_ladder(su, n):
        u_ladder_t = 0.0
    if _is_ladder(sv, n):
        v_ladder_t = 0.0
    if stop_on_ladder and u_ladder_t == 0.0:
        return _coupled_result(TARGET, t, jumps, n_c, t_nc, n_dagger, e1, violation,
                               u_ladder_t, v_ladder_t, u, v)

    with rng.bit_generator.lock:
        while True:
            if jumps >= budget:
                return _coupled_result(BUDGET, t, jumps, n_c, t_nc, n_dagger, e1, violation,
                                       u_ladder_t, v_ladder_t, u, v)

            _argsort_stable(u, ou, n)
            _argsort_stable(v, ov, n)
            m = 0
            for j in range(n):
                if u[j] > m:
                    m = u[j]
                if v[j] > m:
                    m = v[j]
            if m == 0:
                return _coupled_result(ABSORBED, t, jumps, n_c, t_nc, n_dagger, e1, violation,
                                       u_ladder_t, v_ladder_t, u, v)

            s_sum = 0.0
            for j in range(n):
                a = u[ou[j]]
                b = v[ov[j]]
                if a <= b:
                    lo = a
                    hi = b
                else:
                    lo = b
                    hi = a
                if lo > 0:
                    d = m - lo
                    wj = table[d] if d < TABLE_SIZE else exp(<double> (lo - m) * log_base)
                else:
                    wj = 0.0
                weights[3 * j] = wj
                if a != b:
                    if literal_solo:
                        d = m - (hi - lo)
                        ws = table[d] if d < TABLE_SIZE else exp(<double> ((hi - lo) - m) * log_base)
                    else:
                        d = m - hi
                        ws = table[d] if d < TABLE_SIZE else exp(<double> (hi - m) * log_base)
                        ws -= wj
                else:
                    ws = 0.0
                weights[3 * j + 1] = ws
                if hi > 0:
                    d = m
                    wl = table[d] if d < TABLE_SIZE else exp(<double> (-m) * log_base)
                else:
                    wl = 0.0
                weights[3 * j + 2] = wl
                s_sum += wj + ws + wl

            mlb = <double> m * log_base
            u1 = _next(bg)
            if mlb <= 700.0:
                total = exp(mlb) * s_sum
                dt = -log1p(-u1) / total
            else:
                inv = exp(-(mlb + log(s_sum)))
                dt = -log1p(-u1) * inv

            if t + dt > horizon:
                return _coupled_result(HORIZON, horizon, jumps, n_c, t_nc, n_dagger, e1, violation,
                                       u_ladder_t, v_ladder_t, u, v)
            t = t + dt

            u2 = _next(bg)
            r = u2 * s_sum
            c = 0.0
            idx = -1
            for j in range(3 * n):
                if weights[j] > 0.0:
                    idx = j
                    c += weights[j]
                    if r < c:
                        break
            rank = idx // 3
            kind = idx - 3 * rank
            iu = <int> ou[rank]
            iv = <int> ov[rank]

            if kind == JOINT_SPIKE:
                _apply_spike_c(u, iu, n, su, scratch)
                _apply_spike_c(v, iv, n, sv, scratch)
            elif kind == SOLO_SPIKE:
                if u[iu] > v[iv]:
                    _apply_spike_c(u, iu, n, su, scratch)
                else:
                    _apply_spike_c(v, iv, n, sv, scratch)
            else:
                if u[iu] > 0:
                    old = u[iu]
                    u[iu] = 0 if leak_kind == 0 else old - 1
                    _sorted_leak_c(su, old, u[iu])
                if v[iv] > 0:
                    old = v[iv]
                    v[iv] = 0 if leak_kind == 0 else old - 1
                    _sorted_leak_c(sv, old, v[iv])

            jumps += 1
            if kind == PAIR_LEAK and n_dagger < 0:
                n_dagger = jumps

            if n_c < 0:
                coalesced = True
                for j in range(n):
                    if su[j] != sv[j]:
                        coalesced = False
                        break
                if coalesced:
                    n_c = jumps
                    t_nc = t
            if isnan(u_ladder_t) and _is_ladder(su, n):
                u_ladder_t = t
            if isnan(v_ladder_t) and _is_ladder(sv, n):
                v_ladder_t = t

            if e1 == -1:
                if kind == PAIR_LEAK or rank != n - 1:
                    e1 = 0
                elif jumps == window:
                    e1 = 1
                    # coalescence-by-window bound; guaranteed for W starts
                    if not (0 <= n_c <= window):
                        violation = True

            if stop_on_ladder and not isnan(u_ladder_t):
                return _coupled_result(TARGET, t, jumps, n_c, t_nc, n_dagger, e1, violation,
                                       u_ladder_t, v_ladder_t, u, v)
            if stop_when_decided and e1 != -1 and (n_c >= 0 or n_dagger >= 0 or violation):
                return _coupled_result(DECIDED, t, jumps, n_c, t_nc, n_dagger, e1, violation,
                                       u_ladder_t, v_ladder_t, u, v)


cdef dict _coupled_result(int reason, double t, long long jumps, long long n_c,
                          double t_nc, long long n_dagger, int e1, bint violation,
                          double u_ladder_t, double v_ladder_t, i64[::1] u, i64[::1] v):
    return {
        "stop_reason": reason,
        "time": t,
        "jumps": jumps,
        "n_c": n_c,
        "t_nc": t_nc,
        "n_dagger": n_dagger,
        "e1": e1,
        "violation": violation,
        "u_ladder_time": u_ladder_t,
        "v_ladder_time": v_ladder_t,
        "final_u": [u[i] for i in range(u.shape[0])],
        "final_v": [v[i] for i in range(v.shape[0])],
    }
