"""Pure-Python trajectory kernels, the reference implementation.

The compiled kernel in ``_speedups`` mirrors this module operation for
operation: same draw order (one uniform for the holding time, then two
more per executed jump), same left-to-right summation, same fast/slow
branch on ``max_potential * log(base) <= 700``, and the same libm
calls.  Both consume raw doubles from the same numpy BitGenerator, so
trajectories are bit-identical across backends.

Set membership is tracked on an incrementally maintained sorted copy
of the potentials; all flag logic is integer-only, so it cannot drift
between backends.
"""

from __future__ import annotations

import math
from math import isqrt

# stop reasons shared with the compiled kernel
ABSORBED, HORIZON, BUDGET, TARGET = 0, 1, 2, 3

# set ids in hit-time arrays and masks
SET_IDS = {"S0": 0, "S1": 1, "S2": 2, "S3": 3, "W": 4, "L": 5}

TABLE_SIZE = 1024


def exp_table(log_base: float) -> list[float]:
    """exp(-d * log_base) for d = 0 .. TABLE_SIZE-1.

    Built once in Python and shared with the compiled kernel so both
    backends read identical doubles.
    """
    return [math.exp((-d) * log_base) for d in range(TABLE_SIZE)]


def _ceil_sqrt(n: int) -> int:
    r = isqrt(n)
    return r if r * r == n else r + 1


def _flags(sv: list[int], n: int, root: int, croot: int) -> int:
    """Bitmask of set memberships from sorted potentials."""
    zeros = 0
    for v in sv:
        if v != 0:
            break
        zeros += 1
    positives = n - zeros
    mask = 0
    if positives >= root:
        mask |= 1  # S0
    if zeros <= root:
        mask |= 2  # S1
    distinct_pos = 0
    prev = 0
    for v in sv:
        if v > 0 and v != prev:
            distinct_pos += 1
            prev = v
    if distinct_pos >= croot:
        mask |= 4  # S2
    ok = True
    for j, v in enumerate(sv):
        if v < j:
            ok = False
            break
    if ok:
        mask |= 8  # S3
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
            mask |= 16  # W
            is_ladder = True
            for j in range(n - root + 1, n):
                if sv[j] != j:
                    is_ladder = False
                    break
            if is_ladder:
                mask |= 32  # L
    return mask


def run_trajectory(
    u0,
    leak_kind: int,
    log_base: float,
    aux: bool,
    horizon: float,
    budget: int,
    target_id: int,
    record_mask: int,
    track_w_time: bool,
    log_events: bool,
    table,
    rng,
):
    """Simulate one trajectory; see engine.simulate for the public face.

    Parameters mirror the compiled kernel: ``u0`` iterable of ints,
    ``leak_kind`` 0 (reset) or 1 (decrement), ``target_id`` -1 or a
    SET_IDS value, ``record_mask`` a bitmask of SET_IDS bits, ``rng`` a
    numpy Generator.  Returns a dict of raw results.
    """
    u = [int(p) for p in u0]
    n = len(u)
    root = isqrt(n)
    croot = _ceil_sqrt(n)
    next_double = rng.random

    t = 0.0
    jumps = 0
    z_spike = 0
    z_leak = 0
    w_time = 0.0
    hits = [math.nan] * 6
    events = [] if log_events else None

    positives = sum(1 for p in u if p > 0)
    track_sets = record_mask != 0 or target_id >= 0 or track_w_time
    sv = sorted(u) if track_sets else None
    pending = record_mask
    in_w = False
    if track_sets:
        mask = _flags(sv, n, root, croot)
        in_w = bool(mask & 16)
        for s in range(6):
            if pending & (1 << s) and mask & (1 << s):
                hits[s] = 0.0
                pending &= ~(1 << s)
        if target_id >= 0 and mask & (1 << target_id):
            return _result(TARGET, t, jumps, z_spike, z_leak, math.nan, hits, u, w_time, events)

    if positives == 0:
        return _result(ABSORBED, t, jumps, z_spike, z_leak, t, hits, u, w_time, events)

    while True:
        if jumps >= budget:
            return _result(BUDGET, t, jumps, z_spike, z_leak, math.nan, hits, u, w_time, events)

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
        w = [0.0] * n
        s_sum = 0.0
        for i in range(n):
            if u[i] > 0:
                d = m - u[i]
                wi = table[d] if d < TABLE_SIZE else math.exp((u[i] - m) * log_base)
                w[i] = wi
                s_sum += wi

        mlb = m * log_base
        u1 = next_double()
        if mlb <= 700.0:
            total = math.exp(mlb) * s_sum + leak_eff
            dt = -math.log1p(-u1) / total
        else:
            inv = math.exp(-(mlb + math.log(s_sum)))
            dt = -math.log1p(-u1) * inv

        if t + dt > horizon:
            if track_w_time and in_w:
                w_time += horizon - t
            return _result(HORIZON, horizon, jumps, z_spike, z_leak, math.nan, hits, u, w_time, events)
        if track_w_time and in_w:
            w_time += dt
        t = t + dt

        u2 = next_double()
        if mlb <= 700.0:
            is_leak = u2 * total < leak_eff
        else:
            is_leak = u2 < leak_eff * inv

        u3 = next_double()
        if is_leak:
            k = int(u3 * leak_eff)
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
                _sorted_leak(sv, old, u[chosen])
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
                _sorted_spike(sv, old, n)
            kind = 0

        jumps += 1
        if log_events:
            events.append((jumps, t, chosen + 1, kind))

        if positives == 0:
            return _result(ABSORBED, t, jumps, z_spike, z_leak, t, hits, u, w_time, events)

        if track_sets:
            mask = _flags(sv, n, root, croot)
            in_w = bool(mask & 16)
            if pending:
                for s in range(6):
                    if pending & (1 << s) and mask & (1 << s):
                        hits[s] = t
                        pending &= ~(1 << s)
            if target_id >= 0 and mask & (1 << target_id):
                return _result(TARGET, t, jumps, z_spike, z_leak, math.nan, hits, u, w_time, events)


def _result(reason, t, jumps, z_spike, z_leak, tau, hits, u, w_time, events):
    return {
        "stop_reason": reason,
        "time": t,
        "jumps": jumps,
        "z_spike": z_spike,
        "z_leak": z_leak,
        "tau": tau,
        "hits": list(hits),
        "final": list(u),
        "w_time": w_time,
        "events": events,
    }


DECIDED = 4

# kind codes in the coupled selection scan
JOINT_SPIKE, SOLO_SPIKE, PAIR_LEAK = 0, 1, 2


def run_coupled(
    u0,
    v0,
    leak_kind: int,
    log_base: float,
    literal_solo: bool,
    horizon: float,
    budget: int,
    stop_when_decided: bool,
    stop_on_ladder: bool,
    table,
    rng,
):
    """Rank-matched coupling of two copies sharing one event clock.

    Rank j pairs the j-th smallest of each copy (ties by index).  Per
    rank the possible events are a joint spike at the smaller rate, a
    solo spike of the strictly larger coordinate, and a joint leak at
    rate 1 (omitted when both coordinates are zero).  The solo rate is
    base^max - base^min (marginal-preserving, the default) or
    base^|a-b| when ``literal_solo`` is set.

    Tracks first coalescence of the sorted profiles (n_c, t_nc), the
    first leak jump (n_dagger), and whether the opening window of
    2*ceil(sqrt(n)) jumps consisted solely of top-rank spikes (e1).
    When e1 holds, coalescence inside that window is asserted: a
    violation is reported rather than silently ignored.
    """
    u = [int(p) for p in u0]
    v = [int(p) for p in v0]
    n = len(u)
    croot = _ceil_sqrt(n)
    window = 2 * croot
    next_double = rng.random

    su = sorted(u)
    sv = sorted(v)
    t = 0.0
    jumps = 0
    n_c = -1
    t_nc = math.nan
    n_dagger = -1
    e1 = -1  # undecided
    violation = False
    u_ladder_t = math.nan
    v_ladder_t = math.nan

    def ladder(s):
        return all(s[j] == j for j in range(n))

    if su == sv:
        n_c = 0
        t_nc = 0.0
    if ladder(su):
        u_ladder_t = 0.0
    if ladder(sv):
        v_ladder_t = 0.0
    if stop_on_ladder and u_ladder_t == 0.0:
        return _coupled_result(TARGET, t, jumps, n_c, t_nc, n_dagger, e1, violation,
                               u_ladder_t, v_ladder_t, u, v)

    weights = [0.0] * (3 * n)
    while True:
        if jumps >= budget:
            return _coupled_result(BUDGET, t, jumps, n_c, t_nc, n_dagger, e1, violation,
                                   u_ladder_t, v_ladder_t, u, v)

        ou = sorted(range(n), key=u.__getitem__)
        ov = sorted(range(n), key=v.__getitem__)
        m = 0
        for i in range(n):
            if u[i] > m:
                m = u[i]
            if v[i] > m:
                m = v[i]
        if m == 0:
            return _coupled_result(ABSORBED, t, jumps, n_c, t_nc, n_dagger, e1, violation,
                                   u_ladder_t, v_ladder_t, u, v)

        s_sum = 0.0
        for j in range(n):
            a = u[ou[j]]
            b = v[ov[j]]
            lo, hi = (a, b) if a <= b else (b, a)
            base_idx = 3 * j
            if lo > 0:
                d = m - lo
                wj = table[d] if d < TABLE_SIZE else math.exp((lo - m) * log_base)
            else:
                wj = 0.0
            weights[base_idx] = wj
            if a != b:
                if literal_solo:
                    d = m - (hi - lo)
                    ws = table[d] if d < TABLE_SIZE else math.exp(((hi - lo) - m) * log_base)
                else:
                    d = m - hi
                    ws = table[d] if d < TABLE_SIZE else math.exp((hi - m) * log_base)
                    ws -= wj
            else:
                ws = 0.0
            weights[base_idx + 1] = ws
            if hi > 0:
                d = m
                wl = table[d] if d < TABLE_SIZE else math.exp(-m * log_base)
            else:
                wl = 0.0
            weights[base_idx + 2] = wl
            s_sum += wj + ws + wl

        mlb = m * log_base
        u1 = next_double()
        if mlb <= 700.0:
            total = math.exp(mlb) * s_sum
            dt = -math.log1p(-u1) / total
        else:
            inv = math.exp(-(mlb + math.log(s_sum)))
            dt = -math.log1p(-u1) * inv

        if t + dt > horizon:
            return _coupled_result(HORIZON, horizon, jumps, n_c, t_nc, n_dagger, e1, violation,
                                   u_ladder_t, v_ladder_t, u, v)
        t = t + dt

        u2 = next_double()
        r = u2 * s_sum
        c = 0.0
        chosen = -1
        for idx in range(3 * n):
            if weights[idx] > 0.0:
                chosen = idx
                c += weights[idx]
                if r < c:
                    break
        rank = chosen // 3
        kind = chosen - 3 * rank
        iu = ou[rank]
        iv = ov[rank]

        if kind == JOINT_SPIKE:
            _apply_spike(u, iu, n, su)
            _apply_spike(v, iv, n, sv)
        elif kind == SOLO_SPIKE:
            if u[iu] > v[iv]:
                _apply_spike(u, iu, n, su)
            else:
                _apply_spike(v, iv, n, sv)
        else:
            if u[iu] > 0:
                old = u[iu]
                u[iu] = 0 if leak_kind == 0 else old - 1
                _sorted_leak(su, old, u[iu])
            if v[iv] > 0:
                old = v[iv]
                v[iv] = 0 if leak_kind == 0 else old - 1
                _sorted_leak(sv, old, v[iv])

        jumps += 1
        if kind == PAIR_LEAK and n_dagger < 0:
            n_dagger = jumps

        if n_c < 0 and su == sv:
            n_c = jumps
            t_nc = t
        if math.isnan(u_ladder_t) and ladder(su):
            u_ladder_t = t
        if math.isnan(v_ladder_t) and ladder(sv):
            v_ladder_t = t

        if e1 == -1:
            if kind == PAIR_LEAK or rank != n - 1:
                e1 = 0
            elif jumps == window:
                e1 = 1
                # coalescence-by-window bound; guaranteed for W starts
                if not 0 <= n_c <= window:
                    violation = True

        if stop_on_ladder and not math.isnan(u_ladder_t):
            return _coupled_result(TARGET, t, jumps, n_c, t_nc, n_dagger, e1, violation,
                                   u_ladder_t, v_ladder_t, u, v)
        if stop_when_decided and e1 != -1 and (n_c >= 0 or n_dagger >= 0 or violation):
            return _coupled_result(DECIDED, t, jumps, n_c, t_nc, n_dagger, e1, violation,
                                   u_ladder_t, v_ladder_t, u, v)


def _apply_spike(x: list[int], i: int, n: int, sx: list[int]) -> None:
    old = x[i]
    for j in range(n):
        x[j] += 1
    x[i] = 0
    _sorted_spike(sx, old, n)


def _coupled_result(reason, t, jumps, n_c, t_nc, n_dagger, e1, violation,
                    u_ladder_t, v_ladder_t, u, v):
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
        "final_u": list(u),
        "final_v": list(v),
    }


def _sorted_spike(sv: list[int], spiked_value: int, n: int) -> None:
    """Sorted potentials after a spike: drop one instance of the
    spiker's value, add 1 to the rest, prepend 0."""
    out_idx = 1
    skipped = False
    prev = sv[:]
    for v in prev:
        if not skipped and v == spiked_value:
            skipped = True
            continue
        sv[out_idx] = v + 1
        out_idx += 1
    sv[0] = 0


def _sorted_leak(sv: list[int], old: int, new: int) -> None:
    """Sorted potentials after one neuron moved old -> new (new < old)."""
    # first instance of old stays sorted when lowered to new only if
    # new >= its left neighbour; shift the smaller block right instead
    pos = 0
    while sv[pos] != old:
        pos += 1
    while pos > 0 and sv[pos - 1] > new:
        sv[pos] = sv[pos - 1]
        pos -= 1
    sv[pos] = new
