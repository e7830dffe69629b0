"""Accelerated single-trial runners (numba).

Every kernel re-implements the exact draw stream of ``engine.Rng``
(splitmix64-style counter with per-trial gamma, rejection sampling into
[0, 2m)) and the exact transition semantics of the pure-Python protocol
modules, so a kernel trial and a generic-engine trial with the same
derived stream produce identical results. The equivalence is enforced by
tests, not assumed.

If numba is unavailable the package still works: protocol specs simply
ship without kernel runners and the generic engine executes everything.
"""

from __future__ import annotations

import weakref

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return wrap


__all__ = ["HAVE_NUMBA", "edge_arrays", "run_token", "run_maxid", "run_fast",
           "run_broadcast", "run_propagation", "run_pop_hit", "run_meet"]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U0 = np.uint64(0)

# Keyed by the live Graph object (identity semantics); entries die with it.
_edge_cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def edge_arrays(g) -> tuple[np.ndarray, np.ndarray]:
    """Contiguous int64 endpoint arrays for a Graph, cached per object."""
    hit = _edge_cache.get(g)
    if hit is not None:
        return hit
    eu = np.ascontiguousarray(g.edges[:, 0], dtype=np.int64)
    ev = np.ascontiguousarray(g.edges[:, 1], dtype=np.int64)
    _edge_cache[g] = (eu, ev)
    return eu, ev


@njit(cache=True, nogil=True)
def _mix(z):
    z = (z ^ (z >> _U30)) * _MIX1
    z = (z ^ (z >> _U27)) * _MIX2
    return z ^ (z >> _U31)


@njit(cache=True, nogil=True)
def _draw(state, gamma, bound, threshold):
    # rejection keeps the draw exactly uniform on [0, bound)
    while True:
        state = state + gamma
        z = _mix(state)
        if z >= threshold:
            return state, z % bound


@njit(cache=True, nogil=True)
def _threshold(bound):
    return (_U0 - bound) % bound  # 2^64 mod bound


# ---------------------------------------------------------------------------
# Token protocol
# ---------------------------------------------------------------------------

_FOLLOWER = 0
_CANDIDATE = 1
_NO_TOKEN = 0
_BLACK = 1
_WHITE = 2


@njit(cache=True, nogil=True)
def run_token(eu, ev, n, cand, state, gamma, max_steps, tail_steps):
    m = eu.shape[0]
    bound = np.uint64(2 * m)
    threshold = _threshold(bound)
    role = np.empty(n, dtype=np.uint8)
    tok = np.empty(n, dtype=np.uint8)
    c = 0
    for i in range(n):
        if cand[i]:
            role[i] = _CANDIDATE
            tok[i] = _BLACK
            c += 1
        else:
            role[i] = _FOLLOWER
            tok[i] = _NO_TOKEN
    b = c
    w = 0
    violations = 0
    t = np.int64(0)
    stab = np.int64(-1)
    if c == 1:
        stab = 0
    while stab < 0 and t < max_steps:
        state, r = _draw(state, gamma, bound, threshold)
        eidx = np.int64(r >> np.uint64(1))
        u = eu[eidx]
        v = ev[eidx]
        if r & np.uint64(1):
            u, v = v, u
        t += 1
        ta = tok[v]
        tb = tok[u]
        if ta == _BLACK and tb == _BLACK:
            tb = _WHITE
            b -= 1
            w += 1
        ra = role[u]
        rb = role[v]
        if ra == _CANDIDATE and ta == _WHITE:
            ra = _FOLLOWER
            ta = _NO_TOKEN
            c -= 1
            w -= 1
        if rb == _CANDIDATE and tb == _WHITE:
            rb = _FOLLOWER
            tb = _NO_TOKEN
            c -= 1
            w -= 1
        role[u] = ra
        tok[u] = ta
        role[v] = rb
        tok[v] = tb
        if c != b + w or b < 1:
            violations += 1
        if c == 1:
            stab = t
    flips = 0
    if stab >= 0:
        for _ in range(tail_steps):
            state, r = _draw(state, gamma, bound, threshold)
            eidx = np.int64(r >> np.uint64(1))
            u = eu[eidx]
            v = ev[eidx]
            if r & np.uint64(1):
                u, v = v, u
            ra_old = role[u]
            rb_old = role[v]
            ta = tok[v]
            tb = tok[u]
            if ta == _BLACK and tb == _BLACK:
                tb = _WHITE
                b -= 1
                w += 1
            ra = role[u]
            rb = role[v]
            if ra == _CANDIDATE and ta == _WHITE:
                ra = _FOLLOWER
                ta = _NO_TOKEN
                c -= 1
                w -= 1
            if rb == _CANDIDATE and tb == _WHITE:
                rb = _FOLLOWER
                tb = _NO_TOKEN
                c -= 1
                w -= 1
            role[u] = ra
            tok[u] = ta
            role[v] = rb
            tok[v] = tb
            if c != b + w or b < 1:
                violations += 1
            if ra != ra_old:
                flips += 1
            if rb != rb_old:
                flips += 1
    leader = np.int64(-1)
    extra = 0
    if stab >= 0:
        found = 0
        for i in range(n):
            if role[i] == _CANDIDATE:
                found += 1
                leader = i
        if found != 1:
            leader = -1
            extra = 1
    return stab, leader, violations + flips + extra, flips, c, b, w


# ---------------------------------------------------------------------------
# Max-ID protocol
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def run_maxid(eu, ev, n, k, state, gamma, max_steps, tail_steps):
    m = eu.shape[0]
    bound = np.uint64(2 * m)
    threshold = _threshold(bound)
    two_k = np.int64(1) << k
    ids = np.ones(n, dtype=np.int64)
    role = np.zeros(n, dtype=np.uint8)
    tok = np.zeros(n, dtype=np.uint8)
    candidates = 0
    max_id = np.int64(1)
    count_at_max = n
    started_max = np.int64(0)
    started_cnt = 0
    violations = 0
    t = np.int64(0)
    stab = np.int64(-1)
    # initial configuration (all ids 1 < 2^k) is never stable for n >= 2
    while stab < 0 and t < max_steps:
        state, r = _draw(state, gamma, bound, threshold)
        eidx = np.int64(r >> np.uint64(1))
        u = eu[eidx]
        v = ev[eidx]
        if r & np.uint64(1):
            u, v = v, u
        t += 1
        ida_old = ids[u]
        idb_old = ids[v]
        ra_old = role[u]
        rb_old = role[v]

        ida = ida_old
        ra = ra_old
        ta = tok[u]
        if ida < two_k:
            ida = 2 * ida
            if ida >= two_k:
                ra = _CANDIDATE
                ta = _BLACK
                if ida > started_max:
                    started_max = ida
                    started_cnt = 1
                elif ida == started_max:
                    started_cnt += 1
        idb = idb_old
        rb = rb_old
        tb = tok[v]
        if idb < two_k:
            idb = 2 * idb + 1
            if idb >= two_k:
                rb = _CANDIDATE
                tb = _BLACK
                if idb > started_max:
                    started_max = idb
                    started_cnt = 1
                elif idb == started_max:
                    started_cnt += 1
        post_a = ida
        post_b = idb
        if ida < post_b and post_b >= two_k:
            ida = post_b
            ra = _FOLLOWER
            ta = _NO_TOKEN
        if idb < post_a and post_a >= two_k:
            idb = post_a
            rb = _FOLLOWER
            tb = _NO_TOKEN
        # token layer: swap, whiten, eliminate
        na = tb
        nb = ta
        if na == _BLACK and nb == _BLACK:
            nb = _WHITE
        if ra == _CANDIDATE and na == _WHITE:
            ra = _FOLLOWER
            na = _NO_TOKEN
        if rb == _CANDIDATE and nb == _WHITE:
            rb = _FOLLOWER
            nb = _NO_TOKEN

        ids[u] = ida
        role[u] = ra
        tok[u] = na
        ids[v] = idb
        role[v] = rb
        tok[v] = nb

        new_max = max_id
        if ida > new_max:
            new_max = ida
        if idb > new_max:
            new_max = idb
        if new_max > max_id:
            max_id = new_max
            count_at_max = (1 if ida == new_max else 0) + (1 if idb == new_max else 0)
        else:
            count_at_max += (1 if ida == max_id else 0) - (1 if ida_old == max_id else 0)
            count_at_max += (1 if idb == max_id else 0) - (1 if idb_old == max_id else 0)
        candidates += (1 if ra == _CANDIDATE else 0) - (1 if ra_old == _CANDIDATE else 0)
        candidates += (1 if rb == _CANDIDATE else 0) - (1 if rb_old == _CANDIDATE else 0)

        if count_at_max == n and max_id >= two_k and candidates == 1:
            stab = t
    flips = 0
    if stab >= 0:
        for _ in range(tail_steps):
            state, r = _draw(state, gamma, bound, threshold)
            eidx = np.int64(r >> np.uint64(1))
            u = eu[eidx]
            v = ev[eidx]
            if r & np.uint64(1):
                u, v = v, u
            ra_old = role[u]
            rb_old = role[v]
            # all ids equal and >= 2^k here, so only the token layer can act
            na = tok[v]
            nb = tok[u]
            if na == _BLACK and nb == _BLACK:
                nb = _WHITE
            ra = role[u]
            rb = role[v]
            if ra == _CANDIDATE and na == _WHITE:
                ra = _FOLLOWER
                na = _NO_TOKEN
            if rb == _CANDIDATE and nb == _WHITE:
                rb = _FOLLOWER
                nb = _NO_TOKEN
            role[u] = ra
            tok[u] = na
            role[v] = rb
            tok[v] = nb
            if ra != ra_old:
                flips += 1
            if rb != rb_old:
                flips += 1
    leader = np.int64(-1)
    extra = 0
    if stab >= 0:
        found = 0
        for i in range(n):
            if role[i] == _CANDIDATE:
                found += 1
                leader = i
        if found != 1:
            leader = -1
            extra = 1
    return stab, leader, violations + flips + extra, flips, max_id, started_cnt


# ---------------------------------------------------------------------------
# Fast streak-level protocol
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def run_fast(eu, ev, n, h, L, level_cap, state, gamma, max_steps, tail_steps):
    m = eu.shape[0]
    bound = np.uint64(2 * m)
    threshold = _threshold(bound)
    streak = np.zeros(n, dtype=np.int64)
    status = np.ones(n, dtype=np.uint8)  # all leaders
    level = np.zeros(n, dtype=np.int64)
    bact = np.zeros(n, dtype=np.uint8)
    brole = np.zeros(n, dtype=np.uint8)
    btok = np.zeros(n, dtype=np.uint8)

    leader_count = n
    max_level = np.int64(0)
    count_at_max = n
    leaders_at_max = n
    cb = 0  # backup candidates
    bb = 0  # backup blacks
    wb = 0  # backup whites
    active = 0
    violations = 0
    t = np.int64(0)
    stab = np.int64(-1)
    if leader_count == 1:
        stab = 0

    while stab < 0 and t < max_steps:
        state, r = _draw(state, gamma, bound, threshold)
        eidx = np.int64(r >> np.uint64(1))
        u = eu[eidx]
        v = ev[eidx]
        if r & np.uint64(1):
            u, v = v, u
        t += 1

        lu_snap = level[u]
        lv_snap = level[v]
        out_u_old = (brole[u] == _CANDIDATE) if bact[u] else (status[u] == 1)
        out_v_old = (brole[v] == _CANDIDATE) if bact[v] else (status[v] == 1)

        # initiator u
        su = streak[u] + 1
        completed_u = su == h
        if completed_u:
            su = 0
        ru = status[u]
        lu = lu_snap
        if completed_u and ru == 1:
            lu = lu + 1
            if lu > level_cap:
                lu = level_cap
        if lu < lv_snap and lv_snap >= L:
            ru = 0
        if (lu if lu > lv_snap else lv_snap) >= L:
            if lv_snap > lu:
                lu = lv_snap
        au = bact[u]
        bru = brole[u]
        btu = btok[u]
        if lu == level_cap and au == 0:
            au = 1
            active += 1
            if ru == 1:
                bru = _CANDIDATE
                btu = _BLACK
                cb += 1
                bb += 1
            else:
                bru = _FOLLOWER
                btu = _NO_TOKEN

        # responder v (streak resets, never completes)
        sv = 0
        rv = status[v]
        lv = lv_snap
        if lv < lu_snap and lu_snap >= L:
            rv = 0
        if (lv if lv > lu_snap else lu_snap) >= L:
            if lu_snap > lv:
                lv = lu_snap
        av = bact[v]
        brv = brole[v]
        btv = btok[v]
        if lv == level_cap and av == 0:
            av = 1
            active += 1
            if rv == 1:
                brv = _CANDIDATE
                btv = _BLACK
                cb += 1
                bb += 1
            else:
                brv = _FOLLOWER
                btv = _NO_TOKEN

        if au == 1 and av == 1:
            # token step between the two backup states
            ta = btv
            tb = btu
            if ta == _BLACK and tb == _BLACK:
                tb = _WHITE
                bb -= 1
                wb += 1
            if bru == _CANDIDATE and ta == _WHITE:
                bru = _FOLLOWER
                ta = _NO_TOKEN
                cb -= 1
                wb -= 1
            if brv == _CANDIDATE and tb == _WHITE:
                brv = _FOLLOWER
                tb = _NO_TOKEN
                cb -= 1
                wb -= 1
            btu = ta
            btv = tb

        streak[u] = su
        status[u] = ru
        level[u] = lu
        bact[u] = au
        brole[u] = bru
        btok[u] = btu
        streak[v] = sv
        status[v] = rv
        level[v] = lv
        bact[v] = av
        brole[v] = brv
        btok[v] = btv

        out_u_new = (bru == _CANDIDATE) if au else (ru == 1)
        out_v_new = (brv == _CANDIDATE) if av else (rv == 1)
        leader_count += (1 if out_u_new else 0) - (1 if out_u_old else 0)
        leader_count += (1 if out_v_new else 0) - (1 if out_v_old else 0)

        new_max = max_level
        if lu > new_max:
            new_max = lu
        if lv > new_max:
            new_max = lv
        if new_max > max_level:
            max_level = new_max
            count_at_max = (1 if lu == new_max else 0) + (1 if lv == new_max else 0)
            leaders_at_max = ((1 if (lu == new_max and out_u_new) else 0)
                              + (1 if (lv == new_max and out_v_new) else 0))
        else:
            count_at_max += (1 if lu == max_level else 0) - (1 if lu_snap == max_level else 0)
            count_at_max += (1 if lv == max_level else 0) - (1 if lv_snap == max_level else 0)
            leaders_at_max += ((1 if (lu == max_level and out_u_new) else 0)
                               - (1 if (lu_snap == max_level and out_u_old) else 0))
            leaders_at_max += ((1 if (lv == max_level and out_v_new) else 0)
                               - (1 if (lv_snap == max_level and out_v_old) else 0))

        if leaders_at_max < 1:
            violations += 1
        if active > 0 and (cb != bb + wb or bb < 1):
            violations += 1

        if leader_count == 1 and leaders_at_max == 1:
            stab = t

    flips = 0
    if stab >= 0:
        for _ in range(tail_steps):
            state, r = _draw(state, gamma, bound, threshold)
            eidx = np.int64(r >> np.uint64(1))
            u = eu[eidx]
            v = ev[eidx]
            if r & np.uint64(1):
                u, v = v, u

            lu_snap = level[u]
            lv_snap = level[v]
            out_u_old = (brole[u] == _CANDIDATE) if bact[u] else (status[u] == 1)
            out_v_old = (brole[v] == _CANDIDATE) if bact[v] else (status[v] == 1)

            su = streak[u] + 1
            completed_u = su == h
            if completed_u:
                su = 0
            ru = status[u]
            lu = lu_snap
            if completed_u and ru == 1:
                lu = lu + 1
                if lu > level_cap:
                    lu = level_cap
            if lu < lv_snap and lv_snap >= L:
                ru = 0
            if (lu if lu > lv_snap else lv_snap) >= L:
                if lv_snap > lu:
                    lu = lv_snap
            au = bact[u]
            bru = brole[u]
            btu = btok[u]
            if lu == level_cap and au == 0:
                au = 1
                active += 1
                if ru == 1:
                    bru = _CANDIDATE
                    btu = _BLACK
                    cb += 1
                    bb += 1
                else:
                    bru = _FOLLOWER
                    btu = _NO_TOKEN

            sv = 0
            rv = status[v]
            lv = lv_snap
            if lv < lu_snap and lu_snap >= L:
                rv = 0
            if (lv if lv > lu_snap else lu_snap) >= L:
                if lu_snap > lv:
                    lv = lu_snap
            av = bact[v]
            brv = brole[v]
            btv = btok[v]
            if lv == level_cap and av == 0:
                av = 1
                active += 1
                if rv == 1:
                    brv = _CANDIDATE
                    btv = _BLACK
                    cb += 1
                    bb += 1
                else:
                    brv = _FOLLOWER
                    btv = _NO_TOKEN

            if au == 1 and av == 1:
                ta = btv
                tb = btu
                if ta == _BLACK and tb == _BLACK:
                    tb = _WHITE
                    bb -= 1
                    wb += 1
                if bru == _CANDIDATE and ta == _WHITE:
                    bru = _FOLLOWER
                    ta = _NO_TOKEN
                    cb -= 1
                    wb -= 1
                if brv == _CANDIDATE and tb == _WHITE:
                    brv = _FOLLOWER
                    tb = _NO_TOKEN
                    cb -= 1
                    wb -= 1
                btu = ta
                btv = tb

            streak[u] = su
            status[u] = ru
            level[u] = lu
            bact[u] = au
            brole[u] = bru
            btok[u] = btu
            streak[v] = sv
            status[v] = rv
            level[v] = lv
            bact[v] = av
            brole[v] = brv
            btok[v] = btv

            out_u_new = (bru == _CANDIDATE) if au else (ru == 1)
            out_v_new = (brv == _CANDIDATE) if av else (rv == 1)
            leader_count += (1 if out_u_new else 0) - (1 if out_u_old else 0)
            leader_count += (1 if out_v_new else 0) - (1 if out_v_old else 0)

            new_max = max_level
            if lu > new_max:
                new_max = lu
            if lv > new_max:
                new_max = lv
            if new_max > max_level:
                max_level = new_max
                count_at_max = (1 if lu == new_max else 0) + (1 if lv == new_max else 0)
                leaders_at_max = ((1 if (lu == new_max and out_u_new) else 0)
                                  + (1 if (lv == new_max and out_v_new) else 0))
            else:
                count_at_max += (1 if lu == max_level else 0) - (1 if lu_snap == max_level else 0)
                count_at_max += (1 if lv == max_level else 0) - (1 if lv_snap == max_level else 0)
                leaders_at_max += ((1 if (lu == max_level and out_u_new) else 0)
                                   - (1 if (lu_snap == max_level and out_u_old) else 0))
                leaders_at_max += ((1 if (lv == max_level and out_v_new) else 0)
                                   - (1 if (lv_snap == max_level and out_v_old) else 0))

            if leaders_at_max < 1:
                violations += 1
            if active > 0 and (cb != bb + wb or bb < 1):
                violations += 1

            if out_u_new != out_u_old:
                flips += 1
            if out_v_new != out_v_old:
                flips += 1

    leader = np.int64(-1)
    extra = 0
    if stab >= 0:
        found = 0
        for i in range(n):
            is_leader = (brole[i] == _CANDIDATE) if bact[i] else (status[i] == 1)
            if is_leader:
                found += 1
                leader = i
        if found != 1:
            leader = -1
            extra = 1
    return stab, leader, violations + flips + extra, flips, max_level, active


# ---------------------------------------------------------------------------
# Epidemic / random-walk measurement kernels
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def run_broadcast(eu, ev, n, source, state, gamma, max_steps):
    """Steps until every node holds the source's message; -1 on budget."""
    m = eu.shape[0]
    bound = np.uint64(2 * m)
    threshold = _threshold(bound)
    informed = np.zeros(n, dtype=np.uint8)
    informed[source] = 1
    cnt = 1
    t = np.int64(0)
    while cnt < n and t < max_steps:
        state, r = _draw(state, gamma, bound, threshold)
        eidx = np.int64(r >> np.uint64(1))
        u = eu[eidx]
        v = ev[eidx]
        t += 1
        iu = informed[u]
        iv = informed[v]
        if iu != iv:
            informed[u] = 1
            informed[v] = 1
            cnt += 1
    if cnt < n:
        return np.int64(-1)
    return t


@njit(cache=True, nogil=True)
def run_propagation(eu, ev, n, source, targets, state, gamma, max_steps):
    """Steps until the source's message reaches any flagged target; -1 on budget."""
    m = eu.shape[0]
    bound = np.uint64(2 * m)
    threshold = _threshold(bound)
    informed = np.zeros(n, dtype=np.uint8)
    informed[source] = 1
    if targets[source]:
        return np.int64(0)
    t = np.int64(0)
    while t < max_steps:
        state, r = _draw(state, gamma, bound, threshold)
        eidx = np.int64(r >> np.uint64(1))
        u = eu[eidx]
        v = ev[eidx]
        t += 1
        iu = informed[u]
        iv = informed[v]
        if iu != iv:
            informed[u] = 1
            informed[v] = 1
            if (targets[u] and iu == 0) or (targets[v] and iv == 0):
                return t
    return np.int64(-1)


@njit(cache=True, nogil=True)
def run_pop_hit(eu, ev, start, target, state, gamma, max_steps):
    """Population-model walk: move when the sampled edge touches the walker."""
    m = eu.shape[0]
    bound = np.uint64(2 * m)
    threshold = _threshold(bound)
    pos = start
    t = np.int64(0)
    while pos != target and t < max_steps:
        state, r = _draw(state, gamma, bound, threshold)
        eidx = np.int64(r >> np.uint64(1))
        u = eu[eidx]
        v = ev[eidx]
        t += 1
        if pos == u:
            pos = v
        elif pos == v:
            pos = u
    if pos != target:
        return np.int64(-1)
    return t


@njit(cache=True, nogil=True)
def run_meet(eu, ev, start_a, start_b, state, gamma, max_steps):
    """Two population walks; meet when the sampled edge has them at its ends.

    The meeting check runs before either walk moves, so two walks never
    co-locate: any edge joining their positions triggers the meeting first.
    """
    m = eu.shape[0]
    bound = np.uint64(2 * m)
    threshold = _threshold(bound)
    a = start_a
    b = start_b
    t = np.int64(0)
    while t < max_steps:
        state, r = _draw(state, gamma, bound, threshold)
        eidx = np.int64(r >> np.uint64(1))
        u = eu[eidx]
        v = ev[eidx]
        t += 1
        if (a == u and b == v) or (a == v and b == u):
            return t
        if a == u:
            a = v
        elif a == v:
            a = u
        if b == u:
            b = v
        elif b == v:
            b = u
    return np.int64(-1)
