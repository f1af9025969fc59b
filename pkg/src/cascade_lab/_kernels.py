"""Compiled batch kernels for the cascade simulators.

Everything here is numba-jitted with ``nogil=True`` so batches can be
chunked across Python threads; each simulation run re-derives its random
stream from (seed, run_index), which makes results independent of chunk
boundaries and worker count.

The RNG primitives mirror :mod:`cascade_lab.rng` exactly (same algorithm,
same expression shapes), and a test pins the two to identical output.
Keep the two files in sync when touching either.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0

_U1 = np.uint64(1)
_U11 = np.uint64(11)
_U17 = np.uint64(17)
_U23 = np.uint64(23)
_U27 = np.uint64(27)
_U30 = np.uint64(30)
_U31 = np.uint64(31)
_U41 = np.uint64(41)
_U45 = np.uint64(45)
_U19 = np.uint64(19)

POISSON_INVERSION_CUTOFF = 10.0


@njit(inline="always")
def _mix64(x):
    x = (x ^ (x >> _U30)) * _MIX1
    x = (x ^ (x >> _U27)) * _MIX2
    return x ^ (x >> _U31)


@njit(inline="always")
def _stream_init(seed, idx):
    sm = _mix64(_mix64(seed) ^ (idx * _GOLDEN))
    sm = sm + _GOLDEN
    s0 = _mix64(sm)
    sm = sm + _GOLDEN
    s1 = _mix64(sm)
    sm = sm + _GOLDEN
    s2 = _mix64(sm)
    sm = sm + _GOLDEN
    s3 = _mix64(sm)
    if s0 == np.uint64(0) and s1 == np.uint64(0) and s2 == np.uint64(0) and s3 == np.uint64(0):
        s0 = _GOLDEN
    return s0, s1, s2, s3


@njit(inline="always")
def _next64(s0, s1, s2, s3):
    x = s0 + s3
    result = ((x << _U23) | (x >> _U41)) + s0
    t = s1 << _U17
    s2 = s2 ^ s0
    s3 = s3 ^ s1
    s1 = s1 ^ s2
    s0 = s0 ^ s3
    s2 = s2 ^ t
    s3 = (s3 << _U45) | (s3 >> _U19)
    return s0, s1, s2, s3, result


@njit(inline="always")
def _uniform(s0, s1, s2, s3):
    s0, s1, s2, s3, r = _next64(s0, s1, s2, s3)
    return s0, s1, s2, s3, (r >> _U11) * _INV_2_53


@njit(inline="always")
def _randbelow(s0, s1, s2, s3, n):
    # n: uint64 >= 1.  Masked rejection: exactly uniform in [0, n).
    mask = n - _U1
    mask = mask | (mask >> np.uint64(1))
    mask = mask | (mask >> np.uint64(2))
    mask = mask | (mask >> np.uint64(4))
    mask = mask | (mask >> np.uint64(8))
    mask = mask | (mask >> np.uint64(16))
    mask = mask | (mask >> np.uint64(32))
    while True:
        s0, s1, s2, s3, r = _next64(s0, s1, s2, s3)
        r = r & mask
        if r < n:
            return s0, s1, s2, s3, r


@njit(inline="always")
def _poisson(s0, s1, s2, s3, lam):
    if lam == 0.0:
        return s0, s1, s2, s3, 0
    if lam < POISSON_INVERSION_CUTOFF:
        s0, s1, s2, s3, u = _uniform(s0, s1, s2, s3)
        p = math.exp(-lam)
        f = p
        k = 0
        while u > f:
            k += 1
            p = p * lam / k
            f += p
            if p < 5e-324:
                break
        return s0, s1, s2, s3, k
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        s0, s1, s2, s3, u = _uniform(s0, s1, s2, s3)
        u = u - 0.5
        s0, s1, s2, s3, v = _uniform(s0, s1, s2, s3)
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return s0, s1, s2, s3, int(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if math.log(v * invalpha / (a / (us * us) + b)) <= k * loglam - lam - math.lgamma(
            k + 1.0
        ):
            return s0, s1, s2, s3, int(k)


@njit(cache=True, nogil=True)
def rng_words(seed, stream_index, out):
    """Fill ``out`` with raw 64-bit words of one stream (test cross-check)."""
    s0, s1, s2, s3 = _stream_init(np.uint64(seed), np.uint64(stream_index))
    for i in range(out.shape[0]):
        s0, s1, s2, s3, r = _next64(s0, s1, s2, s3)
        out[i] = r


@njit(cache=True, nogil=True)
def poisson_batch(lam, seed, lo, hi, out):
    """One Poisson draw per stream (seed, i); used for sampler validation."""
    useed = np.uint64(seed)
    for i in range(lo, hi):
        s0, s1, s2, s3 = _stream_init(useed, np.uint64(i))
        s0, s1, s2, s3, k = _poisson(s0, s1, s2, s3, lam)
        out[i] = k


@njit(cache=True, nogil=True)
def alpha_family_batch(
    offsets,
    nbrs,
    num_nodes,
    alpha,
    decay,
    size_cap,
    max_rounds,
    seed,
    lo,
    hi,
    start_override,
    out_spread,
    out_informed,
    out_rounds,
    out_trunc,
):
    """Models alpha (decay=False) and alpha^k (decay=True).

    Per run: the seed node spreads unconditionally; every other node draws
    one Bernoulli on first informing (success prob alpha, or alpha^k for a
    node first informed in round k) and, on success, informs all its
    neighbors next round.  Cascade size is the spreader count.
    """
    visited = np.zeros(num_nodes, np.int32)
    cur = np.empty(num_nodes, np.int32)
    nxt = np.empty(num_nodes, np.int32)
    useed = np.uint64(seed)
    for i in range(lo, hi):
        s0, s1, s2, s3 = _stream_init(useed, np.uint64(i))
        if start_override >= 0:
            start = start_override
        else:
            s0, s1, s2, s3, r = _randbelow(s0, s1, s2, s3, np.uint64(num_nodes))
            start = np.int64(r)
        epoch = np.int32(i - lo + 1)
        visited[start] = epoch
        spreaders = 1
        informed = 1
        rounds = 0
        trunc = False
        cur[0] = np.int32(start)
        cur_len = 1
        k = 0
        p = alpha
        while cur_len > 0:
            k += 1
            if k > max_rounds:
                trunc = True
                break
            if decay:
                p = alpha ** np.float64(k)
            nxt_len = 0
            capped = False
            for ci in range(cur_len):
                u = cur[ci]
                for e in range(offsets[u], offsets[u + 1]):
                    v = nbrs[e]
                    if visited[v] != epoch:
                        visited[v] = epoch
                        informed += 1
                        rounds = k
                        s0, s1, s2, s3, w = _next64(s0, s1, s2, s3)
                        if (w >> _U11) * _INV_2_53 < p:
                            spreaders += 1
                            nxt[nxt_len] = np.int32(v)
                            nxt_len += 1
                            if size_cap > 0 and spreaders >= size_cap:
                                capped = True
                                break
                if capped:
                    break
            if capped:
                trunc = True
                break
            tmp = cur
            cur = nxt
            nxt = tmp
            cur_len = nxt_len
        out_spread[i] = spreaders
        out_informed[i] = informed
        out_rounds[i] = rounds
        out_trunc[i] = 1 if trunc else 0


@njit(cache=True, nogil=True)
def cgm_batch(
    offsets,
    nbrs,
    num_nodes,
    alpha,
    size_cap,
    max_rounds,
    seed,
    lo,
    hi,
    start_override,
    out_spread,
    out_informed,
    out_rounds,
    out_trunc,
):
    """Cascade generation model: one Bernoulli per (informer, neighbor) pair.

    Every newly informed node draws a separate decision for each direct
    neighbor (the draw happens whether or not the neighbor is already
    informed); nodes act only when informed for the first time.  Cascade
    size is the informed count.
    """
    visited = np.zeros(num_nodes, np.int32)
    cur = np.empty(num_nodes, np.int32)
    nxt = np.empty(num_nodes, np.int32)
    useed = np.uint64(seed)
    for i in range(lo, hi):
        s0, s1, s2, s3 = _stream_init(useed, np.uint64(i))
        if start_override >= 0:
            start = start_override
        else:
            s0, s1, s2, s3, r = _randbelow(s0, s1, s2, s3, np.uint64(num_nodes))
            start = np.int64(r)
        epoch = np.int32(i - lo + 1)
        visited[start] = epoch
        informed = 1
        rounds = 0
        trunc = False
        cur[0] = np.int32(start)
        cur_len = 1
        k = 0
        while cur_len > 0:
            k += 1
            if k > max_rounds:
                trunc = True
                break
            nxt_len = 0
            capped = False
            for ci in range(cur_len):
                u = cur[ci]
                for e in range(offsets[u], offsets[u + 1]):
                    v = nbrs[e]
                    s0, s1, s2, s3, w = _next64(s0, s1, s2, s3)
                    if (w >> _U11) * _INV_2_53 < alpha and visited[v] != epoch:
                        visited[v] = epoch
                        informed += 1
                        rounds = k
                        nxt[nxt_len] = np.int32(v)
                        nxt_len += 1
                        if size_cap > 0 and informed >= size_cap:
                            capped = True
                            break
                if capped:
                    break
            if capped:
                trunc = True
                break
            tmp = cur
            cur = nxt
            nxt = tmp
            cur_len = nxt_len
        out_spread[i] = informed
        out_informed[i] = informed
        out_rounds[i] = rounds
        out_trunc[i] = 1 if trunc else 0


@njit(cache=True, nogil=True)
def multi_exact_batch(
    offsets,
    nbrs,
    num_nodes,
    alpha,
    lam,
    size_cap,
    max_rounds,
    seed,
    lo,
    hi,
    start_override,
    out_spread,
    out_informed,
    out_rounds,
    out_trunc,
):
    """Graph-level multi-source alpha^k with a shared informed set.

    Injected sources appear only in rounds where the spreading phase just
    informed at least one new node (this matches the pseudocode horizon
    rule: a sub-cascade of r rounds keeps injections alive through its
    injection round + r, and nothing beyond).  An injected pick that is
    already informed is a no-op.  A fresh injected source spreads
    unconditionally and its neighbors use exponent alpha^1, i.e. the decay
    exponent restarts at each source.
    """
    visited = np.zeros(num_nodes, np.int32)
    cur_n = np.empty(num_nodes, np.int32)
    cur_d = np.empty(num_nodes, np.int32)
    nxt_n = np.empty(num_nodes, np.int32)
    nxt_d = np.empty(num_nodes, np.int32)
    useed = np.uint64(seed)
    un = np.uint64(num_nodes)
    for i in range(lo, hi):
        s0, s1, s2, s3 = _stream_init(useed, np.uint64(i))
        if start_override >= 0:
            start = start_override
        else:
            s0, s1, s2, s3, r = _randbelow(s0, s1, s2, s3, un)
            start = np.int64(r)
        epoch = np.int32(i - lo + 1)
        visited[start] = epoch
        spreaders = 1
        informed = 1
        rounds = 0
        trunc = False
        cur_n[0] = np.int32(start)
        cur_d[0] = 0
        cur_len = 1
        t = 0
        while cur_len > 0:
            t += 1
            if t > max_rounds:
                trunc = True
                break
            nxt_len = 0
            new_informed = False
            capped = False
            for ci in range(cur_len):
                u = cur_n[ci]
                d = cur_d[ci]
                for e in range(offsets[u], offsets[u + 1]):
                    v = nbrs[e]
                    if visited[v] != epoch:
                        visited[v] = epoch
                        informed += 1
                        new_informed = True
                        rounds = t
                        s0, s1, s2, s3, w = _next64(s0, s1, s2, s3)
                        if (w >> _U11) * _INV_2_53 < alpha ** np.float64(d + 1):
                            spreaders += 1
                            nxt_n[nxt_len] = np.int32(v)
                            nxt_d[nxt_len] = np.int32(d + 1)
                            nxt_len += 1
                            if size_cap > 0 and spreaders >= size_cap:
                                capped = True
                                break
                if capped:
                    break
            if capped:
                trunc = True
                break
            if new_informed:
                s0, s1, s2, s3, x = _poisson(s0, s1, s2, s3, lam)
                for _ in range(x):
                    s0, s1, s2, s3, r = _randbelow(s0, s1, s2, s3, un)
                    v = np.int64(r)
                    if visited[v] != epoch:
                        visited[v] = epoch
                        informed += 1
                        spreaders += 1
                        nxt_n[nxt_len] = np.int32(v)
                        nxt_d[nxt_len] = 0
                        nxt_len += 1
                        if size_cap > 0 and spreaders >= size_cap:
                            capped = True
                            break
                if capped:
                    trunc = True
                    break
            tmp = cur_n
            cur_n = nxt_n
            nxt_n = tmp
            tmp = cur_d
            cur_d = nxt_d
            nxt_d = tmp
            cur_len = nxt_len
        out_spread[i] = spreaders
        out_informed[i] = informed
        out_rounds[i] = rounds
        out_trunc[i] = 1 if trunc else 0


@njit(inline="always")
def _table_draw(s0, s1, s2, s3, n_entries, total, thresh, alias_idx):
    s0, s1, s2, s3, j64 = _randbelow(s0, s1, s2, s3, n_entries)
    s0, s1, s2, s3, u64 = _randbelow(s0, s1, s2, s3, total)
    j = np.int64(j64)
    if np.int64(u64) < thresh[j]:
        return s0, s1, s2, s3, j
    return s0, s1, s2, s3, np.int64(alias_idx[j])


@njit(cache=True, nogil=True)
def compound_batch(
    sizes,
    rounds_arr,
    thresh,
    alias_idx,
    total,
    lam,
    round_cap,
    seed,
    lo,
    hi,
    out_size,
    out_rounds,
    out_div,
):
    """Multi-source alpha^k fast path: compose table draws per the
    compound-Poisson recurrence (one Poisson(lam) batch of sub-cascades per
    round, each extending the round horizon via max(rounds, round + r)).

    A run whose horizon exceeds ``round_cap`` is flagged divergent.
    """
    n_entries = np.uint64(sizes.shape[0])
    utotal = np.uint64(total)
    useed = np.uint64(seed)
    for i in range(lo, hi):
        s0, s1, s2, s3 = _stream_init(useed, np.uint64(i))
        s0, s1, s2, s3, j = _table_draw(s0, s1, s2, s3, n_entries, utotal, thresh, alias_idx)
        size = np.int64(sizes[j])
        rounds = np.int64(rounds_arr[j])
        diverged = False
        curr = 1
        while curr <= rounds:
            s0, s1, s2, s3, x = _poisson(s0, s1, s2, s3, lam)
            for _ in range(x):
                s0, s1, s2, s3, j = _table_draw(
                    s0, s1, s2, s3, n_entries, utotal, thresh, alias_idx
                )
                size += sizes[j]
                nr = curr + rounds_arr[j]
                if nr > rounds:
                    rounds = nr
            if rounds > round_cap:
                diverged = True
                break
            curr += 1
        out_size[i] = size
        out_rounds[i] = rounds
        out_div[i] = 1 if diverged else 0
