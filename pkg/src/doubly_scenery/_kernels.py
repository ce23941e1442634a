"""Compiled occupation-count kernels.

Both kernels walk every user of a batch, keep a dense visit-count window,
and snapshot the counts of all sites visited so far at each checkpoint.
Output is ragged: sites of user ``u`` live in ``[offsets[u], offsets[u+1])``
in first-visit order, and ``counts[j, s]`` is the count of site ``s`` after
``stops[j]`` steps (zero if not yet visited).
"""
import numpy as np

try:
    import numba

    njit = numba.njit(cache=True, nogil=True)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(f):
        return f


@njit
def _grow(sites, counts, need):
    cap = sites.shape[0]
    while cap < need:
        cap *= 2
    new_sites = np.empty(cap, np.int64)
    new_counts = np.zeros((counts.shape[0], cap), np.int64)
    new_sites[: sites.shape[0]] = sites
    new_counts[:, : sites.shape[0]] = counts
    return new_sites, new_counts


@njit
def _advance_bits(raw, base, step, target, pos, cnt, visited, r):
    one = np.uint64(1)
    while step < target:
        word = raw[base + step // 64]
        if (word >> np.uint64(step % 64)) & one:
            pos += 1
        else:
            pos -= 1
        c = cnt[pos] + 1
        cnt[pos] = c
        if c == 1:
            visited[r] = pos
            r += 1
        step += 1
    return pos, r


@njit
def _advance_ids(ids, u, step, target, cnt, visited, r):
    while step < target:
        x = ids[u, step]
        c = cnt[x] + 1
        cnt[x] = c
        if c == 1:
            visited[r] = x
            r += 1
        step += 1
    return r


@njit
def _snapshot(sites, counts, cnt, visited, r, j, tot):
    if tot + r > sites.shape[0]:
        sites, counts = _grow(sites, counts, tot + r)
    for q in range(r):
        counts[j, tot + q] = cnt[visited[q]]
    return sites, counts


@njit
def occupy_bits(raw, nusers, m, stops):
    """Simple +-1 walks driven by raw 64-bit words, ``ceil(m/64)`` per user."""
    k = stops.shape[0]
    nw = (m + 63) // 64
    cnt = np.zeros(2 * m + 1, np.int32)
    visited = np.empty(m + 1, np.int64)
    cap = max(64, nusers * 16)
    sites = np.empty(cap, np.int64)
    counts = np.zeros((k, cap), np.int64)
    offsets = np.zeros(nusers + 1, np.int64)
    tot = 0
    for u in range(nusers):
        pos = m
        r = 0
        step = 0
        for j in range(k):
            pos, r = _advance_bits(raw, u * nw, step, stops[j], pos, cnt, visited, r)
            step = stops[j]
            sites, counts = _snapshot(sites, counts, cnt, visited, r, j, tot)
        for q in range(r):
            sites[tot + q] = visited[q] - m
            cnt[visited[q]] = 0
        tot += r
        offsets[u + 1] = tot
    return sites[:tot].copy(), counts[:, :tot].copy(), offsets


@njit
def occupy_ids(ids, width, stops):
    """Walks given as site ids in ``[0, width)``, one row per user."""
    nusers = ids.shape[0]
    k = stops.shape[0]
    cnt = np.zeros(width, np.int32)
    visited = np.empty(ids.shape[1] + 1, np.int64)
    cap = max(64, nusers * 16)
    sites = np.empty(cap, np.int64)
    counts = np.zeros((k, cap), np.int64)
    offsets = np.zeros(nusers + 1, np.int64)
    tot = 0
    for u in range(nusers):
        r = 0
        step = 0
        for j in range(k):
            r = _advance_ids(ids, u, step, stops[j], cnt, visited, r)
            step = stops[j]
            sites, counts = _snapshot(sites, counts, cnt, visited, r, j, tot)
        for q in range(r):
            sites[tot + q] = visited[q]
            cnt[visited[q]] = 0
        tot += r
        offsets[u + 1] = tot
    return sites[:tot].copy(), counts[:, :tot].copy(), offsets
