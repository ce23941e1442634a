"""Walker trajectories, occupation fields, and the doubly random scenery sums.

A walker's reward after ``m`` steps is

    Z(m) = sum_x (Y_1 + ... + Y_{N_m(x)}) * xi_x

where ``N_m(x)`` counts visits of ``S_1..S_m`` to ``x``.  Rescaling by
``r_n = n**r_exponent`` gives ``D_n(t) = Z([n t]) / r_n`` and the aggregate
over ``c_n`` independent walkers is ``G_n(t) = c_n**(-1/alpha) sum_i D_n^(i)(t)``.

Everything here works on batches of walkers at once; the single-walker
functions are thin wrappers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .stable import DoaLaw, ParameterError, SimParams, default_laws
from .streams import make_stream

__all__ = [
    "checkpoint_steps",
    "OccupationField",
    "OccupationBatch",
    "UserRealization",
    "RealizationBatch",
    "AggregateSample",
    "AggregateRun",
    "simulate_walk",
    "simulate_walks",
    "scenery_sum",
    "realize_user",
    "realize_users",
    "aggregate_users",
    "simulate_aggregate",
    "iter_user_batches",
    "resolve_laws",
]

# dense counting window limit (sites) before falling back to compression
_DENSE_LIMIT = 1 << 24


def checkpoint_steps(n: int, times) -> np.ndarray:
    """``[n t]`` for each time, validated to be sorted and nonnegative."""
    t = np.asarray(times, dtype=float).ravel()
    if t.size == 0:
        raise ParameterError("at least one time is required")
    if (t < 0).any() or not np.isfinite(t).all():
        raise ParameterError("times must be finite and nonnegative")
    if (np.diff(t) < 0).any():
        raise ParameterError("times must be sorted")
    # the small slack absorbs representation error in products like 10 * 0.3
    return np.floor(n * t + 1e-9).astype(np.int64)


# ---------------------------------------------------------------------------
# occupation


@dataclass(frozen=True)
class OccupationField:
    """Visit counts of one walk at each checkpoint.

    ``counts[j, i]`` is ``N_{stops[j]}(sites[i])``; sites are listed in
    first-visit order and every listed site is visited by the last checkpoint.
    """

    n: int
    times: np.ndarray
    stops: np.ndarray
    sites: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_path(cls, path, stops, n: int | None = None, times=None) -> "OccupationField":
        """Build the field of an explicit path ``S_1, S_2, ...`` (``S_0`` excluded)."""
        path = [int(x) for x in path]
        stops = np.asarray(stops, dtype=np.int64)
        if len(stops) and stops[-1] > len(path):
            raise ParameterError("checkpoint beyond the end of the path")
        order: list[int] = []
        seen: dict[int, int] = {}
        for x in path[: int(stops[-1])]:
            if x not in seen:
                seen[x] = len(order)
                order.append(x)
        counts = np.zeros((len(stops), len(order)), dtype=np.int64)
        for j, s in enumerate(stops):
            for x in path[: int(s)]:
                counts[j, seen[x]] += 1
        n = int(stops[-1]) if n is None else n
        times = stops / max(n, 1) if times is None else np.asarray(times, dtype=float)
        return cls(n, np.asarray(times, dtype=float), stops, np.array(order, dtype=np.int64), counts)

    @property
    def range_(self) -> int:
        return int(self.sites.size)

    @property
    def max_count(self) -> int:
        return int(self.counts[-1].max()) if self.sites.size else 0

    def counts_at(self, j: int) -> dict[int, int]:
        row = self.counts[j]
        return {int(x): int(c) for x, c in zip(self.sites, row) if c > 0}


@dataclass(frozen=True)
class OccupationBatch:
    """Occupation fields of many walkers stored back to back.

    Sites of walker ``u`` occupy columns ``offsets[u]:offsets[u+1]``.
    """

    n: int
    times: np.ndarray
    stops: np.ndarray
    sites: np.ndarray
    counts: np.ndarray
    offsets: np.ndarray

    @property
    def users(self) -> int:
        return self.offsets.size - 1

    def owner(self) -> np.ndarray:
        return np.repeat(np.arange(self.users), np.diff(self.offsets))

    def ranges(self, j: int = -1) -> np.ndarray:
        """Number of distinct sites visited by each walker up to checkpoint ``j``."""
        visited = (self.counts[j] > 0).astype(np.int64)
        return np.bincount(self.owner(), weights=visited, minlength=self.users).astype(np.int64)

    def max_counts(self) -> np.ndarray:
        out = np.zeros(self.users, dtype=np.int64)
        if self.sites.size:
            np.maximum.at(out, self.owner(), self.counts[-1])
        return out

    def user(self, u: int) -> OccupationField:
        a, b = self.offsets[u], self.offsets[u + 1]
        return OccupationField(self.n, self.times, self.stops,
                               self.sites[a:b], self.counts[:, a:b])


def _occupy(step_law: DoaLaw, stops: np.ndarray, users: int,
            rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = int(stops[-1])
    if step_law.kind == "rademacher":
        nw = (m + 63) // 64
        raw = rng.bit_generator.random_raw(users * nw)
        return _kernels.occupy_bits(raw, users, m, stops)
    if not step_law.integer_valued or step_law.kind == "constant":
        raise ParameterError(f"{step_law.kind} is not a symmetric integer step law")
    steps = step_law.sample(users * m, rng).reshape(users, m)
    pos = np.cumsum(steps, axis=1)
    smax = step_law.max_abs
    if 2 * m * smax + 1 <= _DENSE_LIMIT:
        shift = int(m * smax)
        site_ids, counts, offsets = _kernels.occupy_ids(pos + shift, 2 * shift + 1, stops)
        return site_ids - shift, counts, offsets
    # heavy-tailed steps: compress (user, position) pairs to dense ids
    lo = pos.min(initial=0)
    span = int(pos.max(initial=0) - lo) + 1
    keys = (pos - lo) + span * np.arange(users)[:, None]
    uniq, inv = np.unique(keys, return_inverse=True)
    ids, counts, offsets = _kernels.occupy_ids(inv.reshape(users, m), uniq.size, stops)
    return (uniq[ids] % span) + lo, counts, offsets


def simulate_walks(step_law: DoaLaw, n: int, times, count: int,
                   stream: np.random.Generator) -> OccupationBatch:
    """Occupation fields of ``count`` independent walks, checkpointed at ``[n t_j]``."""
    n = int(n)
    if n < 1:
        raise ParameterError("n must be >= 1")
    stops = checkpoint_steps(n, times)
    times = np.asarray(times, dtype=float).ravel()
    if count < 0:
        raise ParameterError("count must be >= 0")
    if stops[-1] == 0 or count == 0:
        empty = np.zeros(0, dtype=np.int64)
        return OccupationBatch(n, times, stops, empty, np.zeros((stops.size, 0), np.int64),
                               np.zeros(count + 1, dtype=np.int64))
    sites, counts, offsets = _occupy(step_law, stops, int(count), stream)
    return OccupationBatch(n, times, stops, sites, counts, offsets)


def simulate_walk(step_law: DoaLaw, n: int, times, stream: np.random.Generator) -> OccupationField:
    """Occupation field of one walk of ``[n t_max]`` steps."""
    return simulate_walks(step_law, n, times, 1, stream).user(0)


# ---------------------------------------------------------------------------
# scenery and strategy


def scenery_sum(occupation: OccupationField, prefix, xi) -> np.ndarray:
    """``sum_x prefix[N_j(x)] * xi_x`` at every checkpoint.

    ``prefix[m]`` is ``Y_1 + ... + Y_m`` (``prefix[0] = 0``) and ``xi`` is
    aligned with ``occupation.sites`` (or a mapping site -> value).
    """
    prefix = np.asarray(prefix)
    if isinstance(xi, dict):
        xi = np.array([xi[int(s)] for s in occupation.sites])
    xi = np.asarray(xi)
    return (prefix[occupation.counts] * xi).sum(axis=1)


@dataclass(frozen=True)
class UserRealization:
    occupation: OccupationField
    strategy_prefix: np.ndarray
    scenery: np.ndarray
    z_values: np.ndarray

    @property
    def scenery_map(self) -> dict[int, float]:
        return {int(s): v.item() for s, v in zip(self.occupation.sites, self.scenery)}

    def weights(self) -> np.ndarray:
        """``(k, R)`` weighted counts ``Y_1 + ... + Y_{N_j(x)}``."""
        return self.strategy_prefix[self.occupation.counts]


@dataclass(frozen=True)
class RealizationBatch:
    """Scenery, strategies and rewards of every walker in an occupation batch.

    ``prefix`` holds one block ``[0, P_1, ..., P_M]`` per walker starting at
    ``prefix_offsets[u]``; ``weights[j, s]`` is the prefix sum at the visit
    count of site ``s`` at checkpoint ``j``.
    """

    params: SimParams
    occupation: OccupationBatch
    xi: np.ndarray
    prefix: np.ndarray
    prefix_offsets: np.ndarray
    weights: np.ndarray
    z: np.ndarray

    @property
    def users(self) -> int:
        return self.occupation.users

    def d_values(self) -> np.ndarray:
        return self.z / self.params.r_n(self.occupation.n)

    def user(self, u: int) -> UserRealization:
        occ = self.occupation
        a, b = occ.offsets[u], occ.offsets[u + 1]
        pa, pb = self.prefix_offsets[u], self.prefix_offsets[u + 1]
        return UserRealization(occ.user(u), self.prefix[pa:pb], self.xi[a:b], self.z[u])


def realize_users(params: SimParams, xi_law: DoaLaw, y_law: DoaLaw,
                  occupation: OccupationBatch, stream: np.random.Generator) -> RealizationBatch:
    """Draw scenery for visited sites and strategies up to each walker's max visit count."""
    occ = occupation
    users = occ.users
    xi = xi_law.sample(occ.sites.size, stream).astype(float)
    mc = occ.max_counts()
    y = y_law.sample(int(mc.sum()), stream).astype(float)
    sizes = mc + 1
    poff = np.zeros(users + 1, dtype=np.int64)
    np.cumsum(sizes, out=poff[1:])
    # blocks [0, Y_1, ..., Y_M] then segmented cumsum
    block_start = poff[:-1]
    is_start = np.zeros(poff[-1], dtype=bool)
    is_start[block_start] = True
    filled = np.zeros(poff[-1])
    filled[~is_start] = y
    total = np.cumsum(filled)
    prefix = total - np.repeat(total[block_start], sizes)
    owner = occ.owner()
    weights = prefix[poff[:-1][owner][None, :] + occ.counts]
    z = np.empty((users, occ.stops.size))
    for j in range(occ.stops.size):
        z[:, j] = np.bincount(owner, weights=weights[j] * xi, minlength=users)
    return RealizationBatch(params, occ, xi, prefix, poff, weights, z)


def realize_user(params: SimParams, xi_law: DoaLaw, y_law: DoaLaw,
                 occupation: OccupationField, stream: np.random.Generator) -> UserRealization:
    batch = OccupationBatch(occupation.n, occupation.times, occupation.stops,
                            occupation.sites, occupation.counts,
                            np.array([0, occupation.sites.size], dtype=np.int64))
    return realize_users(params, xi_law, y_law, batch, stream).user(0)


# ---------------------------------------------------------------------------
# aggregation


def resolve_laws(params: SimParams, laws=None, strict: bool = True) -> dict[str, DoaLaw]:
    """Fill in default laws and check each against its target index.

    ``strict=False`` skips the index check; finite-``n`` experiments such as
    exact enumeration with two-point laws everywhere need that.
    """
    out = default_laws(params)
    for key, law in (laws or {}).items():
        if key not in out:
            raise ParameterError(f"unknown law slot {key!r}; expected step, xi, y")
        out[key] = DoaLaw.from_spec(law)
    want = {"step": params.beta, "xi": params.alpha, "y": params.gamma}
    for key, law in out.items():
        if not strict or (key == "y" and law.kind == "constant"):
            continue
        if law.target_index is None or abs(law.target_index - want[key]) > 1e-12:
            raise ParameterError(
                f"{key} law {law.kind} attracts to index {law.target_index}, "
                f"expected {want[key]}")
    if out["step"].kind == "gaussian" or out["xi"].kind == "constant":
        raise ParameterError("steps must be integer-valued and scenery nondegenerate")
    return out


@dataclass(frozen=True)
class AggregateSample:
    g_values: np.ndarray
    n: int
    c_n: int
    params: SimParams
    d_values: np.ndarray


def _fsum_rows(z: np.ndarray) -> np.ndarray:
    # z has shape (replicas, users, k); order-fixed compensated sum over users
    out = np.empty((z.shape[0], z.shape[2]))
    for r in range(z.shape[0]):
        for j in range(z.shape[2]):
            out[r, j] = math.fsum(z[r, :, j])
    return out


def aggregate_users(params: SimParams, n: int, c_n: int, times, laws,
                    stream: np.random.Generator, strict: bool = True) -> AggregateSample:
    """One draw of ``G_n(t_j)`` from ``c_n`` independent walkers."""
    if c_n < 1:
        raise ParameterError("c_n must be >= 1")
    laws = resolve_laws(params, laws, strict)
    occ = simulate_walks(laws["step"], n, times, c_n, stream)
    real = realize_users(params, laws["xi"], laws["y"], occ, stream)
    d = real.d_values()
    g = _fsum_rows(real.z[None])[0] / (c_n ** (1.0 / params.alpha) * params.r_n(n))
    return AggregateSample(g, int(n), int(c_n), params, d)


@dataclass(frozen=True)
class AggregateRun:
    """Many replicas of ``G_n`` at fixed ``n``.

    ``cond_cf[r, v]`` is the exact conditional characteristic function of
    ``sum_j theta_v[j] G_n(t_j)`` given replica ``r``'s walks and strategies,
    with the scenery integrated out.  Its replica mean is an unbiased,
    lower-variance estimate of the CF of ``G_n``.
    """

    params: SimParams
    n: int
    c_n: int
    times: np.ndarray
    g: np.ndarray
    theta_vectors: np.ndarray
    cond_cf: np.ndarray

    @property
    def replicas(self) -> int:
        return self.g.shape[0]


def _block_size(c_n: int, m: int) -> int:
    return max(1, (1 << 20) // max(1, c_n * max(m, 1)))


def _conditional_cf(real: RealizationBatch, xi_law: DoaLaw, c_n: int,
                    thetas: np.ndarray, replicas: int) -> np.ndarray:
    occ = real.occupation
    scale = c_n ** (-1.0 / real.params.alpha) / real.params.r_n(occ.n)
    rep = occ.owner() // c_n
    out = np.empty((replicas, thetas.shape[0]))
    with np.errstate(divide="ignore"):
        for v, th in enumerate(thetas):
            lam = xi_law.cf(scale * (th @ real.weights))
            logs = np.bincount(rep, weights=np.log(np.abs(lam)), minlength=replicas)
            neg = np.bincount(rep, weights=(lam < 0).astype(float), minlength=replicas)
            out[:, v] = np.where(neg % 2 == 1, -1.0, 1.0) * np.exp(logs)
    return out


def simulate_aggregate(params: SimParams, n: int, c_n: int, times, replicas: int,
                       root_seed: int, laws=None, theta_vectors=None,
                       experiment: str = "simulate", threads: int = 1,
                       strict: bool = True) -> AggregateRun:
    """Simulate ``replicas`` independent draws of ``(G_n(t_1), ..., G_n(t_k))``.

    Replicas are grouped in blocks whose size depends only on ``n``, ``c_n``
    and ``times``; block ``b`` uses ``make_stream(root_seed, experiment,
    "walk_scenery", n, b)``.  Results are therefore identical for any
    ``threads``.
    """
    if c_n < 1:
        raise ParameterError("c_n must be >= 1")
    if replicas < 0:
        raise ParameterError("replicas must be >= 0")
    laws = resolve_laws(params, laws, strict)
    times = np.asarray(times, dtype=float).ravel()
    stops = checkpoint_steps(n, times)
    k = times.size
    thetas = np.zeros((0, k)) if theta_vectors is None else np.atleast_2d(
        np.asarray(theta_vectors, dtype=float))
    if thetas.shape[1] != k:
        raise ParameterError("theta vectors must have one entry per time")
    bsize = _block_size(c_n, int(stops[-1]))
    nblocks = -(-replicas // bsize)
    norm = c_n ** (1.0 / params.alpha) * params.r_n(n)

    def run_block(b):
        nrep = min(bsize, replicas - b * bsize)
        rng = make_stream(root_seed, experiment, "walk_scenery", int(n), b)
        occ = simulate_walks(laws["step"], n, times, nrep * c_n, rng)
        real = realize_users(params, laws["xi"], laws["y"], occ, rng)
        g = _fsum_rows(real.z.reshape(nrep, c_n, k)) / norm
        cf = (_conditional_cf(real, laws["xi"], c_n, thetas, nrep)
              if thetas.shape[0] else np.zeros((nrep, 0)))
        return g, cf

    if threads > 1 and nblocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_block, range(nblocks)))
    else:
        parts = [run_block(b) for b in range(nblocks)]
    g = np.concatenate([p[0] for p in parts]) if parts else np.zeros((0, k))
    cf = np.concatenate([p[1] for p in parts]) if parts else np.zeros((0, thetas.shape[0]))
    return AggregateRun(params, int(n), int(c_n), times, g, thetas, cf)


def iter_user_batches(params: SimParams, n: int, times, count: int, root_seed: int,
                      laws=None, experiment: str = "users", tag: str = "walk_scenery",
                      strict: bool = True):
    """Yield :class:`RealizationBatch` objects covering ``count`` single walkers.

    Block ``b`` uses ``make_stream(root_seed, experiment, tag, n, b)``.
    """
    laws = resolve_laws(params, laws, strict)
    stops = checkpoint_steps(n, times)
    bsize = _block_size(1, int(stops[-1]))
    for b in range(-(-count // bsize)):
        size = min(bsize, count - b * bsize)
        rng = make_stream(root_seed, experiment, tag, int(n), b)
        occ = simulate_walks(laws["step"], n, times, size, rng)
        yield realize_users(params, laws["xi"], laws["y"], occ, rng)
