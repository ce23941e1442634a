"""Characteristic functions of the limit process from its local-time representation.

For the limit ``Delta`` of ``G_n`` the finite-dimensional CF has the form

    E exp(i sum_j theta_j Delta(t_j)) = exp(-const * E B),
    B = int |sum_j theta_j S_gamma(L_{t_j}(x))|**alpha dx,

where ``L`` is the local time of the beta-stable Levy motion and ``S_gamma``
an independent symmetric gamma-stable Levy motion, shared across ``x``.
``const`` is never estimated: all checks compare ratios.

Local time is approximated by normalized occupation counts of an internal
walk, ``L_t(i / a_n) = N_{[nt]}(i) * a_n / n`` with ``a_n = n**(1/beta)``, on the
grid of spacing ``1 / a_n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .stable import DoaLaw, ParameterError, SimParams, default_laws, levy_eval_at
from .streams import make_stream
from .walk import OccupationBatch, checkpoint_steps, simulate_walks

__all__ = [
    "LocalTimeField",
    "LimitBSample",
    "LimitCfEstimate",
    "local_time_field",
    "local_time_fields",
    "limit_B_sample",
    "limit_B_values",
    "limit_cf",
    "hurst",
]


@dataclass(frozen=True)
class LocalTimeField:
    """Approximate local time of one walk at the checkpoint times.

    ``values[j, s]`` is ``L_{t_j}`` at grid point ``sites[s] * dx``.  Every
    visited site is kept, including those outside ``[-K, K]``; ``inside``
    marks the truncation window.  Keeping them lets B be evaluated with a
    Levy path that does not depend on ``K``.
    """

    n: int
    times: np.ndarray
    a_n: float
    K: float
    sites: np.ndarray
    values: np.ndarray

    @property
    def dx(self) -> float:
        return 1.0 / self.a_n

    @property
    def grid(self) -> np.ndarray:
        return self.sites * self.dx

    @property
    def inside(self) -> np.ndarray:
        return np.abs(self.grid) <= self.K * (1 + 1e-12)

    def mass(self, j: int = -1) -> float:
        """``dx * sum_i L_{t_j}(x_i)`` over the truncation window."""
        return float(self.dx * self.values[j][self.inside].sum())


def _a_n(beta: float, n: int) -> float:
    return float(n) ** (1.0 / beta)


def _fields(batch: OccupationBatch, beta: float, K: float) -> list[LocalTimeField]:
    a_n = _a_n(beta, batch.n)
    unit = a_n / batch.n
    out = []
    for u in range(batch.users):
        occ = batch.user(u)
        out.append(LocalTimeField(batch.n, batch.times, a_n, float(K), occ.sites,
                                  occ.counts * unit))
    return out


def _check_field_args(beta: float, n: int, K: float):
    if not K > 0:
        raise ParameterError("truncation K must be positive")
    if not 1 < beta <= 2:
        raise ParameterError("beta must be in (1, 2]")
    if _a_n(beta, n) < 2:
        raise ParameterError("n too small: need n**(1/beta) >= 2")


def local_time_fields(beta: float, n: int, times, K: float, count: int,
                      stream: np.random.Generator,
                      step_law: DoaLaw | None = None) -> list[LocalTimeField]:
    """``count`` independent local-time fields from one stream."""
    _check_field_args(beta, n, K)
    if step_law is None:
        step_law = DoaLaw.rademacher() if beta == 2 else DoaLaw.pareto(beta)
    batch = simulate_walks(step_law, n, times, count, stream)
    return _fields(batch, beta, K)


def local_time_field(beta: float, n: int, times, K: float, stream: np.random.Generator,
                     step_law: DoaLaw | None = None) -> LocalTimeField:
    """Local time of one internal walk of ``[n t_max]`` steps."""
    return local_time_fields(beta, n, times, K, 1, stream, step_law)[0]


@dataclass(frozen=True)
class LimitBSample:
    value: float
    thetas: np.ndarray
    K: float
    dx: float


def limit_B_values(params: SimParams, theta_vectors, field: LocalTimeField,
                   stream: np.random.Generator) -> np.ndarray:
    """B for several theta vectors sharing one ``S_gamma`` path.

    The path is evaluated once at the distinct local-time values of all
    visited sites (``L = 0`` maps to 0), then the integrand is summed over
    the truncation window.
    """
    th = np.atleast_2d(np.asarray(theta_vectors, dtype=float))
    if th.shape[1] != field.values.shape[0]:
        raise ParameterError("theta vectors and field times differ in length")
    if field.values.size == 0:
        return np.zeros(th.shape[0])
    path = levy_eval_at(params.gamma, field.values.ravel(), stream)
    s = path.values_at(field.values)[:, field.inside]
    return field.dx * (np.abs(th @ s) ** params.alpha).sum(axis=1)


def limit_B_sample(params: SimParams, thetas, times, field: LocalTimeField,
                   stream: np.random.Generator) -> LimitBSample:
    """One draw of ``B = int |sum_j theta_j S_gamma(L_{t_j}(x))|**alpha dx``."""
    th = np.asarray(thetas, dtype=float).ravel()
    t = np.asarray(times, dtype=float).ravel()
    if th.size != t.size:
        raise ParameterError("thetas and times must have the same length")
    if t.size != field.times.size or not np.allclose(t, field.times):
        raise ParameterError("times do not match the local-time field checkpoints")
    value = float(limit_B_values(params, th[None, :], field, stream)[0])
    return LimitBSample(value, th, field.K, field.dx)


@dataclass(frozen=True)
class LimitCfEstimate:
    """Monte Carlo estimate of ``E B`` per theta vector.

    ``neg_log_cf[v]`` equals ``-log`` of the limit CF up to an unknown
    constant factor.  ``samples[r, v]`` keeps the per-replica B values;
    all vectors share each replica's local time and Levy path.
    """

    theta_vectors: np.ndarray
    times: np.ndarray
    neg_log_cf: np.ndarray
    std_err: np.ndarray
    samples: np.ndarray
    n: int
    K: float

    @property
    def replicas(self) -> int:
        return self.samples.shape[0]


def limit_cf(params: SimParams, theta_vectors, times, replicas: int, n: int,
             K: float = 10.0, root_seed: int = 0, experiment: str = "limit",
             step_law: DoaLaw | None = None, block: int = 64) -> LimitCfEstimate:
    """Estimate ``E B(theta)`` for every theta vector.

    Replicas are processed in blocks of ``block``; block ``b`` draws walks
    then Levy paths from ``make_stream(root_seed, experiment,
    "limit_oracle", n, b)``.
    """
    if replicas < 100:
        raise ParameterError("limit_cf needs at least 100 replicas")
    th = np.atleast_2d(np.asarray(theta_vectors, dtype=float))
    times = np.asarray(times, dtype=float).ravel()
    if th.shape[1] != times.size:
        raise ParameterError("theta vectors must have one entry per time")
    checkpoint_steps(n, times)
    if step_law is None:
        step_law = default_laws(params)["step"]
    out = np.empty((replicas, th.shape[0]))
    for b in range(-(-replicas // block)):
        size = min(block, replicas - b * block)
        rng = make_stream(root_seed, experiment, "limit_oracle", int(n), b)
        fields = local_time_fields(params.beta, n, times, K, size, rng, step_law)
        for i, f in enumerate(fields):
            out[b * block + i] = limit_B_values(params, th, f, rng)
    mean = np.array([math.fsum(col) / replicas for col in out.T])
    se = out.std(axis=0, ddof=1) / math.sqrt(replicas)
    return LimitCfEstimate(th, times, mean, se, out, int(n), float(K))


def hurst(params) -> float:
    """Hurst exponent ``beta~/gamma + (1 - beta~)/alpha`` with ``beta~ = 1 - 1/beta``.

    Accepts a :class:`SimParams`, a mapping or an ``(alpha, beta, gamma)``
    tuple; the parameters are validated either way.
    """
    if not isinstance(params, SimParams):
        if isinstance(params, dict):
            params = SimParams(**params)
        else:
            params = SimParams(*params)
    bt = 1.0 - 1.0 / params.beta
    return bt / params.gamma + (1.0 - bt) / params.alpha
