"""Numerical checks of the quantities the convergence argument relies on.

* ``compute_Bn`` / ``bn_values``: ``B_n = sum_x |r_n^-1 sum_j theta_j Nt_j(x)|**alpha``
  where ``Nt_j(x) = Y_1 + ... + Y_{N_{[n t_j]}(x)}``.
* ``substitution_gap``: how far the scenery CF ``lambda`` is from its stable
  approximation ``lambda_bar`` on the arguments a simulation actually feeds it.
* ``check_cond_moments``, ``check_cf_condition``,
  ``check_uniform_integrability``: three-valued verdicts with recorded
  thresholds.
* ``enumerate_cf_exact``: exact CF of ``G_n`` on tiny finite instances.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .stable import DoaLaw, ParameterError, SimParams, lambda_bar
from .stats import loglog_slope
from .walk import RealizationBatch, UserRealization, checkpoint_steps

__all__ = [
    "SATISFIED",
    "VIOLATED",
    "INCONCLUSIVE",
    "NOT_APPLICABLE",
    "BnSample",
    "CheckResult",
    "ConditionReport",
    "EnumerationTooLarge",
    "compute_Bn",
    "bn_values",
    "substitution_gap",
    "check_cond_moments",
    "check_cf_condition",
    "check_uniform_integrability",
    "check_bn_stabilization",
    "check_gap_decay",
    "enumerate_cf_exact",
]

SATISFIED = "satisfied"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"
NOT_APPLICABLE = "not applicable"

DEFAULT_K_GRID = (1, 4, 16, 64, 256, 1024)


class EnumerationTooLarge(ParameterError):
    pass


# ---------------------------------------------------------------------------
# B_n


@dataclass(frozen=True)
class BnSample:
    value: float
    n: int
    thetas: np.ndarray
    times: np.ndarray


def _theta_for(thetas, k: int) -> np.ndarray:
    th = np.asarray(thetas, dtype=float).ravel()
    if th.size != k:
        raise ParameterError(f"expected {k} thetas (one per checkpoint), got {th.size}")
    return th


def compute_Bn(user: UserRealization, params: SimParams, thetas) -> BnSample:
    """``B_n`` of one walker, from the same draws that produced its ``Z``."""
    occ = user.occupation
    th = _theta_for(thetas, occ.stops.size)
    u = (th @ user.weights()) / params.r_n(occ.n)
    value = float(np.sum(np.abs(u) ** params.alpha))
    return BnSample(value, occ.n, th, occ.times)


def bn_values(batch: RealizationBatch, thetas) -> np.ndarray:
    """``B_n`` of every walker in a batch."""
    occ = batch.occupation
    th = _theta_for(thetas, occ.stops.size)
    u = (th @ batch.weights) / batch.params.r_n(occ.n)
    return np.bincount(occ.owner(), weights=np.abs(u) ** batch.params.alpha,
                       minlength=batch.users)


def substitution_gap(batch: RealizationBatch, xi_law: DoaLaw, c_n: int, thetas) -> np.ndarray:
    """Per walker, ``c_n * sum_x |lambda(v_x) - lambda_bar(v_x)|``.

    ``v_x = c_n**(-1/alpha) r_n**-1 sum_j theta_j Nt_j(x)`` are the arguments at
    which the aggregate CF evaluates ``lambda``.  ``lambda_bar`` carries the
    norming of ``xi_law`` so both functions agree to first order at 0.
    """
    occ = batch.occupation
    th = _theta_for(thetas, occ.stops.size)
    alpha = batch.params.alpha
    v = (th @ batch.weights) / (c_n ** (1.0 / alpha) * batch.params.r_n(occ.n))
    gap = np.abs(xi_law.cf(v) - lambda_bar(v, alpha, xi_law.norming))
    return c_n * np.bincount(occ.owner(), weights=gap, minlength=batch.users)


# ---------------------------------------------------------------------------
# reports


@dataclass
class CheckResult:
    criterion: str
    estimate: float | None
    ci95: float | None
    threshold: str
    verdict: str
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


@dataclass
class ConditionReport:
    params: dict
    checks: list = field(default_factory=list)

    def add(self, result: CheckResult) -> CheckResult:
        self.checks.append(result)
        return result

    def __getitem__(self, criterion: str) -> CheckResult:
        for c in self.checks:
            if c.criterion == criterion:
                return c
        raise KeyError(criterion)

    @property
    def failed(self) -> bool:
        return any(c.verdict == VIOLATED for c in self.checks)

    def as_dict(self) -> dict:
        return {"params": _jsonable(self.params),
                "checks": [c.as_dict() for c in self.checks]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.as_dict(), **kw)


def _band_verdict(slope: float, ci: float, band: float) -> str:
    if abs(slope) + ci <= band:
        return SATISFIED
    if abs(slope) - ci > band:
        return VIOLATED
    return INCONCLUSIVE


def _upper_verdict(slope: float, ci: float, limit: float) -> str:
    if slope + ci <= limit:
        return SATISFIED
    if slope - ci > limit:
        return VIOLATED
    return INCONCLUSIVE


# ---------------------------------------------------------------------------
# moment condition on the strategy


def check_cond_moments(params: SimParams, y_law: DoaLaw, k_grid=DEFAULT_K_GRID,
                       replicas: int = 10_000, stream: np.random.Generator | None = None,
                       chunk: int = 2048) -> CheckResult:
    """Evidence for ``sup_k E|(Y_1 + ... + Y_k) / k**(1/gamma)|**(alpha kappa) < inf``.

    One strategy sequence per replica supplies every ``k`` of the grid via
    prefix sums.  The verdict compares the log-log slope of the estimates
    against ``0.05``: satisfied if ``slope + ci <= 0.05``, violated if
    ``slope - ci > 0.05``.
    """
    p = params.alpha * params.kappa
    if p >= params.gamma:
        raise ParameterError(
            f"alpha*kappa = {p:g} >= gamma = {params.gamma:g}: the moment of order "
            "alpha*kappa of a gamma-stable limit is infinite")
    ks = np.asarray(sorted(set(int(k) for k in k_grid)), dtype=np.int64)
    if ks.size < 3 or ks[0] < 1:
        raise ParameterError("k_grid needs at least 3 positive values")
    if replicas < 2:
        raise ParameterError("replicas must be >= 2")
    stream = stream if stream is not None else np.random.default_rng()
    kmax = int(ks[-1])
    sums = np.zeros(ks.size)
    sq = np.zeros(ks.size)
    norm = ks.astype(float) ** (1.0 / params.gamma)
    done = 0
    while done < replicas:
        size = min(chunk, replicas - done)
        y = y_law.sample(size * kmax, stream).astype(float).reshape(size, kmax)
        s = np.cumsum(y, axis=1)[:, ks - 1]
        m = np.abs(s / norm) ** p
        sums += m.sum(axis=0)
        sq += (m ** 2).sum(axis=0)
        done += size
    mean = sums / replicas
    var = np.maximum(sq / replicas - mean ** 2, 0.0) * replicas / (replicas - 1)
    se = np.sqrt(var / replicas)
    details = {"k_grid": ks.tolist(), "estimates": mean.tolist(), "std_err": se.tolist(),
               "max": float(mean.max()), "min": float(mean.min()),
               "order": p, "replicas": int(replicas)}
    if (mean <= 0).any():
        return CheckResult("cond_moments", None, None, "slope <= 0.05", INCONCLUSIVE, details)
    fit = loglog_slope(ks, mean, np.where(se > 0, se, mean * 1e-12))
    details["fit"] = fit.as_dict()
    return CheckResult("cond_moments", fit.slope, fit.ci95, "slope <= 0.05",
                       _upper_verdict(fit.slope, fit.ci95, 0.05), details)


# ---------------------------------------------------------------------------
# CF criterion on the strategy law


def check_cf_condition(phi: DoaLaw, params: SimParams, r: float = 1.0,
                       theta_max: float = 200.0, points: int = 200_001) -> list[CheckResult]:
    """Check ``|phi'(theta)| <= K |theta|**(gamma-1)`` near 0 and finiteness of
    ``int_r^inf |phi'(theta)| / theta**(alpha kappa) dtheta``.

    Near zero the exponent is a least-squares fit of ``log|phi'|`` on
    ``log theta`` for ``theta`` in ``[1e-4, 1e-2]``: satisfied if it is at
    least ``gamma - 1.1``, violated below ``gamma - 1.25``.  The integral is
    a trapezoid rule on ``[r, theta_max]`` plus the tail bound
    ``sup|phi'| * theta_max**(1 - alpha kappa) / (alpha kappa - 1)`` with the
    supremum taken over the grid.  Both checks need ``alpha > 1``;
    otherwise they are reported as not applicable.
    """
    names = ("cf_near_zero", "cf_tail_integral")
    if params.alpha <= 1:
        why = {"reason": "criterion requires alpha > 1", "alpha": params.alpha}
        return [CheckResult(nm, None, None, "alpha > 1", NOT_APPLICABLE, dict(why))
                for nm in names]
    if not 0 < r < theta_max:
        raise ParameterError("need 0 < r < theta_max")
    g1 = params.gamma - 1.0
    th0 = np.logspace(-4, -2, 21)
    d0 = np.abs(phi.cf_derivative(th0))
    if (d0 <= 0).any():
        near = CheckResult(names[0], None, None, f"exponent >= {g1 - 0.1:g}", INCONCLUSIVE,
                           {"reason": "derivative vanishes on the fit window"})
    else:
        fit = loglog_slope(th0, d0)
        if fit.slope >= g1 - 0.1:
            verdict = SATISFIED
        elif fit.slope < g1 - 0.25:
            verdict = VIOLATED
        else:
            verdict = INCONCLUSIVE
        near = CheckResult(names[0], fit.slope, fit.ci95, f"exponent >= {g1 - 0.1:g}",
                           verdict, {"target": g1, "window": [1e-4, 1e-2], "fit": fit.as_dict()})
    p = params.alpha * params.kappa
    grid = np.linspace(r, theta_max, points)
    d = np.abs(phi.cf_derivative(grid))
    body = float(trapezoid(d / grid ** p, grid))
    sup = float(d.max())
    tail = sup * theta_max ** (1.0 - p) / (p - 1.0)
    ok = math.isfinite(body) and math.isfinite(tail)
    total = body + tail
    tail_cf = CheckResult(names[1], body, tail, "finite", SATISFIED if ok else VIOLATED,
                          {"r": r, "theta_max": theta_max, "order": p,
                           "tail_bound": tail, "upper_bound": total})
    return [near, tail_cf]


# ---------------------------------------------------------------------------
# uniform integrability of B_n


def check_uniform_integrability(params: SimParams, bn_samples: dict, kappa: float | None = None,
                                band: float = 0.05) -> CheckResult:
    """Evidence that ``E B_n**kappa`` stays bounded in ``n``.

    ``bn_samples`` maps ``n`` to an array of ``B_n`` draws (at least three
    ``n`` values, 1000 draws each).  The verdict is satisfied if the log-log
    slope lies in ``[-band, band]`` including its 95% interval, violated if
    the interval lies entirely outside that band.
    """
    kappa = params.kappa if kappa is None else float(kappa)
    ns = sorted(bn_samples)
    if len(ns) < 3:
        raise ParameterError("need B_n samples for at least 3 values of n")
    means, ses = [], []
    for n in ns:
        b = np.asarray(bn_samples[n], dtype=float)
        if b.size < 1000:
            raise ParameterError(f"need at least 1000 B_n draws at n={n}, got {b.size}")
        if (b < 0).any() or not np.isfinite(b).all():
            raise ParameterError("B_n draws must be finite and nonnegative")
        m = b ** kappa
        means.append(math.fsum(m) / m.size)
        ses.append(m.std(ddof=1) / math.sqrt(m.size))
    details = {"n_grid": ns, "kappa": kappa, "estimates": means, "std_err": ses,
               "band": band}
    if max(means) == 0:
        details["reason"] = "B_n vanishes identically"
        return CheckResult("uniform_integrability", 0.0, 0.0,
                           f"|slope| <= {band:g}", SATISFIED, details)
    if min(means) <= 0:
        return CheckResult("uniform_integrability", None, None,
                           f"|slope| <= {band:g}", INCONCLUSIVE, details)
    fit = loglog_slope(ns, means, np.maximum(ses, 1e-300))
    details["fit"] = fit.as_dict()
    return CheckResult("uniform_integrability", fit.slope, fit.ci95, f"|slope| <= {band:g}",
                       _band_verdict(fit.slope, fit.ci95, band), details)


# ---------------------------------------------------------------------------
# exact enumeration


def _support(law: DoaLaw, what: str) -> tuple[np.ndarray, np.ndarray]:
    if not law.finite:
        raise ParameterError(f"{what} law {law.kind} does not have finite support")
    return np.asarray(law.values, dtype=float), np.asarray(law.probs, dtype=float)


def enumerate_cf_exact(params: SimParams, n: int, c_n: int, step_law: DoaLaw,
                       xi_law: DoaLaw, y_law: DoaLaw, thetas, times,
                       budget: int = 10 ** 7) -> np.ndarray:
    """Exact ``E exp(i sum_j theta_j G_n(t_j))`` for finite-support laws.

    Sums over every step sequence and every strategy sequence up to the
    path's largest visit count, applies ``lambda`` (the scenery CF) per
    visited site and raises the single-walker expectation to ``c_n``.  The
    scenery itself is never enumerated.  ``thetas`` is one vector or a
    ``(V, k)`` array; the result has one complex value per vector.
    """
    if not 1 <= n <= 8:
        raise ParameterError("exact enumeration supports 1 <= n <= 8")
    if c_n < 1:
        raise ParameterError("c_n must be >= 1")
    stops = checkpoint_steps(n, times)
    k = stops.size
    th = np.atleast_2d(np.asarray(thetas, dtype=float))
    if th.shape[1] != k:
        raise ParameterError("theta vectors must have one entry per time")
    sv, sp = _support(step_law, "step")
    yv, yp = _support(y_law, "strategy")
    m = int(stops[-1])
    npaths = sv.size ** m
    if npaths > budget:
        raise EnumerationTooLarge(f"{npaths} step paths exceed the budget of {budget}")

    paths = []
    total = 0
    for idx in itertools.product(range(sv.size), repeat=m):
        pos = np.cumsum(sv[list(idx)]) if m else np.zeros(0)
        prob = float(np.prod(sp[list(idx)]))
        if prob == 0.0:
            continue
        sites, inv = np.unique(pos, return_inverse=True)
        counts = np.zeros((k, sites.size), dtype=np.int64)
        for j, s in enumerate(stops):
            counts[j] = np.bincount(inv[:s], minlength=sites.size)
        mc = int(counts[-1].max()) if sites.size else 0
        total += yv.size ** mc
        if total > budget:
            raise EnumerationTooLarge(
                f"enumeration size exceeds the budget of {budget} (paths x strategies)")
        paths.append((prob, counts, mc))

    scale = c_n ** (-1.0 / params.alpha) / params.r_n(n)
    acc = np.zeros(th.shape[0])
    for prob, counts, mc in paths:
        combos = np.array(list(itertools.product(range(yv.size), repeat=mc)),
                          dtype=np.int64).reshape(-1, mc)
        wy = np.prod(yp[combos], axis=1) if mc else np.ones(1)
        prefix = np.zeros((combos.shape[0], mc + 1))
        if mc:
            prefix[:, 1:] = np.cumsum(yv[combos], axis=1)
        # weights[c, j, s] = Y_1 + ... + Y_{N_j(s)} under strategy combo c
        weights = prefix[:, counts]
        for v, t in enumerate(th):
            u = scale * np.einsum("j,cjs->cs", t, weights)
            lam = np.prod(xi_law.cf(u), axis=1)
            acc[v] += prob * math.fsum(wy * lam)
    return (acc ** c_n).astype(complex)


# ---------------------------------------------------------------------------
# convergence trends over n


def _means_by_n(samples: dict, what: str, power: float = 1.0):
    ns = sorted(samples)
    means, ses = [], []
    for n in ns:
        x = np.asarray(samples[n], dtype=float) ** power
        if x.size < 2:
            raise ParameterError(f"need at least 2 {what} draws at n={n}")
        means.append(math.fsum(x) / x.size)
        ses.append(float(x.std(ddof=1) / math.sqrt(x.size)))
    return ns, means, ses


def check_bn_stabilization(bn_samples: dict, tolerance: float = 0.10) -> CheckResult:
    """Relative difference of ``E B_n`` between the two largest ``n``.

    Satisfied if it is at most ``tolerance``; the ``ci95`` field carries the
    delta-method half-width of the relative difference for reference.
    """
    ns, means, ses = _means_by_n(bn_samples, "B_n")
    if len(ns) < 2:
        raise ParameterError("need B_n samples for at least 2 values of n")
    a, b = means[-2], means[-1]
    details = {"n_grid": ns, "estimates": means, "std_err": ses, "tolerance": tolerance}
    if b <= 0:
        return CheckResult("bn_stabilization", None, None, f"<= {tolerance:g}",
                           INCONCLUSIVE, details)
    rel = abs(a - b) / b
    ci = 1.96 * math.hypot(ses[-2] / b, a * ses[-1] / b ** 2)
    return CheckResult("bn_stabilization", rel, ci, f"<= {tolerance:g}",
                       SATISFIED if rel <= tolerance else VIOLATED, details)


def check_gap_decay(gaps: dict) -> CheckResult:
    """Decreasing trend of the substitution gap in ``n``.

    Satisfied if the weighted log-log slope and its 95% interval are below
    zero, violated if the interval lies above zero.
    """
    ns, means, ses = _means_by_n(gaps, "gap")
    if len(ns) < 3:
        raise ParameterError("need gap samples for at least 3 values of n")
    details = {"n_grid": ns, "estimates": means, "std_err": ses}
    if min(means) <= 0:
        return CheckResult("substitution_gap_decay", None, None, "slope + ci < 0",
                           INCONCLUSIVE, details)
    fit = loglog_slope(ns, means, np.maximum(ses, 1e-300))
    details["fit"] = fit.as_dict()
    if fit.slope + fit.ci95 < 0:
        verdict = SATISFIED
    elif fit.slope - fit.ci95 > 0:
        verdict = VIOLATED
    else:
        verdict = INCONCLUSIVE
    return CheckResult("substitution_gap_decay", fit.slope, fit.ci95, "slope + ci < 0",
                       verdict, details)
