"""Estimators used to judge simulation output."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _st

__all__ = [
    "CfEstimate",
    "HillEstimate",
    "KsResult",
    "SlopeFit",
    "empirical_cf",
    "neg_log_cf",
    "hill_tail_index",
    "ks_statistic",
    "ks_distance",
    "loglog_slope",
]


def _as_samples(samples, minimum: int) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < minimum:
        raise ValueError(f"need at least {minimum} samples, got {x.size}")
    if not np.isfinite(x).all():
        raise ValueError("samples must be finite")
    return x


@dataclass(frozen=True)
class CfEstimate:
    thetas: np.ndarray
    re: np.ndarray
    im: np.ndarray
    se: np.ndarray
    se_im: np.ndarray
    count: int


def empirical_cf(samples, thetas, symmetric: bool = False) -> CfEstimate:
    """Sample mean of ``exp(i theta X)`` with analytic standard errors.

    ``se`` is the standard error of the real part (sample standard deviation
    of ``cos(theta X)`` over ``sqrt(count)``).  With ``symmetric=True`` the
    imaginary part is set to zero.
    """
    x = _as_samples(samples, 2)
    th = np.atleast_1d(np.asarray(thetas, dtype=float))
    re = np.empty(th.size)
    im = np.zeros(th.size)
    se = np.empty(th.size)
    se_im = np.zeros(th.size)
    for i, t in enumerate(th):
        c = np.cos(t * x)
        re[i] = c.mean()
        se[i] = c.std(ddof=1) / math.sqrt(x.size)
        if not symmetric:
            s = np.sin(t * x)
            im[i] = s.mean()
            se_im[i] = s.std(ddof=1) / math.sqrt(x.size)
    return CfEstimate(th, re, im, se, se_im, int(x.size))


def neg_log_cf(value, se):
    """``-log value`` and its delta-method standard error; NaN where ``value <= 0``."""
    value = np.asarray(value, dtype=float)
    se = np.asarray(se, dtype=float)
    ok = (value > 0) & (value < 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(ok, -np.log(np.where(ok, value, 1.0)), np.nan)
        err = np.where(ok, se / np.where(ok, value, 1.0), np.nan)
    return out, err


@dataclass(frozen=True)
class HillEstimate:
    alpha: float
    ci95: float
    k: int
    top_fraction: float
    threshold: float

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "ci95": self.ci95, "k": self.k,
                "top_fraction": self.top_fraction, "threshold": self.threshold}


def hill_tail_index(samples, top_fraction: float = 0.05) -> HillEstimate:
    """Hill estimator of the tail index of ``|samples|``.

    Uses the ``k = floor(top_fraction * N)`` largest absolute values above the
    ``(k+1)``-th largest; the interval is ``alpha * 1.96 / sqrt(k)``.
    """
    x = _as_samples(samples, 100)
    if not 0 < top_fraction <= 0.1:
        raise ValueError("top_fraction must be in (0, 0.1]")
    k = int(math.floor(top_fraction * x.size))
    if k < 10:
        raise ValueError(f"too few exceedances ({k}) for a Hill estimate")
    a = np.sort(np.abs(x))[::-1]
    thr = a[k]
    if thr <= 0:
        raise ValueError("threshold order statistic is zero")
    s = float(np.sum(np.log(a[:k] / thr)))
    if s <= 0:
        raise ValueError("tail is degenerate (all top values equal)")
    alpha = k / s
    return HillEstimate(alpha, 1.96 * alpha / math.sqrt(k), k, float(top_fraction), float(thr))


@dataclass(frozen=True)
class KsResult:
    statistic: float
    pvalue: float
    permutations: int


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance ``sup |F_a - F_b|``."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_distance(a, b, permutations: int = 200,
                rng: np.random.Generator | int | None = None) -> KsResult:
    """KS distance with a label-permutation p-value ``(1 + #{D* >= D}) / (1 + P)``."""
    if permutations < 200:
        raise ValueError("at least 200 permutations are required")
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    d = ks_statistic(a, b)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    pooled = np.concatenate([a, b])
    hits = 0
    for _ in range(permutations):
        perm = rng.permutation(pooled)
        if ks_statistic(perm[: a.size], perm[a.size:]) >= d - 1e-12:
            hits += 1
    return KsResult(d, (1 + hits) / (1 + permutations), permutations)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    ci95: float
    r2: float

    def as_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "ci95": self.ci95, "r2": self.r2}


def loglog_slope(xs, ys, ses=None) -> SlopeFit:
    """Least-squares line through ``(log x, log y)``.

    Without ``ses`` this is ordinary least squares and ``ci95`` is the
    Student-t half-width from the residuals.  With ``ses`` (standard errors of
    ``ys``) points are weighted by ``(y / se)**2`` and ``ci95`` is
    ``1.96`` times the slope's standard error under those known variances.
    """
    x = np.asarray(xs, dtype=float).ravel()
    y = np.asarray(ys, dtype=float).ravel()
    if x.size != y.size or x.size < 3:
        raise ValueError("need at least 3 matching points")
    if (x <= 0).any() or (y <= 0).any():
        raise ValueError("log-log fit needs positive values")
    lx, ly = np.log(x), np.log(y)
    if ses is None:
        w = np.ones_like(lx)
    else:
        rel = np.asarray(ses, dtype=float).ravel() / y
        if (rel <= 0).any():
            raise ValueError("standard errors must be positive")
        w = 1.0 / rel ** 2
    sw = w.sum()
    mx, my = (w * lx).sum() / sw, (w * ly).sum() / sw
    sxx = (w * (lx - mx) ** 2).sum()
    if sxx == 0:
        raise ValueError("x values are all equal")
    slope = (w * (lx - mx) * (ly - my)).sum() / sxx
    intercept = my - slope * mx
    resid = ly - (intercept + slope * lx)
    syy = (w * (ly - my) ** 2).sum()
    r2 = 1.0 - (w * resid ** 2).sum() / syy if syy > 0 else 1.0
    if ses is None:
        dof = x.size - 2
        s2 = (resid ** 2).sum() / dof
        ci = float(_st.t.ppf(0.975, dof) * math.sqrt(s2 / sxx))
    else:
        ci = 1.96 / math.sqrt(sxx)
    return SlopeFit(float(slope), float(intercept), ci, float(r2))
