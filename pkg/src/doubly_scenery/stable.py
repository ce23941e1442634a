"""Heavy-tailed randomness: stable samplers, domain-of-attraction laws and
their characteristic functions, and a symmetric stable Levy motion evaluated
at arbitrary time points.

CF convention throughout: a symmetric stable law of index ``a`` and scale
``s`` has characteristic function ``exp(-s**a * |theta|**a)``.  For ``a = 2``
this is a Gaussian of variance ``2 s**2``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import special, stats

__all__ = [
    "ParameterError",
    "UnsupportedLawError",
    "SimParams",
    "StableLaw",
    "DoaLaw",
    "LevyPath",
    "sample_sas",
    "sample_doa",
    "levy_eval_at",
    "lambda_bar",
    "model_cf",
    "numeric_derivative",
    "default_laws",
    "load_pmf_json",
]


class ParameterError(ValueError):
    """Raised for parameters outside a model's domain."""


class UnsupportedLawError(ValueError):
    """Raised when a law lacks a usable closed or summable form."""


# ---------------------------------------------------------------------------
# model parameters


@dataclass(frozen=True)
class SimParams:
    """Indices of scenery (``alpha``), walk (``beta``) and strategy (``gamma``).

    ``kappa`` is the moment exponent used by the uniform-integrability and
    moment conditions; it must satisfy ``alpha * kappa < gamma``.
    """

    alpha: float
    beta: float
    gamma: float
    kappa: float = 1.1

    def __post_init__(self):
        a, b, g, k = self.alpha, self.beta, self.gamma, self.kappa
        for name, v in (("alpha", a), ("beta", b), ("gamma", g), ("kappa", k)):
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ParameterError(f"{name} must be a finite real, got {v!r}")
        if not 0 < a < g <= 2:
            raise ParameterError(
                f"need 0 < alpha < gamma <= 2, got alpha={a}, gamma={g}")
        if not 1 < b <= 2:
            raise ParameterError(f"need 1 < beta <= 2, got beta={b}")
        if not k > 1:
            raise ParameterError(f"need kappa > 1, got kappa={k}")
        if not a * k < g:
            raise ParameterError(
                f"need alpha*kappa < gamma (moment of order alpha*kappa must be "
                f"finite for gamma-stable strategies), got "
                f"alpha*kappa={a * k:g} >= gamma={g}")

    @property
    def beta_tilde(self) -> float:
        return 1.0 - 1.0 / self.beta

    @property
    def hurst(self) -> float:
        bt = self.beta_tilde
        return bt / self.gamma + (1.0 - bt) / self.alpha

    @property
    def r_exponent(self) -> float:
        a, b, g = self.alpha, self.beta, self.gamma
        return 1.0 / g + 1.0 / (a * b) - 1.0 / (g * b)

    def r_n(self, n: float) -> float:
        """Normalisation ``n ** r_exponent`` of the single-walker sum."""
        return float(n) ** self.r_exponent

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta,
                "gamma": self.gamma, "kappa": self.kappa}


# ---------------------------------------------------------------------------
# exact symmetric stable sampling


@dataclass(frozen=True)
class StableLaw:
    index: float
    scale: float = 1.0

    def __post_init__(self):
        if not 0 < self.index <= 2:
            raise ParameterError(f"stable index must be in (0, 2], got {self.index}")
        if not self.scale >= 0:
            raise ParameterError(f"stable scale must be >= 0, got {self.scale}")

    def cf(self, theta):
        return np.exp(-(self.scale * np.abs(theta)) ** self.index)


def _unit_sas(index: float, count: int, rng: np.random.Generator) -> np.ndarray:
    # Chambers-Mallows-Stuck, symmetric case; CF exp(-|theta|**index)
    v = rng.uniform(-np.pi / 2, np.pi / 2, count)
    if index == 1.0:
        return np.tan(v)
    w = rng.standard_exponential(count)
    if index == 2.0:
        return 2.0 * np.sin(v) * np.sqrt(w)
    a = index
    return (np.sin(a * v) / np.cos(v) ** (1.0 / a)
            * (np.cos((1.0 - a) * v) / w) ** ((1.0 - a) / a))


def sample_sas(law: StableLaw, count: int, stream: np.random.Generator) -> np.ndarray:
    """Draw ``count`` i.i.d. symmetric stable variates.

    Draws with scale ``s`` are exactly ``s`` times the unit-scale draws made
    from the same stream state.
    """
    if not isinstance(law, StableLaw):
        law = StableLaw(*law)
    count = int(count)
    if count < 0:
        raise ParameterError("count must be >= 0")
    return law.scale * _unit_sas(float(law.index), count, stream)


# ---------------------------------------------------------------------------
# domain-of-attraction laws


@lru_cache(maxsize=64)
def _pareto_series(a: float, terms: int = 40) -> tuple[float, np.ndarray]:
    """Leading coefficient and even power-series coefficients of
    ``Re Li_{1+a}(exp(i v)) / zeta(1+a)``, valid for ``|v| < 2 pi``."""
    s = 1.0 + a
    zs = special.zeta(s)
    lead = special.gamma(-a) * math.cos(math.pi * a / 2.0) / zs
    m = np.arange(0, 2 * terms, 2)
    coef = special.zeta(s - m) * (-1.0) ** (m // 2) / special.factorial(m) / zs
    return lead, coef


def _pareto_cf(u, a: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    v = np.abs(np.remainder(u + np.pi, 2.0 * np.pi) - np.pi)
    if abs(a - 1.0) < 1e-9:
        # sum_k (1 - cos k v) / k^2 = pi v / 2 - v^2 / 4 on [0, 2 pi]
        return 1.0 - (6.0 / np.pi ** 2) * (np.pi * v / 2.0 - v * v / 4.0)
    lead, coef = _pareto_series(float(a))
    vmax = float(v.max()) if v.size else 0.0
    if vmax <= 0.0:
        nterms = 1
    else:
        ratio = (vmax / (2.0 * np.pi)) ** 2
        nterms = int(min(len(coef), max(2, math.ceil(-40.0 / math.log(ratio)) + 2)))
    v2 = v * v
    acc = np.zeros_like(v)
    for c in coef[:nterms][::-1]:
        acc = acc * v2 + c
    return lead * v ** a + acc


_KINDS = ("rademacher", "symmetric-discrete-pareto", "gaussian-integerized",
          "user-table", "gaussian", "constant")
_ALIASES = {"pareto": "symmetric-discrete-pareto", "table": "user-table",
            "simple": "rademacher", "lazy": "user-table"}


@dataclass(frozen=True, eq=False)
class DoaLaw:
    """A symmetric law in the normal domain of attraction of a stable law.

    ``norming`` is the constant ``c`` for which partial sums divided by
    ``c * n**(1/target_index)`` converge to the unit-scale stable law;
    equivalently ``1 - cf(u) ~ |c u|**target_index`` near zero.

    Use the constructors (:meth:`rademacher`, :meth:`pareto`,
    :meth:`gaussian_integerized`, :meth:`table`, :meth:`gaussian`,
    :meth:`constant`) rather than building instances by hand.
    """

    kind: str
    target_index: float | None
    norming: float
    param: float = 0.0
    values: np.ndarray | None = field(default=None, repr=False)
    probs: np.ndarray | None = field(default=None, repr=False)

    # -- constructors -----------------------------------------------------
    @classmethod
    def rademacher(cls) -> "DoaLaw":
        return cls("rademacher", 2.0, math.sqrt(0.5), 0.0,
                   np.array([-1, 1]), np.array([0.5, 0.5]))

    @classmethod
    def pareto(cls, index: float) -> "DoaLaw":
        """``P(+-k) = k**(-1-index) / (2 zeta(1+index))`` for ``k >= 1``."""
        index = float(index)
        if not 0 < index < 2:
            raise ParameterError(f"pareto index must be in (0, 2), got {index}")
        if abs(index - 1.0) < 1e-9:
            c = 3.0 / math.pi
        else:
            c_a = (special.gamma(1.0 - index) * math.cos(math.pi * index / 2.0)
                   / (index * special.zeta(1.0 + index)))
            c = c_a ** (1.0 / index)
        return cls("symmetric-discrete-pareto", index, float(c), index)

    @classmethod
    def gaussian_integerized(cls, sigma: float = 1.0) -> "DoaLaw":
        """``round(sigma * N(0, 1))``; attracted to the Gaussian."""
        sigma = float(sigma)
        if not sigma > 0:
            raise ParameterError("sigma must be > 0")
        kmax = int(math.ceil(12.0 * sigma)) + 2
        k = np.arange(-kmax, kmax + 1)
        # sf differences on |k| keep the pmf exactly symmetric
        p = stats.norm.sf((np.abs(k) - 0.5) / sigma) - stats.norm.sf((np.abs(k) + 0.5) / sigma)
        p[kmax] = 1.0 - 2.0 * stats.norm.sf(0.5 / sigma)
        p = p / p.sum()
        var = float(np.sum(p * k * k))
        return cls("gaussian-integerized", 2.0, math.sqrt(var / 2.0), sigma, k, p)

    @classmethod
    def table(cls, pmf, target_index: float = 2.0,
              norming: float | None = None) -> "DoaLaw":
        """Finite symmetric integer law from ``{value: prob}`` or pairs.

        A finite table has finite variance, so it is attracted to the
        Gaussian; ``norming`` defaults to ``sqrt(var / 2)``.  Passing another
        ``target_index`` is allowed for experiments but then ``norming`` must
        be supplied.
        """
        items = pmf.items() if isinstance(pmf, dict) else pmf
        acc: dict[int, float] = {}
        for v, p in items:
            if float(v) != int(v):
                raise ParameterError(f"table values must be integers, got {v!r}")
            acc[int(v)] = acc.get(int(v), 0.0) + float(p)
        if not acc:
            raise ParameterError("empty pmf table")
        vals = np.array(sorted(acc), dtype=np.int64)
        probs = np.array([acc[int(v)] for v in vals])
        if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-9:
            raise ParameterError("pmf probabilities must be >= 0 and sum to 1 within 1e-9")
        for v, p in zip(vals, probs):
            if abs(acc.get(-int(v), 0.0) - p) > 1e-12:
                raise ParameterError(f"pmf is not symmetric at value {int(v)}")
        var = float(np.sum(probs * vals.astype(float) ** 2))
        if norming is None:
            if target_index != 2.0:
                raise ParameterError("norming must be given for a non-Gaussian target")
            if var == 0.0:
                raise ParameterError("degenerate table; use DoaLaw.constant")
            norming = math.sqrt(var / 2.0)
        return cls("user-table", float(target_index), float(norming), 0.0, vals, probs)

    @classmethod
    def lazy_walk(cls) -> "DoaLaw":
        """Simple walk that holds with probability 1/2."""
        return cls.table({-1: 0.25, 0: 0.5, 1: 0.25})

    @classmethod
    def gaussian(cls) -> "DoaLaw":
        """Real-valued unit-scale 2-stable law, CF ``exp(-u**2)``."""
        return cls("gaussian", 2.0, 1.0)

    @classmethod
    def constant(cls, value: int = 1) -> "DoaLaw":
        """Degenerate law; ``constant(1)`` as strategy recovers the classical model."""
        return cls("constant", None, 0.0, float(value),
                   np.array([int(value)]), np.array([1.0]))

    @classmethod
    def from_spec(cls, spec) -> "DoaLaw":
        """Build a law from a config mapping such as ``{"kind": "pareto", "index": 1.5}``."""
        if isinstance(spec, DoaLaw):
            return spec
        if isinstance(spec, str):
            spec = {"kind": spec}
        spec = dict(spec)
        raw_kind = spec.pop("kind")
        kind = _ALIASES.get(raw_kind, raw_kind)
        if raw_kind == "lazy":
            law = cls.lazy_walk()
        elif kind == "rademacher":
            law = cls.rademacher()
        elif kind == "symmetric-discrete-pareto":
            law = cls.pareto(spec.pop("index"))
        elif kind == "gaussian-integerized":
            law = cls.gaussian_integerized(spec.pop("sigma", 1.0))
        elif kind == "gaussian":
            law = cls.gaussian()
        elif kind == "constant":
            law = cls.constant(spec.pop("value", 1))
        elif kind == "user-table":
            if "path" in spec:
                law = load_pmf_json(spec.pop("path"), spec.pop("target_index", 2.0),
                                    spec.pop("norming", None))
            else:
                law = cls.table(spec.pop("pmf"), spec.pop("target_index", 2.0),
                                spec.pop("norming", None))
        else:
            raise ParameterError(f"unknown law kind {raw_kind!r}; expected one of {_KINDS}")
        if spec:
            raise ParameterError(f"unknown keys for law {raw_kind!r}: {sorted(spec)}")
        return law

    def to_spec(self) -> dict:
        if self.kind == "symmetric-discrete-pareto":
            return {"kind": "pareto", "index": self.param}
        if self.kind == "gaussian-integerized":
            return {"kind": "gaussian-integerized", "sigma": self.param}
        if self.kind == "constant":
            return {"kind": "constant", "value": int(self.param)}
        if self.kind == "user-table":
            return {"kind": "table", "pmf": [[int(v), float(p)] for v, p in zip(self.values, self.probs)],
                    "target_index": self.target_index, "norming": self.norming}
        return {"kind": self.kind}

    # -- properties ---------------------------------------------------------
    @property
    def finite(self) -> bool:
        return self.values is not None

    @property
    def integer_valued(self) -> bool:
        return self.kind != "gaussian"

    @property
    def tail_constant(self) -> float:
        """``c`` in ``P(|X| >= k) ~ c k**(-index)`` (pareto laws only)."""
        if self.kind != "symmetric-discrete-pareto":
            raise UnsupportedLawError("tail constant is defined for pareto laws only")
        return 1.0 / (self.param * special.zeta(1.0 + self.param))

    @property
    def max_abs(self) -> float:
        if self.values is None:
            return math.inf
        return float(np.abs(self.values).max())

    # -- sampling and CFs ---------------------------------------------------
    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        count = int(count)
        if count < 0:
            raise ParameterError("count must be >= 0")
        if self.kind == "rademacher":
            return 2 * rng.integers(0, 2, count, dtype=np.int64) - 1
        if self.kind == "symmetric-discrete-pareto":
            mag = rng.zipf(1.0 + self.param, count).astype(np.int64)
            sign = 2 * rng.integers(0, 2, count, dtype=np.int64) - 1
            return mag * sign
        if self.kind == "gaussian-integerized":
            return np.rint(self.param * rng.standard_normal(count)).astype(np.int64)
        if self.kind == "gaussian":
            return math.sqrt(2.0) * rng.standard_normal(count)
        if self.kind == "constant":
            return np.full(count, int(self.param), dtype=np.int64)
        return rng.choice(self.values, size=count, p=self.probs)

    def cf(self, u) -> np.ndarray:
        """Characteristic function of one draw (real by symmetry)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "rademacher":
            return np.cos(u)
        if self.kind == "symmetric-discrete-pareto":
            return _pareto_cf(u, self.param)
        if self.kind == "gaussian":
            return np.exp(-u * u)
        if self.kind == "constant":
            raise UnsupportedLawError("a constant law is not symmetric; its CF is complex")
        flat = u.ravel()
        out = np.empty_like(flat)
        vals = self.values.astype(float)
        step = max(1, 2_000_000 // len(vals))
        for i in range(0, flat.size, step):
            out[i:i + step] = np.cos(np.multiply.outer(flat[i:i + step], vals)) @ self.probs
        return out.reshape(u.shape)

    def cf_derivative(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "rademacher":
            return -np.sin(u)
        if self.kind == "gaussian":
            return -2.0 * u * np.exp(-u * u)
        if self.kind == "symmetric-discrete-pareto":
            return numeric_derivative(self.cf, u)
        if self.kind == "constant":
            raise UnsupportedLawError("a constant law is not symmetric; its CF is complex")
        vals = self.values.astype(float)
        return -(np.sin(np.multiply.outer(u, vals)) @ (self.probs * vals))


def numeric_derivative(f, x, h: float = 1e-6):
    """Central difference at step ``h`` with one Richardson refinement."""
    x = np.asarray(x, dtype=float)
    d1 = (f(x + h) - f(x - h)) / (2.0 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4.0 * d2 - d1) / 3.0


def sample_doa(law: DoaLaw, count: int, stream: np.random.Generator) -> np.ndarray:
    return law.sample(count, stream)


def load_pmf_json(path, target_index: float = 2.0, norming: float | None = None) -> DoaLaw:
    """Read a table law from a JSON array of ``[value, probability]`` pairs."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list) or not all(
            isinstance(r, list) and len(r) == 2 for r in data):
        raise ParameterError(f"{path}: expected an array of [integer, probability] pairs")
    return DoaLaw.table(data, target_index, norming)


def default_laws(params: SimParams) -> dict[str, DoaLaw]:
    """Step, scenery and strategy laws used when a config names none."""
    return {
        "step": DoaLaw.rademacher() if params.beta == 2 else DoaLaw.pareto(params.beta),
        "xi": DoaLaw.pareto(params.alpha),
        "y": DoaLaw.rademacher() if params.gamma == 2 else DoaLaw.pareto(params.gamma),
    }


def lambda_bar(u, alpha: float, scale: float = 1.0) -> np.ndarray:
    """``exp(-|scale * u|**alpha)``."""
    return np.exp(-np.abs(scale * np.asarray(u, dtype=float)) ** alpha)


def model_cf(kind: str, law, u) -> np.ndarray:
    """``lambda`` (the scenery CF) or its stable surrogate ``lambda_bar``.

    For ``kind="lambda_bar"``, ``law`` may be an index (unit scale) or a
    :class:`DoaLaw`, in which case the surrogate carries the law's norming
    so that ``lambda - lambda_bar = o(|u|**index)`` near zero.
    """
    if kind == "lambda":
        if not isinstance(law, DoaLaw):
            raise ParameterError("lambda needs a DoaLaw")
        return law.cf(u)
    if kind == "lambda_bar":
        if isinstance(law, DoaLaw):
            if law.target_index is None:
                raise UnsupportedLawError("degenerate law has no stable surrogate")
            return lambda_bar(u, law.target_index, law.norming)
        return lambda_bar(u, float(law))
    raise ParameterError(f"unknown cf kind {kind!r}")


# ---------------------------------------------------------------------------
# Levy motion at a finite set of times


_TIE_RTOL = 1e-15


@dataclass(frozen=True)
class LevyPath:
    times: np.ndarray
    values: np.ndarray
    index: float

    def values_at(self, query) -> np.ndarray:
        """Look up path values at (previously evaluated) times."""
        q = np.asarray(query, dtype=float)
        flat = q.ravel()
        i = np.clip(np.searchsorted(self.times, flat), 1, max(len(self.times) - 1, 1))
        if len(self.times) == 1:
            j = np.zeros(flat.shape, dtype=np.int64)
        else:
            left, right = self.times[i - 1], self.times[i]
            j = np.where(np.abs(flat - left) <= np.abs(right - flat), i - 1, i)
        err = np.abs(self.times[j] - flat)
        bad = err > 4 * _TIE_RTOL * np.abs(flat)
        if bad.any():
            raise ParameterError(f"time {flat[bad][0]!r} was not evaluated on this path")
        return self.values[j].reshape(q.shape)


def _distinct_times(t: np.ndarray) -> np.ndarray:
    u = np.unique(t)
    if u.size > 1:
        keep = np.ones(u.size, dtype=bool)
        keep[1:] = np.diff(u) > _TIE_RTOL * u[1:]
        u = u[keep]
    return u


def levy_eval_at(index: float, times, stream: np.random.Generator) -> LevyPath:
    """Evaluate a unit symmetric ``index``-stable Levy motion at ``times``.

    Times are sorted and de-duplicated (relative tolerance 1e-15); one
    unit stable increment per distinct time is drawn and scaled by
    ``(t_{i+1} - t_i) ** (1/index)``.  The path starts at 0 at time 0.
    """
    if not 0 < index <= 2:
        raise ParameterError(f"index must be in (0, 2], got {index}")
    t = np.asarray(times, dtype=float).ravel()
    if (t < 0).any() or not np.isfinite(t).all():
        raise ParameterError("times must be finite and nonnegative")
    distinct = _distinct_times(t)
    dt = np.diff(distinct, prepend=0.0)
    z = _unit_sas(float(index), distinct.size, stream)
    values = np.cumsum(dt ** (1.0 / index) * z)
    return LevyPath(distinct, values, float(index))
