"""Experiment configuration: loading, validation and presets."""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .stable import DoaLaw, ParameterError, SimParams

__all__ = ["ExperimentConfig", "PRESETS", "load_config", "preset"]

_LAW_SLOTS = ("step", "xi", "y")
_PARAM_KEYS = ("alpha", "beta", "gamma", "kappa")


@dataclass
class ExperimentConfig:
    """Everything an experiment needs; validated on construction.

    ``laws`` maps the slots ``step``, ``xi`` and ``y`` to law specs such as
    ``{"kind": "pareto", "index": 1.5}``; missing slots take the defaults
    for ``params``.  ``c_grid`` lists the walker counts used by the exact
    oracle comparison (defaults to ``[c_n]``).
    """

    params: dict
    n_grid: list
    c_n: int
    times: list
    theta_vectors: list
    replicas: int
    root_seed: int
    laws: dict = field(default_factory=dict)
    check_law_indices: bool = True
    K: float = 10.0
    out_dir: str = "out"
    cf_tolerance: float = 0.15
    oracle_replicas: int | None = None
    hill_top_fraction: float = 0.05
    ks_permutations: int = 200
    hurst_tolerance: float = 0.08
    cond_replicas: int = 20_000
    k_grid: list = field(default_factory=lambda: [1, 4, 16, 64, 256, 1024])
    bn_replicas: int | None = None
    c_grid: list | None = None

    def __post_init__(self):
        self.params = dict(self.params)
        unknown = set(self.params) - set(_PARAM_KEYS)
        if unknown:
            raise ParameterError(f"unknown params keys: {sorted(unknown)}")
        self.sim_params  # validates the domain
        unknown = set(self.laws) - set(_LAW_SLOTS)
        if unknown:
            raise ParameterError(f"unknown law slots: {sorted(unknown)}")
        for spec in self.laws.values():
            DoaLaw.from_spec(copy.deepcopy(spec))
        self.n_grid = [int(n) for n in self.n_grid]
        if not self.n_grid or min(self.n_grid) < 1:
            raise ParameterError("n_grid must hold positive integers")
        if self.n_grid != sorted(set(self.n_grid)):
            raise ParameterError("n_grid must be strictly increasing")
        self.times = [float(t) for t in self.times]
        if not self.times or any(t < 0 for t in self.times) or self.times != sorted(self.times):
            raise ParameterError("times must be a nonempty sorted list of nonnegative values")
        self.theta_vectors = [[float(x) for x in v] for v in self.theta_vectors]
        if any(len(v) != len(self.times) for v in self.theta_vectors):
            raise ParameterError("every theta vector needs one entry per time")
        if int(self.c_n) < 1:
            raise ParameterError("c_n must be >= 1")
        self.c_n = int(self.c_n)
        if self.c_grid is not None:
            self.c_grid = [int(c) for c in self.c_grid]
            if not self.c_grid or min(self.c_grid) < 1:
                raise ParameterError("c_grid must hold positive integers")
        if int(self.replicas) < 0:
            raise ParameterError("replicas must be >= 0")
        self.replicas = int(self.replicas)
        if int(self.root_seed) < 0:
            raise ParameterError("root_seed must be a nonnegative integer")
        self.root_seed = int(self.root_seed)
        if not self.K > 0:
            raise ParameterError("K must be positive")

    @property
    def sim_params(self) -> SimParams:
        return SimParams(**self.params)

    @property
    def oracle_c_grid(self) -> list:
        return list(self.c_grid) if self.c_grid is not None else [self.c_n]

    def law_specs(self) -> dict:
        return copy.deepcopy(self.laws)

    def to_dict(self) -> dict:
        return copy.deepcopy(asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**copy.deepcopy(data))

    def replace(self, **changes) -> "ExperimentConfig":
        d = self.to_dict()
        d.update(changes)
        return ExperimentConfig.from_dict(d)


PRESETS = {
    "paper-desk": {
        "params": {"alpha": 1.0, "beta": 2.0, "gamma": 2.0, "kappa": 1.1},
        "laws": {"step": {"kind": "rademacher"}, "xi": {"kind": "pareto", "index": 1.0},
                 "y": {"kind": "rademacher"}},
        "n_grid": [1024, 4096, 16384],
        "c_n": 256,
        "times": [1.0, 2.0],
        "theta_vectors": [[0.5, 0.0], [1.0, 0.0], [2.0, 0.0], [1.0, -1.0], [0.5, 0.5]],
        "replicas": 2000,
        "root_seed": 20261016,
        "K": 10.0,
    },
    "oracle-small": {
        "params": {"alpha": 1.0, "beta": 2.0, "gamma": 2.0, "kappa": 1.1},
        "laws": {"step": {"kind": "rademacher"}, "xi": {"kind": "rademacher"},
                 "y": {"kind": "rademacher"}},
        "check_law_indices": False,
        "n_grid": [1, 2, 3, 4],
        "c_n": 2,
        "c_grid": [1, 2],
        "times": [1.0],
        "theta_vectors": [[0.5], [1.0], [2.0]],
        "replicas": 100_000,
        "root_seed": 20261016,
    },
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ExperimentConfig.from_dict(PRESETS[name])


def load_config(path) -> ExperimentConfig:
    """Read a JSON document, or TOML when the file ends in ``.toml``.

    A document that embeds its config under ``"config"`` (as every report
    does) is accepted too, so reports can be re-run directly.
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".toml":
        try:
            import tomllib as _toml
        except ImportError:  # Python < 3.11
            import tomli as _toml
        data = _toml.loads(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ParameterError("config must be a key-value document")
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    return ExperimentConfig.from_dict(data)
