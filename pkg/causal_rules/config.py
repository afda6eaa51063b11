"""
Configuration dataclasses.

Every section can be built from a JSON document. The CLI resolves values with the
precedence: command-line flag > config file > dataclass default.
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigError


DEFAULT_LAMBDA_GRID = tuple(round(0.1 * k, 1) for k in range(1, 16))
DEFAULT_LENGTH_GRID = (3, 4, 5, 6)
SURROGATE_BOUNDS = ("max", "b1", "b2")


def _build(cls, data: Optional[dict], aliases: Optional[dict] = None):
    """Instantiate a config dataclass from a mapping, rejecting unknown keys."""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{cls.__name__}: expected an object, got {type(data).__name__}")
    aliases = aliases or {}
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        name = aliases.get(key, key).replace("-", "_")
        if name not in known:
            raise ConfigError(f"{cls.__name__}: unknown key '{key}'")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[name] = value
    return cls(**kwargs)


@dataclass(frozen=True)
class Schema:
    """Column roles and type hints for a raw CSV."""
    treatment: str = "t"
    outcome: str = "y"
    propensity: Optional[str] = None
    # Raw treatment values mapped to T=1; None means the column is already 0/1.
    treatment_values: Optional[tuple] = None
    covariates: Optional[tuple] = None
    numeric: tuple = ()
    categorical: tuple = ()
    ite: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "Schema":
        if isinstance(data, dict):
            data = {k: v for k, v in data.items() if k != "meta"}
        schema = _build(cls, data)
        if schema.treatment_values is not None:
            schema = replace(schema, treatment_values=tuple(str(v) for v in schema.treatment_values))
        return schema

    def to_dict(self) -> dict:
        return asdict(self)

    def overlay(self, stored: "Schema") -> "Schema":
        """`stored` with every field of this schema that differs from the defaults."""
        default = Schema()
        changed = {f.name: getattr(self, f.name) for f in fields(self)
                   if getattr(self, f.name) != getattr(default, f.name)}
        return replace(stored, **changed)


@dataclass(frozen=True)
class BinningConfig:
    default_bins: int = 10
    bins: dict = field(default_factory=dict)
    max_levels: int = 32
    outcome_margin: float = 1.0

    def __post_init__(self):
        for col, count in {"<default>": self.default_bins, **self.bins}.items():
            if not 2 <= int(count) <= 64:
                raise ConfigError(f"bin count for {col} must lie in [2, 64], got {count}")
        if self.outcome_margin <= 0:
            raise ConfigError("outcome_margin must be > 0")

    def bins_for(self, column: str) -> int:
        return int(self.bins.get(column, self.default_bins))

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "BinningConfig":
        return _build(cls, data)


@dataclass(frozen=True)
class PropensityConfig:
    l2: float = 1e-2
    max_iter: int = 100
    tol: float = 1e-8
    clip_lo: float = 0.01
    clip_hi: float = 0.99

    def __post_init__(self):
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")
        if not 0 < self.clip_lo <= 0.5 <= self.clip_hi < 1:
            raise ConfigError(f"clip bounds must satisfy 0 < lo <= 0.5 <= hi < 1, got ({self.clip_lo}, {self.clip_hi})")
        if self.max_iter < 1 or self.tol <= 0:
            raise ConfigError("max_iter must be >= 1 and tol > 0")

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "PropensityConfig":
        return _build(cls, data)


@dataclass(frozen=True)
class SearchConfig:
    """Hyperparameters of the rule-set search."""
    lam: float = 0.1
    k: int = 2
    max_len: int = 3
    # None: 1e-3 times the mean weighted treated outcome.
    epsilon: Optional[float] = None
    m_min: int = 10
    max_mm_iters: int = 50
    f_tolerance: float = 1e-9
    # breaks ties between equally good start literals
    seed: int = 0
    # MM restarts from the best feasible singletons; 1 keeps only the greedy start.
    n_starts: int = 8
    # "max" uses the tighter of the two modular bounds; "b1" or "b2" keep one of them.
    surrogate_bound: str = "max"
    fallback: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if self.k < 1 or self.max_len < 1:
            raise ConfigError("K and L must be >= 1")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ConfigError("epsilon must be > 0")
        if self.m_min < 1:
            raise ConfigError("min support must be >= 1")
        if self.max_mm_iters < 0 or self.f_tolerance <= 0:
            raise ConfigError("max_mm_iters must be >= 0 and f_tolerance > 0")
        if self.n_starts < 1:
            raise ConfigError("n_starts must be >= 1")
        if self.surrogate_bound not in SURROGATE_BOUNDS:
            raise ConfigError(f"surrogate_bound must be one of {SURROGATE_BOUNDS}")

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "SearchConfig":
        return _build(cls, data, aliases={"lambda": "lam", "K": "k", "L": "max_len", "min_support": "m_min"})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


@dataclass(frozen=True)
class SynthConfig:
    n_units: int = 3000
    n_categorical: int = 5
    n_numeric: int = 5
    b: float = 0.6
    seed: int = 0
    eta_per_unit: bool = True
    outcome_margin: float = 1.0

    def __post_init__(self):
        if self.n_units < 1:
            raise ConfigError("n_units must be >= 1")
        if self.b <= 0:
            raise ConfigError("b must be > 0")
        if self.n_categorical < 0 or self.n_numeric < 0 or self.n_categorical + self.n_numeric == 0:
            raise ConfigError("need at least one covariate")

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "SynthConfig":
        return _build(cls, data, aliases={"n": "n_units", "cat": "n_categorical", "num": "n_numeric"})


@dataclass(frozen=True)
class GridSpec:
    lambdas: tuple = DEFAULT_LAMBDA_GRID
    max_lens: tuple = DEFAULT_LENGTH_GRID

    def __post_init__(self):
        if not self.lambdas or not self.max_lens:
            raise ConfigError("grid needs at least one lambda and one max length")

    def points(self) -> list[tuple[float, int]]:
        return [(float(lam), int(length)) for lam in self.lambdas for length in self.max_lens]

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "GridSpec":
        return _build(cls, data, aliases={"lambda": "lambdas", "L": "max_lens"})


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration of one CLI invocation."""
    schema: Schema = field(default_factory=Schema)
    binning: BinningConfig = field(default_factory=BinningConfig)
    propensity: PropensityConfig = field(default_factory=PropensityConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    grid: GridSpec = field(default_factory=GridSpec)
    seed: int = 0
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    cv_folds: int = 5
    bin_candidates: tuple = ()
    out: Optional[str] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["search"] = self.search.to_dict()
        return d


SECTION_BUILDERS = {
    "schema": Schema.from_dict,
    "binning": BinningConfig.from_dict,
    "propensity": PropensityConfig.from_dict,
    "search": SearchConfig.from_dict,
    "synth": SynthConfig.from_dict,
    "grid": GridSpec.from_dict,
}


def load_config_file(path: Optional[str]) -> dict:
    """Read a JSON config document; a missing path yields an empty config."""
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def resolve_config(file_data: dict, overrides: dict[str, dict[str, Any]]) -> RunConfig:
    """
    Merge defaults, config file and command-line overrides.

    `overrides` maps a section name ("search", "schema", ..., or "" for top-level keys)
    to the values the user passed explicitly on the command line.
    """
    sections = {}
    for name, builder in SECTION_BUILDERS.items():
        merged = dict(file_data.get(name) or {})
        merged.update(overrides.get(name, {}))
        sections[name] = builder(merged or None)

    top = {k: v for k, v in file_data.items() if k not in SECTION_BUILDERS}
    top.update(overrides.get("", {}))
    known = {f.name for f in fields(RunConfig)} - set(SECTION_BUILDERS)
    unknown = set(top) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "bin_candidates" in top and top["bin_candidates"] is not None:
        top["bin_candidates"] = tuple(int(b) for b in top["bin_candidates"])
    top = {k: v for k, v in top.items() if v is not None}

    config = RunConfig(**sections, **top)
    if config.threads < 1:
        raise ConfigError("threads must be >= 1")
    if config.cv_folds < 2:
        raise ConfigError("cv_folds must be >= 2")
    return config
