"""
Synthetic observational data with known individual effects.

Covariates are 5-level categoricals (A..E, uniform) and standard normals. With X the
full one-hot expansion plus the numeric columns:

    e(X)  = sigmoid(<X, beta> + eta)          beta ~ U(0, b), eta ~ U(-1, 1)
    T     ~ Bernoulli(e(X))
    TE    = <X, alpha>                        alpha ~ U(0, 2)
    Y     = T * TE + <X, gamma> + noise + offset,   gamma ~ U(0, 1), noise ~ U(-1, 1)

The offset makes every Y strictly positive. Draws come from numpy's PCG64 generator,
in a fixed order, so a seed reproduces a dataset exactly.

Also reads the IHDP benchmark replications (see sources.ihdp).
"""

from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from loguru import logger
from scipy.special import expit

from .config import Schema, SynthConfig
from .dataset import CATEGORICAL, NUMERIC, RawTable, positive_offset, table_from_frame
from .errors import MissingColumn

LEVELS = ("A", "B", "C", "D", "E")
PRNG = "numpy.random.PCG64"

IHDP_COLUMNS = ["treatment", "y_factual", "y_cfactual", "mu0", "mu1"] + [f"x{i}" for i in range(1, 26)]
IHDP_SCHEMA = Schema(
    treatment="treatment",
    outcome="y_factual",
    ite="ite",
    covariates=tuple(f"x{i}" for i in range(1, 26)),
    numeric=tuple(f"x{i}" for i in range(1, 7)),
    categorical=tuple(f"x{i}" for i in range(7, 26)),
)


@dataclass(frozen=True, eq=False)
class SynthTruth:
    te: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    eta: np.ndarray
    noise: np.ndarray
    propensity: np.ndarray
    y_offset: float
    feature_names: tuple
    config: SynthConfig
    prng: str = PRNG

    def to_dict(self) -> dict:
        return {
            "prng": self.prng,
            "seed": self.config.seed,
            "config": asdict(self.config),
            "feature_names": list(self.feature_names),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "gamma": self.gamma.tolist(),
            "y_offset": self.y_offset,
            "te": self.te.tolist(),
            "propensity": self.propensity.tolist(),
            "eta": self.eta.tolist(),
            "noise": self.noise.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthTruth":
        return cls(
            te=np.array(d["te"], dtype=float),
            alpha=np.array(d["alpha"], dtype=float),
            beta=np.array(d["beta"], dtype=float),
            gamma=np.array(d["gamma"], dtype=float),
            eta=np.array(d.get("eta", []), dtype=float),
            noise=np.array(d.get("noise", []), dtype=float),
            propensity=np.array(d["propensity"], dtype=float),
            y_offset=float(d["y_offset"]),
            feature_names=tuple(d["feature_names"]),
            config=SynthConfig(**d["config"]),
            prng=d.get("prng", PRNG),
        )


def column_names(n_categorical: int, n_numeric: int) -> tuple[list[str], list[str]]:
    return [f"cat_{i}" for i in range(1, n_categorical + 1)], [f"num_{i}" for i in range(1, n_numeric + 1)]


def design_matrix(covariates: pd.DataFrame, n_categorical: int, n_numeric: int) -> tuple[np.ndarray, list[str]]:
    """One-hot over all five levels of each categorical, followed by the numeric columns."""
    cat_cols, num_cols = column_names(n_categorical, n_numeric)
    parts = []
    for c in cat_cols:
        levels = pd.Series(pd.Categorical(covariates[c], categories=LEVELS), index=covariates.index)
        parts.append(pd.get_dummies(levels, prefix=c, prefix_sep="=", dtype=float))
    if num_cols:
        parts.append(covariates[num_cols].astype(float))
    x = pd.concat(parts, axis=1)
    return x.to_numpy(dtype=float), list(x.columns)


def generate(cfg: SynthConfig) -> tuple[RawTable, SynthTruth]:
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    n = cfg.n_units
    cat_cols, num_cols = column_names(cfg.n_categorical, cfg.n_numeric)

    levels = rng.integers(0, len(LEVELS), size=(n, cfg.n_categorical))
    numeric = rng.standard_normal((n, cfg.n_numeric))
    covariates = pd.DataFrame(
        {**{c: np.array(LEVELS, dtype=object)[levels[:, k]] for k, c in enumerate(cat_cols)},
         **{c: numeric[:, k] for k, c in enumerate(num_cols)}},
        columns=cat_cols + num_cols,
    )
    x, names = design_matrix(covariates, cfg.n_categorical, cfg.n_numeric)
    p = x.shape[1]

    beta = rng.uniform(0.0, cfg.b, size=p)
    eta = rng.uniform(-1.0, 1.0, size=n if cfg.eta_per_unit else 1)
    propensity = expit(x @ beta + eta)
    treatment = rng.binomial(1, propensity).astype(np.int8)

    alpha = rng.uniform(0.0, 2.0, size=p)
    gamma = rng.uniform(0.0, 1.0, size=p)
    noise = rng.uniform(-1.0, 1.0, size=n)
    te = x @ alpha
    y = treatment * te + x @ gamma + noise
    offset = positive_offset(y, cfg.outcome_margin)
    y = y + offset

    column_types = {**{c: CATEGORICAL for c in cat_cols}, **{c: NUMERIC for c in num_cols}}
    table = RawTable(covariates, column_types, treatment, y, ite=te, source=f"synth(seed={cfg.seed})")
    truth = SynthTruth(te, alpha, beta, gamma, np.broadcast_to(eta, (n,)).copy(), noise,
                       propensity, offset, tuple(names), cfg)
    logger.info(f"Generated {n} units, {int(treatment.sum())} treated, {p} features")
    return table, truth


def to_frame(table: RawTable, treatment_col: str = "t", outcome_col: str = "y") -> pd.DataFrame:
    """The observed columns only; the truth goes to the sidecar."""
    df = table.covariates.copy()
    df[treatment_col] = table.treatment.astype(int)
    df[outcome_col] = table.outcome
    return df


def synth_schema(cfg: SynthConfig) -> Schema:
    cat_cols, num_cols = column_names(cfg.n_categorical, cfg.n_numeric)
    return Schema(treatment="t", outcome="y", covariates=tuple(cat_cols + num_cols),
                  numeric=tuple(num_cols), categorical=tuple(cat_cols))


def ihdp_load(path: Union[str, Path], schema: Optional[Schema] = None) -> RawTable:
    """
    Read IHDP replications, either with the column header written by sources.ihdp or
    in the headerless 30-column layout of the original files. The true effect is
    mu1 - mu0 when both columns are present.
    """
    path = Path(path)
    df = pd.read_csv(path, dtype=str, header=None, skipinitialspace=True)
    if df.iloc[0].str.strip().eq("treatment").any():
        df = df.iloc[1:].reset_index(drop=True)
        df.columns = [str(c).strip() for c in pd.read_csv(path, nrows=0).columns]
    else:
        if df.shape[1] != len(IHDP_COLUMNS):
            raise MissingColumn(IHDP_COLUMNS[min(df.shape[1], len(IHDP_COLUMNS) - 1)])
        df.columns = IHDP_COLUMNS

    schema = schema or IHDP_SCHEMA
    if "mu0" in df.columns and "mu1" in df.columns:
        ite = pd.to_numeric(df["mu1"]) - pd.to_numeric(df["mu0"])
        df = df.assign(ite=ite.astype(str))
    else:
        schema = replace(schema, ite=None)
    table = table_from_frame(df, schema, source=str(path))
    logger.info(f"Loaded IHDP table with {table.n_units} units from {path.name}")
    return table
