"""
Tabular input and binarization.

Raw CSV data is parsed into a RawTable, then a Binarizer turns every covariate into
pairs of complementary literals (x <= t / x > t for numeric columns, x == v / x != v
for categorical ones) and stores their coverage as an immutable boolean matrix.

Quantile ties go to the "<=" literal.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from loguru import logger

from .config import BinningConfig, Schema
from .errors import (
    ConfigError,
    InsufficientUnits,
    MissingColumn,
    NonBinaryTreatment,
    SchemaMismatch,
    ScoreOutOfRange,
    TooManyLevels,
    UnknownLiteral,
    UnparseableCell,
)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
BINARY = "binary"

OPS = {"le": "<=", "gt": ">", "eq": "==", "ne": "!="}
NEGATION = {"le": "gt", "gt": "le", "eq": "ne", "ne": "eq"}


def format_value(value: Union[float, str]) -> str:
    """Render a literal value the way rules are printed: 39.69, 20.0, female."""
    if isinstance(value, str):
        return value
    text = f"{float(value):.4g}"
    if "." not in text and "e" not in text and "inf" not in text and "nan" not in text:
        text += ".0"
    return text


def positive_offset(y: np.ndarray, margin: float = 1.0) -> float:
    """Shift that makes every outcome strictly positive (0 when already positive)."""
    y_min = float(np.min(y))
    if y_min > 0:
        return 0.0
    return -y_min + margin


@dataclass(frozen=True)
class RawTable:
    """Parsed observational data: covariates plus treatment, outcome and optional extras."""
    covariates: pd.DataFrame
    column_types: dict
    treatment: np.ndarray
    outcome: np.ndarray
    propensity: Optional[np.ndarray] = None
    ite: Optional[np.ndarray] = None
    n_dropped: int = 0
    source: Optional[str] = None

    def __post_init__(self):
        n = len(self.covariates)
        for name in ("treatment", "outcome", "propensity", "ite"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n:
                raise ValueError(f"{name} has {len(arr)} entries, expected {n}")
        if not np.isin(self.treatment, (0, 1)).all():
            bad = int(np.flatnonzero(~np.isin(self.treatment, (0, 1)))[0])
            raise NonBinaryTreatment(bad, self.treatment[bad])

    @property
    def n_units(self) -> int:
        return len(self.covariates)

    @property
    def column_names(self) -> list[str]:
        return list(self.covariates.columns)

    @property
    def n_treated(self) -> int:
        return int(self.treatment.sum())

    def subset(self, index: np.ndarray) -> "RawTable":
        index = np.asarray(index)
        return replace(
            self,
            covariates=self.covariates.iloc[index].reset_index(drop=True),
            treatment=self.treatment[index],
            outcome=self.outcome[index],
            propensity=None if self.propensity is None else self.propensity[index],
            ite=None if self.ite is None else self.ite[index],
            n_dropped=0,
        )


def _parse_numeric(series: pd.Series, col: str) -> np.ndarray:
    parsed = pd.to_numeric(series, errors="coerce")
    bad = parsed.isna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise UnparseableCell(int(series.index[row]), col, series.iloc[row])
    return parsed.to_numpy(dtype=float)


def _infer_type(series: pd.Series) -> str:
    parsed = pd.to_numeric(series, errors="coerce")
    if parsed.isna().any():
        return CATEGORICAL
    if set(np.unique(parsed.to_numpy(dtype=float))) <= {0.0, 1.0}:
        return BINARY
    return NUMERIC


def table_from_frame(df: pd.DataFrame, schema: Schema, source: Optional[str] = None) -> RawTable:
    """Build a RawTable from a string-typed DataFrame according to the schema."""
    roles = [schema.treatment, schema.outcome, schema.propensity, schema.ite]
    for col in [c for c in roles if c] + list(schema.covariates or ()) + list(schema.numeric) + list(schema.categorical):
        if col not in df.columns:
            raise MissingColumn(col)

    if schema.covariates is not None:
        covariate_cols = list(schema.covariates)
    else:
        covariate_cols = [c for c in df.columns if c not in roles]

    used = [c for c in roles if c] + covariate_cols
    missing = df[used].isna().any(axis=1)
    n_dropped = int(missing.sum())
    if n_dropped:
        logger.warning(f"Dropped {n_dropped} rows with missing values")
    df = df.loc[~missing]

    raw_t = df[schema.treatment].astype(str).str.strip()
    if schema.treatment_values is not None:
        wanted = set(schema.treatment_values)
        numeric_wanted = set(pd.to_numeric(pd.Series(list(wanted)), errors="coerce").dropna())
        as_num = pd.to_numeric(raw_t, errors="coerce")
        treatment = (raw_t.isin(wanted) | as_num.isin(numeric_wanted)).to_numpy(dtype=np.int8)
    else:
        as_num = pd.to_numeric(raw_t, errors="coerce")
        bad = ~as_num.isin([0, 1])
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise NonBinaryTreatment(int(raw_t.index[row]), raw_t.iloc[row])
        treatment = as_num.to_numpy(dtype=np.int8)

    outcome = _parse_numeric(df[schema.outcome], schema.outcome)

    propensity = None
    if schema.propensity:
        propensity = _parse_numeric(df[schema.propensity], schema.propensity)
        outside = (propensity <= 0) | (propensity >= 1)
        if outside.any():
            i = int(np.flatnonzero(outside)[0])
            raise ScoreOutOfRange(int(df.index[i]), float(propensity[i]))

    ite = _parse_numeric(df[schema.ite], schema.ite) if schema.ite else None

    columns = {}
    column_types = {}
    for col in covariate_cols:
        series = df[col].astype(str).str.strip()
        if col in schema.numeric:
            kind = NUMERIC
        elif col in schema.categorical:
            kind = CATEGORICAL
        else:
            kind = _infer_type(series)
        column_types[col] = kind
        columns[col] = series.to_numpy(dtype=object) if kind == CATEGORICAL else _parse_numeric(series, col)

    covariates = pd.DataFrame(columns, columns=covariate_cols)
    return RawTable(
        covariates=covariates,
        column_types=column_types,
        treatment=treatment,
        outcome=outcome,
        propensity=propensity,
        ite=ite,
        n_dropped=n_dropped,
        source=source,
    )


def load_csv(path: Union[str, Path], schema: Schema) -> RawTable:
    """Load a header-first, comma-separated UTF-8 file into a RawTable."""
    path = Path(path)
    df = pd.read_csv(path, dtype=str, encoding="utf-8", skipinitialspace=True)
    table = table_from_frame(df, schema, source=str(path))
    logger.info(f"Loaded {table.n_units} units ({table.n_treated} treated) from {path.name}")
    return table


@dataclass(frozen=True)
class Literal:
    """One atomic condition on a covariate; `partner` is the id of its negation."""
    id: int
    column: str
    kind: str
    value: Union[float, str]
    partner: int

    @property
    def op(self) -> str:
        return OPS[self.kind]

    def describe(self) -> str:
        return f"{self.column} {self.op} {format_value(self.value)}"

    def evaluate(self, values: np.ndarray) -> np.ndarray:
        if self.kind == "le":
            return values <= self.value
        if self.kind == "gt":
            return values > self.value
        if self.kind == "eq":
            return values == self.value
        return values != self.value

    def to_dict(self) -> dict:
        return {"column": self.column, "op": self.op, "value": self.value}


@dataclass(frozen=True)
class ColumnBins:
    """How one covariate column is turned into literals."""
    column: str
    kind: str
    boundaries: tuple = ()
    levels: tuple = ()

    def to_dict(self) -> dict:
        return {"column": self.column, "kind": self.kind,
                "boundaries": list(self.boundaries), "levels": list(self.levels)}

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnBins":
        return cls(d["column"], d["kind"], tuple(d.get("boundaries", ())), tuple(d.get("levels", ())))


def quantile_boundaries(values: np.ndarray, n_bins: int) -> tuple:
    """Equal-frequency thresholds t_1 < ... < t_{B-1}, each a data value below the max."""
    distinct = np.unique(values)
    n_bins = min(n_bins, len(distinct))
    if n_bins < 2:
        return ()
    qs = np.arange(1, n_bins) / n_bins
    cuts = np.unique(np.quantile(values, qs, method="lower"))
    cuts = cuts[cuts < distinct[-1]]
    return tuple(float(c) for c in cuts)


@dataclass(frozen=True, eq=False)
class BinarizedDataset:
    """
    Immutable unit table over a literal universe.

    coverage[l, i] is True when unit i satisfies literal l. Outcomes are shifted by
    y_offset so they are strictly positive; weights are filled in by the propensity
    module (see with_weights).
    """
    literals: tuple
    coverage: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    y_offset: float = 0.0
    weights: Optional[np.ndarray] = None
    boundaries: dict = field(default_factory=dict)
    warnings: tuple = ()
    ite: Optional[np.ndarray] = None
    propensity: Optional[np.ndarray] = None

    def __post_init__(self):
        for arr in (self.coverage, self.treatment, self.outcome, self.weights, self.ite, self.propensity):
            if arr is not None:
                arr.setflags(write=False)
        if self.coverage.shape != (len(self.literals), len(self.outcome)):
            raise ValueError("coverage matrix shape does not match literals x units")
        if len(self.outcome) and np.min(self.outcome) <= 0:
            raise ValueError("stored outcomes must be strictly positive")
        if self.weights is not None and np.min(self.weights) <= 0:
            raise ValueError("weights must be strictly positive")

    @property
    def n_units(self) -> int:
        return len(self.outcome)

    @property
    def n_literals(self) -> int:
        return len(self.literals)

    @cached_property
    def coverage_matrix(self) -> np.ndarray:
        """Coverage as float64, for matrix products over all literals at once."""
        return self.coverage.astype(float)

    @property
    def raw_outcome(self) -> np.ndarray:
        return self.outcome - self.y_offset

    @property
    def control(self) -> np.ndarray:
        return ~self.treatment

    def partner(self, literal_id: int) -> int:
        return self.literal(literal_id).partner

    def literal(self, literal_id: int) -> Literal:
        if not 0 <= literal_id < len(self.literals):
            raise UnknownLiteral(literal_id)
        return self.literals[literal_id]

    def literal_coverage(self, literal_id: int) -> np.ndarray:
        self.literal(literal_id)
        return self.coverage[literal_id]

    def with_weights(self, weights: np.ndarray) -> "BinarizedDataset":
        weights = np.array(weights, dtype=float)
        if weights.shape != self.outcome.shape:
            raise ValueError("weight vector length does not match units")
        return replace(self, weights=weights)

    def subset(self, index: np.ndarray) -> "BinarizedDataset":
        index = np.asarray(index)
        return replace(
            self,
            coverage=self.coverage[:, index].copy(),
            treatment=self.treatment[index].copy(),
            outcome=self.outcome[index].copy(),
            weights=None if self.weights is None else self.weights[index].copy(),
            ite=None if self.ite is None else self.ite[index].copy(),
            propensity=None if self.propensity is None else self.propensity[index].copy(),
        )


def literal_coverage(ds: BinarizedDataset, literal_id: int) -> np.ndarray:
    """Read-only coverage row of one literal."""
    return ds.literal_coverage(literal_id)


class Binarizer:
    """Literal universe fitted on one table and reusable on others with the same columns."""

    def __init__(self, columns: list[ColumnBins], y_offset: float, outcome_margin: float = 1.0,
                 warnings: tuple = ()):
        self.columns = list(columns)
        self.y_offset = float(y_offset)
        self.outcome_margin = outcome_margin
        self.warnings = tuple(warnings)
        self.literals = self._build_literals()

    @classmethod
    def fit(cls, table: RawTable, config: Optional[BinningConfig] = None) -> "Binarizer":
        config = config or BinningConfig()
        columns = []
        warnings = []
        for col in table.column_names:
            kind = table.column_types[col]
            values = table.covariates[col].to_numpy()
            distinct = pd.unique(values)
            if len(distinct) < 2:
                msg = f"ConstantColumn: '{col}' has a single value, skipped"
                logger.warning(msg)
                warnings.append(msg)
                continue
            if kind == NUMERIC:
                cuts = quantile_boundaries(values.astype(float), config.bins_for(col))
                columns.append(ColumnBins(col, kind, boundaries=cuts))
            else:
                if len(distinct) > config.max_levels:
                    raise TooManyLevels(col, len(distinct), config.max_levels)
                levels = tuple(v if isinstance(v, str) else float(v) for v in sorted(distinct))
                columns.append(ColumnBins(col, kind, levels=levels))
        offset = positive_offset(table.outcome, config.outcome_margin)
        binarizer = cls(columns, offset, config.outcome_margin, tuple(warnings))
        logger.info(f"Binarized {len(columns)} columns into {len(binarizer.literals)} literals")
        return binarizer

    def _build_literals(self) -> tuple:
        literals = []
        for spec in self.columns:
            if spec.kind == NUMERIC:
                pairs = [("le", "gt", t) for t in spec.boundaries]
            else:
                # two levels split the column once; keep the pair on the higher level
                levels = spec.levels[-1:] if len(spec.levels) == 2 else spec.levels
                pairs = [("eq", "ne", level) for level in levels]
            for pos_kind, neg_kind, value in pairs:
                i = len(literals)
                literals.append(Literal(i, spec.column, pos_kind, value, i + 1))
                literals.append(Literal(i + 1, spec.column, neg_kind, value, i))
        return tuple(literals)

    @property
    def boundaries(self) -> dict:
        return {c.column: c.boundaries for c in self.columns if c.kind == NUMERIC}

    def transform(self, table: RawTable) -> BinarizedDataset:
        warnings = list(self.warnings)
        cov = np.zeros((len(self.literals), table.n_units), dtype=bool)
        for lit in self.literals:
            if lit.column not in table.covariates.columns:
                raise SchemaMismatch(lit.column, "column used by the literal universe is absent")
            cov[lit.id] = lit.evaluate(table.covariates[lit.column].to_numpy())

        offset = self.y_offset
        if table.n_units and np.min(table.outcome) + offset <= 0:
            extended = positive_offset(table.outcome, self.outcome_margin)
            msg = f"outcome offset extended from {offset:g} to {extended:g} for this split"
            logger.warning(msg)
            warnings.append(msg)
            offset = extended

        return BinarizedDataset(
            literals=self.literals,
            coverage=cov,
            treatment=table.treatment.astype(bool),
            outcome=table.outcome.astype(float) + offset,
            y_offset=offset,
            boundaries=self.boundaries,
            warnings=tuple(warnings),
            ite=None if table.ite is None else np.array(table.ite, dtype=float),
            propensity=None if table.propensity is None else np.array(table.propensity, dtype=float),
        )

    def to_dict(self) -> dict:
        return {
            "columns": [c.to_dict() for c in self.columns],
            "y_offset": self.y_offset,
            "outcome_margin": self.outcome_margin,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Binarizer":
        return cls([ColumnBins.from_dict(c) for c in d["columns"]], d["y_offset"], d.get("outcome_margin", 1.0))


def binarize(table: RawTable, bins_per_numeric: Optional[dict] = None,
             config: Optional[BinningConfig] = None) -> BinarizedDataset:
    """Fit a Binarizer on the table and apply it to the same table."""
    config = config or BinningConfig()
    if bins_per_numeric:
        config = replace(config, bins={**config.bins, **bins_per_numeric})
    return Binarizer.fit(table, config).transform(table)


def check_folds(treatment: np.ndarray, folds: np.ndarray, n_folds: int) -> None:
    """Every fold needs at least two treated and two control units."""
    for k in range(n_folds):
        in_fold = folds == k
        n_t = int(treatment[in_fold].sum())
        n_c = int(in_fold.sum()) - n_t
        if n_t < 2 or n_c < 2:
            raise InsufficientUnits(f"fold {k} has {n_t} treated and {n_c} control units")


def stratified_folds(treatment: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    """Fold label per unit, stratified by treatment."""
    from sklearn.model_selection import StratifiedKFold

    treatment = np.asarray(treatment).astype(int)
    n_t = int(treatment.sum())
    n_c = len(treatment) - n_t
    if min(n_t, n_c) < 2 * n_folds:
        raise InsufficientUnits(
            f"{n_t} treated / {n_c} control units cannot fill {n_folds} folds with 2 of each"
        )
    labels = np.empty(len(treatment), dtype=int)
    splitter = StratifiedKFold(n_splits=n_folds, shuffle=True, random_state=seed)
    for k, (_, test_idx) in enumerate(splitter.split(np.zeros(len(treatment)), treatment)):
        labels[test_idx] = k
    check_folds(treatment, labels, n_folds)
    return labels


def select_bin_count(table: RawTable, candidate_bins, folds: int, fit_config) -> dict:
    """
    Pick the numeric bin count by k-fold cross-validation.

    Each candidate runs the full fit pipeline on the training folds and is scored by
    the mean objective of its rules on the held-out fold. Ties go to fewer bins.
    `fit_config` is a RunConfig; its binning, propensity and search sections are used.
    """
    from .pipeline import fit_pipeline, heldout_score

    candidates = sorted(int(c) for c in candidate_bins)
    if not candidates or any(not 4 <= c <= 20 for c in candidates):
        raise ConfigError(f"bin candidates must lie in [4, 20], got {candidates}")
    if folds < 2:
        raise ConfigError("folds must be >= 2")

    labels = stratified_folds(table.treatment, folds, fit_config.seed)
    numeric_cols = [c for c in table.column_names if table.column_types[c] == NUMERIC]
    if len(candidates) == 1:
        return {c: candidates[0] for c in numeric_cols}

    best, best_score = candidates[0], -np.inf
    for count in candidates:
        binning = replace(fit_config.binning, default_bins=count, bins={})
        scores = []
        for k in range(folds):
            train = table.subset(np.flatnonzero(labels != k))
            test = table.subset(np.flatnonzero(labels == k))
            model = fit_pipeline(train, binning, fit_config.propensity, fit_config.search)
            scores.append(heldout_score(model, test))
        score = float(np.mean(scores))
        logger.info(f"bins={count}: held-out score {score:.4f}")
        if score > best_score:
            best, best_score = count, score
    return {c: best for c in numeric_cols}
