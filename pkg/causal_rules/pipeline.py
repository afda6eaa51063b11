"""End-to-end fit: binarize, weight, search. Also re-applies a fitted model to new data."""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from loguru import logger

from .config import BinningConfig, PropensityConfig, SearchConfig
from .dataset import BinarizedDataset, Binarizer, RawTable
from .propensity import PropensityModel, score_histogram, weight_dataset
from .rulecore import RuleSet, q_stats
from .search import ProgressCallback, learn_ruleset


@dataclass(frozen=True, eq=False)
class FittedModel:
    binarizer: Binarizer
    propensity: Optional[PropensityModel]
    ruleset: RuleSet
    search: SearchConfig
    propensity_config: PropensityConfig
    # score histogram per group on the training data, the propensity overlap diagnostic
    overlap: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "binarizer": self.binarizer.to_dict(),
            "propensity": None if self.propensity is None else self.propensity.to_dict(),
            "propensity_config": asdict(self.propensity_config),
            "search_config": self.search.to_dict(),
            "propensity_overlap": self.overlap,
            **self.ruleset.to_dict(self.binarizer.literals),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        return cls(
            binarizer=Binarizer.from_dict(d["binarizer"]),
            propensity=None if d.get("propensity") is None else PropensityModel.from_dict(d["propensity"]),
            ruleset=RuleSet.from_dict(d),
            search=SearchConfig.from_dict(d["search_config"]),
            propensity_config=PropensityConfig.from_dict(d.get("propensity_config")),
            overlap=d.get("propensity_overlap"),
        )


def fit_pipeline(table: RawTable, binning: Optional[BinningConfig] = None,
                 propensity: Optional[PropensityConfig] = None, search: Optional[SearchConfig] = None,
                 progress: Optional[ProgressCallback] = None) -> FittedModel:
    binning = binning or BinningConfig()
    propensity = propensity or PropensityConfig()
    search = search or SearchConfig()

    binarizer = Binarizer.fit(table, binning)
    ds, model = weight_dataset(binarizer.transform(table), propensity)
    scores = ds.propensity if model is None else model.predict(ds)
    overlap = score_histogram(scores, ds.treatment)
    ruleset = learn_ruleset(ds, search, progress)
    logger.info(f"Fitted {len(ruleset)} rules on {table.n_units} units")
    return FittedModel(binarizer, model, ruleset, search, propensity, overlap)


def prepare(model: FittedModel, table: RawTable) -> BinarizedDataset:
    """Binarize a table with the model's literal universe and weight it with the model's propensities."""
    ds = model.binarizer.transform(table)
    for r in model.ruleset:
        r.rule.validate(ds, model.search.max_len)
    weighted, _ = weight_dataset(ds, model.propensity_config, model.propensity)
    return weighted


def heldout_score(model: FittedModel, table: RawTable) -> float:
    """Mean unpenalized objective of the model's rules on new data; -inf for an empty rule set."""
    if not model.ruleset.rules:
        return -np.inf
    ds = prepare(model, table)
    values = [q_stats(r.rule, ds, lam=model.search.lam).f_value for r in model.ruleset]
    return float(np.mean(values))
