"""
Case studies on the public datasets, replayed offline: the fixtures below are written
in each source's download format and served through httpx.MockTransport.
"""

import numpy as np
import pandas as pd

from causal_rules.config import SearchConfig
from causal_rules.dataset import binarize
from causal_rules.pipeline import fit_pipeline
from causal_rules.propensity import ipw_ate, weight_dataset
from sources.lalonde import LalondeSource
from sources.titanic import TitanicSource

from test_sources import client_for

CASE_STUDY_VARIABLES = {"sex", "fare", "age", "sibsp", "parch"}


def lalonde_text(treated: bool, n: int, rng: np.random.Generator) -> str:
    """Rows in the NSW text layout; the programme adds about 1700 to 1978 earnings."""
    age = rng.integers(17, 55, n)
    education = rng.integers(3, 16, n)
    black = rng.random(n) < 0.8
    hispanic = ~black & (rng.random(n) < 0.5)
    married = rng.random(n) < 0.17
    nodegree = education < 12
    re74 = np.where(rng.random(n) < 0.7, 0.0, rng.gamma(2.0, 3000.0, n))
    re75 = np.where(rng.random(n) < 0.6, 0.0, rng.gamma(2.0, 2500.0, n))
    re78 = np.clip(4500.0 + 1700.0 * treated + rng.normal(0.0, 1500.0, n), 0.0, None)
    rows = np.column_stack([np.full(n, float(treated)), age, education, black, hispanic, married,
                            nodegree, re74, re75, re78]).astype(float)
    return "".join(" ".join(f"{v:9.2f}" for v in row) + "\n" for row in rows)


def titanic_csv(n: int = 714, seed: int = 11) -> str:
    """Kaggle layout; survival depends on sex and class only, and class shifts the fare."""
    rng = np.random.default_rng(seed)
    female = rng.random(n) < 0.36
    pclass = rng.choice([1, 2, 3], size=n, p=[0.26, 0.24, 0.50])
    premium = pclass < 3
    survive_p = np.select([female & premium, female, premium], [0.95, 0.30, 0.30], default=0.14)
    fare = np.where(premium, rng.uniform(10.0, 80.0, n), rng.uniform(5.0, 30.0, n)).round(4)
    df = pd.DataFrame({
        "PassengerId": np.arange(1, n + 1),
        "Survived": (rng.random(n) < survive_p).astype(int),
        "Pclass": pclass,
        "Name": [f"Passenger, Mx. Number {i}" for i in range(n)],
        "Sex": np.where(female, "female", "male"),
        "Age": rng.integers(1, 70, n),
        "SibSp": rng.choice([0, 1, 2], size=n, p=[0.7, 0.25, 0.05]),
        "Parch": rng.choice([0, 1, 2], size=n, p=[0.75, 0.15, 0.10]),
        "Ticket": [f"T{i}" for i in range(n)],
        "Fare": fare,
        "Cabin": "",
        "Embarked": rng.choice(["S", "C", "Q"], size=n, p=[0.7, 0.2, 0.1]),
    })
    return df.to_csv(index=False)


def test_lalonde_population_effect_is_in_the_published_range(tmp_path):
    rng = np.random.default_rng(5)
    source = LalondeSource()
    texts = [lalonde_text(True, 185, rng), lalonde_text(False, 260, rng)]
    table = source.load(tmp_path, client=client_for(dict(zip(source.info.urls, texts))))
    assert (table.n_units, table.n_treated) == (445, 185)

    ds, model = weight_dataset(binarize(table))
    assert model is not None
    assert 1100 <= ipw_ate(ds) <= 2300


def test_titanic_top_rule_is_a_strong_subgroup(tmp_path):
    source = TitanicSource()
    table = source.load(tmp_path, client=client_for({source.info.urls[0]: titanic_csv()}))
    assert table.n_units == 714

    model = fit_pipeline(table, search=SearchConfig())
    assert len(model.ruleset) >= 1
    top = model.ruleset.rules[0]
    assert top.tau >= 0.5
    columns = {model.binarizer.literals[i].column for i in top.rule.literal_ids}
    assert columns & CASE_STUDY_VARIABLES
