"""
Titanic passenger list.

Data source: the Kaggle training CSV (891 passengers), mirrored on GitHub.

Treatment is travelling in a premium class (1st or 2nd), the outcome is survival.
Rows without an age are dropped when the CSV is loaded.
"""

import httpx
import pandas as pd

from causal_rules.config import Schema

from .base import BaseSource, DatasetInfo, read_table

TITANIC = DatasetInfo(
    id="titanic",
    name="Titanic",
    urls=("https://raw.githubusercontent.com/datasciencedojo/datasets/master/titanic.csv",),
    description="Survival of Titanic passengers; T = premium class (pclass 1 or 2)",
    schema=Schema(
        treatment="pclass",
        outcome="survived",
        treatment_values=("1", "2"),
        covariates=("sex", "age", "sibsp", "parch", "fare", "embarked"),
        numeric=("age", "fare"),
        categorical=("sex", "embarked"),
    ),
)

COLUMNS = {
    "Survived": "survived",
    "Pclass": "pclass",
    "Sex": "sex",
    "Age": "age",
    "SibSp": "sibsp",
    "Parch": "parch",
    "Fare": "fare",
    "Embarked": "embarked",
}


class TitanicSource(BaseSource):
    def __init__(self):
        super().__init__(TITANIC)

    async def fetch(self, client: httpx.AsyncClient) -> pd.DataFrame:
        df = read_table(await self.get_text(client, self.info.urls[0]), dtype=str)
        missing = [c for c in COLUMNS if c not in df.columns]
        if missing:
            raise ValueError(f"Titanic CSV lacks columns {missing}")
        return df[list(COLUMNS)].rename(columns=COLUMNS)
