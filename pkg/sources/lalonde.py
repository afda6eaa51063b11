"""
Lalonde / NSW job-training experiment, Dehejia-Wahba subsample with 1974 earnings.

Data source: two whitespace-separated text files (treated, control) without headers:
treat, age, education, black, hispanic, married, nodegree, re74, re75, re78.
"""

import asyncio

import httpx
import pandas as pd

from causal_rules.config import Schema

from .base import BaseSource, DatasetInfo, read_table

BASE_URL = "https://users.nber.org/~rdehejia/data"

COLUMNS = ["treat", "age", "education", "black", "hispanic", "married", "nodegree", "re74", "re75", "re78"]

LALONDE = DatasetInfo(
    id="lalonde",
    name="Lalonde (NSW)",
    urls=(f"{BASE_URL}/nswre74_treated.txt", f"{BASE_URL}/nswre74_control.txt"),
    description="1978 earnings after the NSW job-training programme; T = programme participation",
    schema=Schema(
        treatment="treat",
        outcome="re78",
        covariates=("age", "education", "black", "hispanic", "married", "nodegree", "re74", "re75"),
        numeric=("age", "education", "re74", "re75"),
    ),
)


class LalondeSource(BaseSource):
    def __init__(self):
        super().__init__(LALONDE)

    async def fetch(self, client: httpx.AsyncClient) -> pd.DataFrame:
        texts = await asyncio.gather(*(self.get_text(client, url) for url in self.info.urls))
        parts = [read_table(text, sep=r"\s+", header=None, names=COLUMNS, dtype=str) for text in texts]
        df = pd.concat(parts, ignore_index=True)
        # Files write 0/1 flags as floats ("1.00"); keep them as plain 0/1.
        df["treat"] = pd.to_numeric(df["treat"]).astype(int).astype(str)
        return df
