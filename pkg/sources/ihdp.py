"""
IHDP semi-synthetic benchmark, replications 1-10 as distributed with CEVAE.

Each replication is a headerless CSV of 747 units: treatment, y_factual, y_cfactual,
mu0, mu1, x1..x25 (x1-x6 continuous, x7-x25 binary or categorical). The true
individual effect is mu1 - mu0.
"""

import asyncio
from pathlib import Path

import httpx
import pandas as pd

from causal_rules.dataset import RawTable
from causal_rules.synth import IHDP_COLUMNS, IHDP_SCHEMA, ihdp_load

from .base import BaseSource, DatasetInfo, read_table

BASE_URL = "https://raw.githubusercontent.com/AMLab-Amsterdam/CEVAE/master/datasets/IHDP/csv"
REPLICATIONS = range(1, 11)

IHDP = DatasetInfo(
    id="ihdp",
    name="IHDP",
    urls=tuple(f"{BASE_URL}/ihdp_npci_{i}.csv" for i in REPLICATIONS),
    description="Infant Health and Development Program, simulated outcomes with known effects",
    schema=IHDP_SCHEMA,
)


class IHDPSource(BaseSource):
    def __init__(self):
        super().__init__(IHDP)

    async def fetch(self, client: httpx.AsyncClient) -> pd.DataFrame:
        texts = await asyncio.gather(*(self.get_text(client, url) for url in self.info.urls))
        parts = [read_table(text, header=None, names=IHDP_COLUMNS, dtype=str) for text in texts]
        df = pd.concat(parts, ignore_index=True)
        df["ite"] = (pd.to_numeric(df["mu1"]) - pd.to_numeric(df["mu0"])).astype(str)
        return df

    def read(self, path: Path) -> RawTable:
        return ihdp_load(path)
