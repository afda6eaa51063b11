"""Base source class and dataset descriptions for the public case-study datasets."""

import asyncio
import io
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import httpx
import pandas as pd
from loguru import logger

from causal_rules import TOOL_NAME, __version__
from causal_rules.artifacts import meta_block, write_csv, write_json
from causal_rules.config import Schema
from causal_rules.dataset import RawTable, load_csv


@dataclass(frozen=True)
class DatasetInfo:
    """Where a dataset lives and how its columns map onto treatment, outcome and covariates."""
    id: str
    name: str
    urls: tuple
    description: str
    schema: Schema


class BaseSource(ABC):
    """Abstract base class for dataset sources."""

    HEADERS = {"User-Agent": f"{TOOL_NAME}/{__version__}", "Accept": "text/plain,text/csv,*/*"}

    def __init__(self, info: DatasetInfo):
        self.info = info

    @abstractmethod
    async def fetch(self, client: httpx.AsyncClient) -> pd.DataFrame:
        """
        Download the raw files and return one table with the column names the schema expects.

        Args:
            client: Open HTTP client to download with.
        """

    @property
    def csv_name(self) -> str:
        return f"{self.info.id}.csv"

    async def get_text(self, client: httpx.AsyncClient, url: str) -> str:
        response = await client.get(url)
        response.raise_for_status()
        return response.text

    async def download(self, cache_dir: Path, refresh: bool = False,
                       client: Optional[httpx.AsyncClient] = None) -> Path:
        """Fetch once and cache the CSV (plus its schema) under cache_dir."""
        path = Path(cache_dir) / self.csv_name
        if path.exists() and not refresh:
            logger.info(f"{self.info.name}: using cached {path}")
            return path

        if client is None:
            async with httpx.AsyncClient(headers=self.HEADERS, follow_redirects=True, timeout=30.0) as own:
                df = await self.fetch(own)
        else:
            df = await self.fetch(client)
        write_csv(path, df)
        write_json(path.with_suffix(".schema.json"), self.info.schema.to_dict(),
                   meta_block({"source": self.info.name}, 0, [path]))
        logger.info(f"{self.info.name}: {len(df)} rows written to {path}")
        return path

    def load(self, cache_dir: Path, refresh: bool = False,
             client: Optional[httpx.AsyncClient] = None) -> RawTable:
        path = asyncio.run(self.download(cache_dir, refresh, client))
        return self.read(path)

    def read(self, path: Path) -> RawTable:
        return load_csv(path, self.info.schema)


def read_table(text: str, **kwargs) -> pd.DataFrame:
    return pd.read_csv(io.StringIO(text), **kwargs)
