"""Output files: metadata block, input digests and atomic writes."""

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np
import pandas as pd

from . import TOOL_NAME, __version__
from .synth import PRNG

PathLike = Union[str, Path]


def sha256_file(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def meta_block(config: Optional[dict], seed: int, inputs: Iterable[PathLike] = ()) -> dict:
    """Provenance stamped into every JSON artifact. No timestamps, so reruns are byte-identical."""
    return {
        "tool": TOOL_NAME,
        "version": __version__,
        "seed": seed,
        "prng": PRNG,
        "config": config,
        "inputs": {str(p): sha256_file(p) for p in inputs},
    }


def meta_comment(meta: dict) -> str:
    """One-line provenance header for plain-text artifacts."""
    inputs = " ".join(f"{Path(p).name}:{digest[:12]}" for p, digest in meta["inputs"].items())
    line = f"# {meta['tool']} {meta['version']} seed={meta['seed']}"
    return f"{line} inputs={inputs}\n" if inputs else line + "\n"


def _default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (tuple, set)):
        return list(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def write_text(path: PathLike, text: str) -> Path:
    """Write through a temporary file in the target directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def write_json(path: PathLike, payload: dict, meta: Optional[dict] = None) -> Path:
    if meta is not None:
        payload = {"meta": meta, **payload}
    text = json.dumps(payload, indent=2, ensure_ascii=False, default=_default, allow_nan=True)
    return write_text(path, text + "\n")


def write_csv(path: PathLike, frame: pd.DataFrame, index: bool = False) -> Path:
    return write_text(path, frame.to_csv(index=index, lineterminator="\n"))


def read_json(path: PathLike) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
