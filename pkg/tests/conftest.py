import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from causal_rules.dataset import BinarizedDataset, Literal  # noqa: E402


def make_dataset(features, treatment, outcome, weights=None) -> BinarizedDataset:
    """One complementary literal pair (x_k == 1 / x_k != 1) per boolean feature column."""
    features = np.asarray(features, dtype=bool)
    literals, rows = [], []
    for k in range(features.shape[1]):
        i = 2 * k
        literals += [Literal(i, f"x{k}", "eq", 1.0, i + 1), Literal(i + 1, f"x{k}", "ne", 1.0, i)]
        rows += [features[:, k], ~features[:, k]]
    ds = BinarizedDataset(
        literals=tuple(literals),
        coverage=np.array(rows, dtype=bool),
        treatment=np.asarray(treatment, dtype=bool),
        outcome=np.asarray(outcome, dtype=float),
    )
    if weights is None:
        weights = np.ones(len(ds.outcome))
    return ds.with_weights(weights)


def random_instance(seed: int, n: int = 48, p: int = 4) -> BinarizedDataset:
    rng = np.random.default_rng(seed)
    features = rng.random((n, p)) < 0.5
    treatment = np.arange(n) % 2 == 0
    rng.shuffle(treatment)
    outcome = rng.uniform(1.0, 5.0, n) + 2.0 * treatment * features[:, 0]
    weights = rng.uniform(1.0, 3.0, n)
    return make_dataset(features, treatment, outcome, weights)


def planted_frame(n: int = 200, seed: int = 0):
    """y = 2 + 4 * t * x1 + small noise; x2 is noise."""
    import pandas as pd

    rng = np.random.default_rng(seed)
    x1 = (rng.random(n) < 0.5).astype(int)
    x2 = rng.uniform(0, 10, n).round(2)
    t = np.arange(n) % 2
    y = 2.0 + 4.0 * t * x1 + rng.normal(0, 0.1, n)
    return pd.DataFrame({"x1": x1, "x2": x2, "t": t, "y": y.round(4)})


@pytest.fixture
def tiny_ds():
    # 8 units: x0 marks units 0-3, x1 marks the even units; treated are 0, 1, 4, 5
    features = np.array([[1, 1], [1, 0], [1, 1], [1, 0], [0, 1], [0, 0], [0, 1], [0, 0]])
    treatment = np.array([1, 1, 0, 0, 1, 1, 0, 0])
    outcome = np.array([6.0, 4.0, 2.0, 2.0, 3.0, 1.0, 1.0, 3.0])
    return make_dataset(features, treatment, outcome)


@pytest.fixture
def planted_csv(tmp_path):
    path = tmp_path / "planted.csv"
    planted_frame().to_csv(path, index=False)
    return path
