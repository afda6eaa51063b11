import numpy as np
import pytest

from causal_rules.config import SynthConfig
from causal_rules.dataset import CATEGORICAL, NUMERIC
from causal_rules.errors import ConfigError, MissingColumn
from causal_rules.synth import IHDP_COLUMNS, SynthTruth, design_matrix, generate, ihdp_load, synth_schema, to_frame


@pytest.fixture(scope="module")
def small():
    return generate(SynthConfig(n_units=500, n_categorical=3, n_numeric=2, seed=1))


def test_outcomes_are_positive(small):
    table, truth = small
    assert table.n_units == 500
    assert (table.outcome > 0).all()
    assert truth.y_offset >= 0


def test_effects_follow_alpha(small):
    table, truth = small
    x, names = design_matrix(table.covariates, 3, 2)
    assert x.shape == (500, 17)
    assert names[:5] == ["cat_1=A", "cat_1=B", "cat_1=C", "cat_1=D", "cat_1=E"]
    assert names[-2:] == ["num_1", "num_2"]
    np.testing.assert_allclose(truth.te, x @ truth.alpha)
    np.testing.assert_allclose(table.ite, truth.te)


def test_outcome_model(small):
    table, truth = small
    x, _ = design_matrix(table.covariates, 3, 2)
    expected = table.treatment * truth.te + x @ truth.gamma + truth.noise + truth.y_offset
    np.testing.assert_allclose(table.outcome, expected)


def test_parameter_ranges(small):
    _, truth = small
    assert ((truth.propensity > 0) & (truth.propensity < 1)).all()
    assert ((truth.beta >= 0) & (truth.beta <= 0.6)).all()
    assert ((truth.alpha >= 0) & (truth.alpha <= 2)).all()
    assert ((truth.eta >= -1) & (truth.eta <= 1)).all()
    assert len(np.unique(truth.eta)) > 1


def test_seed_reproduces_data(small):
    table, truth = small
    again, truth_again = generate(SynthConfig(n_units=500, n_categorical=3, n_numeric=2, seed=1))
    np.testing.assert_array_equal(table.outcome, again.outcome)
    np.testing.assert_array_equal(table.treatment, again.treatment)
    assert truth.to_dict() == truth_again.to_dict()
    other, _ = generate(SynthConfig(n_units=500, n_categorical=3, n_numeric=2, seed=2))
    assert not np.array_equal(table.outcome, other.outcome)


@pytest.mark.slow
def test_global_eta_confounds_treatment():
    table, truth = generate(SynthConfig(n_units=10000, seed=3, eta_per_unit=False))
    assert len(np.unique(truth.eta)) == 1
    assert np.corrcoef(table.treatment, truth.propensity)[0, 1] > 0.05


def test_observed_frame_and_schema(small):
    table, truth = small
    df = to_frame(table)
    assert list(df.columns) == ["cat_1", "cat_2", "cat_3", "num_1", "num_2", "t", "y"]
    schema = synth_schema(truth.config)
    assert schema.categorical == ("cat_1", "cat_2", "cat_3")
    assert table.column_types["cat_1"] == CATEGORICAL
    assert table.column_types["num_1"] == NUMERIC


def test_truth_sidecar_round_trip(small):
    _, truth = small
    restored = SynthTruth.from_dict(truth.to_dict())
    np.testing.assert_allclose(restored.te, truth.te)
    assert restored.config == truth.config
    assert restored.feature_names == truth.feature_names


def test_config_validation():
    with pytest.raises(ConfigError):
        SynthConfig(b=0)
    with pytest.raises(ConfigError):
        SynthConfig(n_categorical=0, n_numeric=0)


def ihdp_rows(n=6, n_cols=30):
    rng = np.random.default_rng(0)
    rows = []
    for i in range(n):
        mu0, mu1 = rng.uniform(1, 3), rng.uniform(4, 6)
        row = [i % 2, 2.0 + i, 1.0 + i, mu0, mu1]
        row += list(rng.normal(size=6).round(3)) + [int(v) for v in rng.integers(0, 2, 19)]
        rows.append(",".join(str(v) for v in row[:n_cols]))
    return rows


def test_ihdp_headerless_file(tmp_path):
    path = tmp_path / "ihdp_npci_1.csv"
    path.write_text("\n".join(ihdp_rows()) + "\n")
    table = ihdp_load(path)
    assert table.n_units == 6
    assert table.treatment.tolist() == [0, 1, 0, 1, 0, 1]
    assert table.outcome.tolist() == [2.0, 3.0, 4.0, 5.0, 6.0, 7.0]
    assert ((table.ite > 1) & (table.ite < 5)).all()
    assert table.column_types["x1"] == NUMERIC
    assert table.column_types["x7"] == CATEGORICAL


def test_ihdp_wrong_width(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("\n".join(ihdp_rows(n_cols=29)) + "\n")
    with pytest.raises(MissingColumn):
        ihdp_load(path)


def test_ihdp_without_truth_columns(tmp_path):
    header = ["treatment", "y_factual"] + IHDP_COLUMNS[5:]
    rows = [",".join(r.split(",")[:2] + r.split(",")[5:]) for r in ihdp_rows()]
    path = tmp_path / "ihdp.csv"
    path.write_text("\n".join([",".join(header)] + rows) + "\n")
    table = ihdp_load(path)
    assert table.ite is None
    assert table.n_units == 6
