import json

import pytest

from causal_rules.artifacts import meta_block, meta_comment, read_json, sha256_file, write_json
from causal_rules.config import (
    BinningConfig,
    GridSpec,
    PropensityConfig,
    RunConfig,
    Schema,
    SearchConfig,
    load_config_file,
    resolve_config,
)
from causal_rules.errors import ConfigError
from causal_rules.logs import LOG_LEVEL_ENV, configure_logging


def test_defaults():
    cfg = resolve_config({}, {})
    assert cfg.search == SearchConfig()
    assert (cfg.search.lam, cfg.search.k, cfg.search.max_len, cfg.search.m_min) == (0.1, 2, 3, 10)
    assert (cfg.search.n_starts, cfg.search.surrogate_bound) == (8, "max")
    assert cfg.propensity == PropensityConfig()
    assert cfg.threads >= 1


def test_flags_beat_file_beat_defaults():
    file_data = {"search": {"lambda": 1.0, "K": 4}, "seed": 7}
    cfg = resolve_config(file_data, {"search": {"lam": 0.2}})
    assert cfg.search.lam == 0.2
    assert cfg.search.k == 4
    assert cfg.search.max_len == 3
    assert cfg.seed == 7


def test_validation():
    with pytest.raises(ConfigError):
        SearchConfig(lam=-1)
    with pytest.raises(ConfigError):
        SearchConfig(epsilon=0)
    with pytest.raises(ConfigError):
        SearchConfig(n_starts=0)
    with pytest.raises(ConfigError):
        SearchConfig(surrogate_bound="min")
    with pytest.raises(ConfigError):
        BinningConfig(default_bins=1)
    with pytest.raises(ConfigError):
        PropensityConfig(clip_lo=0.6)
    with pytest.raises(ConfigError):
        GridSpec(lambdas=())
    with pytest.raises(ConfigError):
        resolve_config({"search": {"depth": 3}}, {})
    with pytest.raises(ConfigError):
        resolve_config({"colour": "red"}, {})
    with pytest.raises(ConfigError):
        resolve_config({}, {"": {"cv_folds": 1}})


def test_schema_treatment_values_become_text():
    schema = Schema.from_dict({"treatment": "pclass", "treatment_values": [1, 2]})
    assert schema.treatment_values == ("1", "2")


def test_schema_file_meta_is_ignored():
    schema = Schema.from_dict({"meta": {"tool": "causal-rules"}, "treatment": "trt"})
    assert schema == Schema(treatment="trt")


def test_schema_overlay_keeps_stored_roles():
    stored = Schema(treatment="trt", outcome="out", categorical=("sex",))
    assert Schema().overlay(stored) == stored
    merged = Schema(propensity="e").overlay(stored)
    assert merged == Schema(treatment="trt", outcome="out", categorical=("sex",), propensity="e")


def test_grid_points():
    grid = GridSpec.from_dict({"lambda": [0.1, 1.0], "L": [3]})
    assert grid.points() == [(0.1, 3), (1.0, 3)]


def test_config_file(tmp_path):
    assert load_config_file(None) == {}
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"grid": {"L": [2]}}))
    assert resolve_config(load_config_file(str(path)), {}).grid.max_lens == (2,)


def test_search_config_round_trip():
    cfg = SearchConfig(lam=0.3, k=1)
    d = cfg.to_dict()
    assert d["lambda"] == 0.3 and "lam" not in d
    assert SearchConfig.from_dict(d) == cfg


def test_meta_block_and_json(tmp_path):
    data = tmp_path / "in.csv"
    data.write_text("t,y\n1,2\n")
    meta = meta_block(RunConfig().to_dict(), 3, [data])
    assert meta["inputs"] == {str(data): sha256_file(data)}
    assert set(meta) == {"tool", "version", "seed", "prng", "config", "inputs"}

    out = write_json(tmp_path / "nested" / "out.json", {"value": 1.5}, meta)
    assert list(read_json(out)) == ["meta", "value"]
    assert [p.name for p in out.parent.iterdir()] == ["out.json"]

    header = meta_comment(meta)
    assert header.startswith("# causal-rules ") and header.endswith("\n")
    assert f"in.csv:{sha256_file(data)[:12]}" in header


def test_log_level_from_environment(monkeypatch):
    monkeypatch.setenv(LOG_LEVEL_ENV, "debug")
    assert configure_logging() == "DEBUG"
    assert configure_logging("warning") == "WARNING"
    monkeypatch.delenv(LOG_LEVEL_ENV)
    assert configure_logging() == "INFO"
