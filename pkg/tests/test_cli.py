import json

import numpy as np
import pandas as pd
import pytest

from causal_rules.cli import build_parser, collect_overrides, main


def read(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_generate_is_reproducible(tmp_path):
    argv = ["generate", "--n", "300", "--cat", "2", "--num", "2", "--seed", "4", "-o", str(tmp_path)]
    assert main(argv) == 0
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    assert set(first) == {"data.csv", "truth.json", "schema.json"}
    assert main(argv) == 0
    assert {p.name: p.read_bytes() for p in tmp_path.iterdir()} == first

    truth = read(tmp_path / "truth.json")
    assert list(truth)[0] == "meta"
    assert truth["meta"]["seed"] == 4
    assert truth["meta"]["prng"] == "numpy.random.PCG64"
    df = pd.read_csv(tmp_path / "data.csv")
    assert list(df.columns) == ["cat_1", "cat_2", "num_1", "num_2", "t", "y"]
    assert len(truth["te"]) == len(df) == 300
    schema = read(tmp_path / "schema.json")
    assert list(schema)[0] == "meta"
    assert schema["meta"] == truth["meta"]


def test_generated_schema_file_is_accepted_by_fit(tmp_path):
    assert main(["generate", "--n", "400", "--cat", "2", "--num", "2", "--seed", "2", "-o", str(tmp_path)]) == 0
    code = main(["fit", "--data", str(tmp_path / "data.csv"), "--schema", str(tmp_path / "schema.json"),
                 "--min-support", "5", "-o", str(tmp_path / "fit")])
    assert code in (0, 1)
    model = read(tmp_path / "fit" / "model.json")
    assert model["schema"]["categorical"] == ["cat_1", "cat_2"]
    assert "meta" not in model["schema"]


def test_fit_planted_effect(planted_csv, tmp_path, capsys):
    code = main(["fit", "--data", str(planted_csv), "--k", "2", "--min-support", "5", "-o", str(tmp_path)])
    assert code == 0
    printed = capsys.readouterr().out.splitlines()
    assert printed and printed[0].startswith("IF ")
    model = read(tmp_path / "model.json")
    assert str(planted_csv) in model["meta"]["inputs"]
    assert 3.5 <= model["rules"][0]["tau"] <= 4.5
    assert "x1" in model["rules"][0]["text"]
    header, *lines = (tmp_path / "rules.txt").read_text(encoding="utf-8").splitlines()
    assert header.startswith("# causal-rules ")
    assert "seed=0" in header and "planted.csv:" in header
    assert lines == printed


def test_evaluate_saved_model(planted_csv, tmp_path):
    assert main(["fit", "--data", str(planted_csv), "--min-support", "5", "-o", str(tmp_path / "fit")]) == 0
    model = read(tmp_path / "fit" / "model.json")
    out = tmp_path / "eval"
    code = main(["evaluate", "--data", str(planted_csv), "--model", str(tmp_path / "fit" / "model.json"),
                 "-o", str(out)])
    assert code == 0
    report = read(out / "report.json")
    assert sorted(r["tau"] for r in report["rules"]) == pytest.approx(sorted(r["tau"] for r in model["rules"]))
    assert (out / "report.txt").exists()
    assert (out / "report_tau.csv").exists()



def test_evaluate_merges_flags_with_the_stored_schema(planted_csv, tmp_path):
    renamed = tmp_path / "renamed.csv"
    pd.read_csv(planted_csv).rename(columns={"t": "trt", "y": "out"}).to_csv(renamed, index=False)
    assert main(["fit", "--data", str(renamed), "--treatment-col", "trt", "--outcome-col", "out",
                 "--min-support", "5", "-o", str(tmp_path / "fit")]) == 0
    # only the treated values are given here; the column roles come from the model
    code = main(["evaluate", "--data", str(renamed), "--model", str(tmp_path / "fit" / "model.json"),
                 "--treated-values", "1", "-o", str(tmp_path / "eval")])
    assert code == 0
    assert read(tmp_path / "eval" / "report.json")["rules"]

def test_oracle_compare(planted_csv, tmp_path):
    code = main(["oracle", "--data", str(planted_csv), "--max-len", "1", "--min-support", "5", "--compare",
                 "-o", str(tmp_path)])
    assert code == 0
    result = read(tmp_path / "oracle.json")
    assert result["f"] > 0
    assert result["ratio"] <= 1.0 + 1e-9


def test_missing_column_exits_with_usage_code(planted_csv, capsys):
    assert main(["fit", "--data", str(planted_csv), "--outcome-col", "nope"]) == 2
    assert "nope" in capsys.readouterr().err


def test_missing_data_flag():
    assert main(["fit"]) == 2


def test_unreadable_file(tmp_path):
    assert main(["fit", "--data", str(tmp_path / "absent.csv")]) == 2


def test_bad_grid_key(planted_csv):
    assert main(["evaluate", "--data", str(planted_csv), "--grid", "depth=1,2"]) == 2


def test_no_rule_exits_with_one(tmp_path, capsys):
    rng = np.random.default_rng(0)
    df = pd.DataFrame({
        "a": (rng.random(40) < 0.5).astype(int),
        "b": (rng.random(40) < 0.5).astype(int),
        "t": np.arange(40) % 2,
        "y": rng.choice([1.0, 100.0], size=40),
    })
    path = tmp_path / "heavy.csv"
    df.to_csv(path, index=False)
    code = main(["fit", "--data", str(path), "--lambda", "1", "--min-support", "5", "--max-len", "2",
                 "-o", str(tmp_path / "out")])
    assert code == 1
    assert "No rule" in capsys.readouterr().out


def test_config_file_and_flags(planted_csv, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"search": {"K": 1, "min_support": 5}}))
    assert main(["fit", "--config", str(config), "--data", str(planted_csv), "-o", str(tmp_path)]) == 0
    model = read(tmp_path / "model.json")
    assert len(model["rules"]) == 1
    assert model["hyperparams"]["K"] == 1
    assert model["hyperparams"]["m_min"] == 5


def test_argparse_errors():
    with pytest.raises(SystemExit) as e:
        main(["fit", "--k", "many"])
    assert e.value.code == 2
    with pytest.raises(SystemExit):
        main([])


def test_overrides_only_carry_passed_flags():
    args = build_parser().parse_args(["fit", "--data", "x.csv", "--lambda", "0.2", "--bins", "4,8", "--seed", "3"])
    overrides = collect_overrides(args)
    assert overrides["search"] == {"lam": 0.2, "seed": 3}
    assert overrides[""]["bin_candidates"] == (4, 8)
    assert overrides[""]["seed"] == 3
    assert overrides["schema"] == {}
