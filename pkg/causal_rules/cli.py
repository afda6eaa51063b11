"""
Command-line interface.

    causal-rules generate  --n 3000 --cat 5 --num 5 --b 0.6 --seed 1 -o out/
    causal-rules fit       --data out/data.csv --k 2 --max-len 3 -o out/
    causal-rules evaluate  --data out/data.csv --model out/model.json --truth out/truth.json -o out/
    causal-rules evaluate  --data out/data.csv --grid lambda=0.1,0.5,1.0 --grid L=3,4 --cv-folds 5
    causal-rules bench     --n 1000,3000 --d 10,20,40,80
    causal-rules oracle    --data small.csv --max-len 2
    causal-rules fetch     --source titanic -o data/

Exit codes: 0 success, 1 no rule found, 2 usage, data or configuration error.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from loguru import logger

from . import TOOL_NAME, __version__
from .artifacts import meta_block, meta_comment, read_json, write_csv, write_json, write_text
from .config import RunConfig, Schema, load_config_file, resolve_config
from .dataset import Binarizer, load_csv, select_bin_count
from .errors import CausalRulesError, ConfigError, LengthMismatch, NoFeasibleRule
from .evaluation import benchmark, brute_force_best_rule, cross_validate, evaluate_model, linear_fit
from .logs import configure_logging
from .pipeline import FittedModel, fit_pipeline
from .propensity import weight_dataset
from .search import ProgressEvent, optimize_rule
from .synth import SynthTruth, generate, synth_schema, to_frame

EXIT_OK = 0
EXIT_NO_RULE = 1
EXIT_USAGE = 2


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("-o", "--out", help="output directory")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="input CSV")
    data.add_argument("--schema", help="JSON schema file (column roles)")
    data.add_argument("--treatment-col")
    data.add_argument("--outcome-col")
    data.add_argument("--propensity-col")
    data.add_argument("--ite-col")
    data.add_argument("--treated-values", type=lambda s: tuple(s.split(",")),
                      help="comma-separated raw treatment values meaning T=1")

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--lambda", dest="lam", type=float)
    search.add_argument("--k", type=int)
    search.add_argument("--max-len", type=int)
    search.add_argument("--epsilon", type=float)
    search.add_argument("--min-support", type=int)
    search.add_argument("--fallback", action="store_true", default=None,
                        help="predict the population IPW effect for uncovered units")
    search.add_argument("--bins", type=_ints, help="bin count, or a comma list to choose by CV")
    search.add_argument("--cv-folds", type=int)
    search.add_argument("--grid", action="append", metavar="KEY=V1,V2",
                        help="grid values for lambda or L; repeatable")

    parser = argparse.ArgumentParser(prog=TOOL_NAME, description="Learn causal rules from tabular data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", parents=[common], help="write a synthetic dataset")
    gen.add_argument("--n", type=int)
    gen.add_argument("--cat", type=int)
    gen.add_argument("--num", type=int)
    gen.add_argument("--b", type=float)
    gen.add_argument("--global-eta", action="store_true", default=None)

    sub.add_parser("fit", parents=[common, data, search], help="learn a rule set")

    ev = sub.add_parser("evaluate", parents=[common, data, search],
                        help="score a model, or cross-validate when no model is given")
    ev.add_argument("--model", help="model JSON written by fit")
    ev.add_argument("--truth", help="truth sidecar written by generate")

    bench = sub.add_parser("bench", parents=[common, search], help="time fits against unit and covariate counts")
    bench.add_argument("--n", type=_ints, default=(3000,), help="unit count, or a comma list")
    bench.add_argument("--d", type=_ints, default=(10, 20, 40, 80))
    bench.add_argument("--repeats", type=int, default=3)

    oracle = sub.add_parser("oracle", parents=[common, data, search], help="exhaustive best rule")
    oracle.add_argument("--compare", action="store_true", help="also run the optimizer and report f ratio")

    fetch = sub.add_parser("fetch", parents=[common], help="download a public dataset")
    fetch.add_argument("--source", required=True, choices=["titanic", "lalonde", "ihdp"])
    fetch.add_argument("--refresh", action="store_true")
    return parser


def _grid_overrides(entries: Optional[list]) -> dict:
    grid = {}
    for entry in entries or ():
        key, _, values = entry.partition("=")
        key = key.strip()
        if key in ("lambda", "lambdas"):
            grid["lambdas"] = _floats(values)
        elif key in ("L", "max_len", "max_lens"):
            grid["max_lens"] = _ints(values)
        else:
            raise ConfigError(f"--grid expects lambda=... or L=..., got {entry!r}")
    return grid


def collect_overrides(args: argparse.Namespace) -> dict:
    """Only the flags the user actually passed."""
    get = vars(args).get
    overrides = {"": {}, "schema": {}, "search": {}, "synth": {}, "binning": {}, "grid": {}}

    if get("schema"):
        overrides["schema"].update(load_config_file(args.schema))
    for flag, key in (("treatment_col", "treatment"), ("outcome_col", "outcome"),
                      ("propensity_col", "propensity"), ("ite_col", "ite"), ("treated_values", "treatment_values")):
        if get(flag) is not None:
            overrides["schema"][key] = get(flag)

    for flag, key in (("lam", "lam"), ("k", "k"), ("max_len", "max_len"), ("epsilon", "epsilon"),
                      ("min_support", "m_min"), ("fallback", "fallback")):
        if get(flag) is not None:
            overrides["search"][key] = get(flag)

    if args.command == "generate":
        for flag, key in (("n", "n_units"), ("cat", "n_categorical"), ("num", "n_numeric"), ("b", "b")):
            if get(flag) is not None:
                overrides["synth"][key] = get(flag)
        if get("global_eta"):
            overrides["synth"]["eta_per_unit"] = False

    bins = get("bins")
    if bins:
        if len(bins) == 1:
            overrides["binning"]["default_bins"] = bins[0]
        else:
            overrides[""]["bin_candidates"] = bins

    overrides["grid"].update(_grid_overrides(get("grid")))
    for flag in ("threads", "out", "cv_folds"):
        if get(flag) is not None:
            overrides[""][flag] = get(flag)
    if get("seed") is not None:
        overrides[""]["seed"] = args.seed
        overrides["search"]["seed"] = args.seed
        overrides["synth"]["seed"] = args.seed
    return overrides


def _out_dir(config: RunConfig, default: str = ".") -> Path:
    return Path(config.out or default)


def _inputs(*paths) -> list:
    return [p for p in paths if p]


def _progress(event: ProgressEvent) -> None:
    logger.info(f"rule {event.rule_index + 1} start {event.start + 1} step {event.iteration}: f={event.f_value:.4f} size={event.rule_size}")


def _load_data(args: argparse.Namespace, schema: Schema):
    if not args.data:
        raise ConfigError("--data is required")
    return load_csv(args.data, schema)


def cmd_generate(args: argparse.Namespace, config: RunConfig) -> int:
    table, truth = generate(config.synth)
    out = _out_dir(config)
    meta = meta_block(config.to_dict(), config.synth.seed)
    data_path = write_csv(out / "data.csv", to_frame(table))
    write_json(out / "truth.json", truth.to_dict(), meta)
    write_json(out / "schema.json", synth_schema(config.synth).to_dict(), meta)
    print(f"Wrote {table.n_units} units ({table.n_treated} treated) to {data_path}")
    print(f"Truth sidecar: {out / 'truth.json'}")
    return EXIT_OK


def cmd_fit(args: argparse.Namespace, config: RunConfig) -> int:
    table = _load_data(args, config.schema)
    binning = config.binning
    if len(config.bin_candidates) > 1:
        chosen = select_bin_count(table, config.bin_candidates, config.cv_folds, config)
        binning = replace(binning, bins={**binning.bins, **chosen})

    model = fit_pipeline(table, binning, config.propensity, config.search, _progress)
    out = _out_dir(config)
    meta = meta_block(config.to_dict(), config.seed, _inputs(args.data))
    write_json(out / "model.json", {"schema": config.schema.to_dict(), **model.to_dict()}, meta)
    write_text(out / "rules.txt", meta_comment(meta) + model.ruleset.text() + "\n")

    if not len(model.ruleset):
        print("No rule with a positive objective was found.")
        return EXIT_NO_RULE
    for line in model.ruleset.lines():
        print(line)
    return EXIT_OK


def _load_truth(path: Optional[str]) -> Optional[SynthTruth]:
    return SynthTruth.from_dict(read_json(path)) if path else None


def _write_report(report, out: Path, meta: dict) -> None:
    write_json(out / "report.json", report.to_dict(), meta)
    write_text(out / "report.txt", report.to_text())
    for metric, frame in report.csv_tables().items():
        write_csv(out / f"report_{metric}.csv", frame, index=True)


def cmd_evaluate(args: argparse.Namespace, config: RunConfig) -> int:
    truth = _load_truth(args.truth)
    if args.model:
        payload = read_json(args.model)
        model = FittedModel.from_dict(payload)
        schema = config.schema
        if "schema" in payload:
            schema = config.schema.overlay(Schema.from_dict(payload["schema"]))
        table = _load_data(args, schema)
        if truth is not None and len(truth.te) != table.n_units:
            raise LengthMismatch(len(truth.te), table.n_units)
        report = evaluate_model(model, table, truth)
    else:
        table = _load_data(args, config.schema)
        report = cross_validate(table, config.grid, config.cv_folds, config.seed, config.binning,
                                config.propensity, config.search, config.threads, truth)

    meta = meta_block(config.to_dict(), config.seed, _inputs(args.data, args.model, args.truth))
    _write_report(report, _out_dir(config), meta)
    print(report.to_text(), end="")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, config: RunConfig) -> int:
    table = benchmark(args.n, args.d, args.repeats, config.seed, replace(config.search, k=1), config.binning)
    fit = linear_fit(table)
    print(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    if fit:
        print(f"time ~ {fit['slope']:.5g} * {fit['x']} + {fit['intercept']:.4f}  (R^2 = {fit['r2']:.3f})")
    if config.out:
        out = Path(config.out)
        write_csv(out / "bench.csv", table)
        write_json(out / "bench.json", {"rows": table.to_dict(orient="records"), "fit": fit},
                   meta_block(config.to_dict(), config.seed))
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace, config: RunConfig) -> int:
    table = _load_data(args, config.schema)
    ds, _ = weight_dataset(Binarizer.fit(table, config.binning).transform(table), config.propensity)
    best, values = brute_force_best_rule(ds, config.search)
    best_f = values[best]
    print(f"best: {best.describe(ds)}  f={best_f:.6f}  ({len(values)} rules evaluated)")
    result = {"best": list(best.literal_ids), "text": best.describe(ds), "f": best_f, "evaluated": len(values)}
    if args.compare:
        found = optimize_rule(ds, config.search)
        found_f = values.get(found, float("nan"))
        ratio = found_f / best_f if best_f else float("nan")
        print(f"optimizer: {found.describe(ds)}  f={found_f:.6f}  ratio={ratio:.4f}")
        result.update({"optimizer": list(found.literal_ids), "optimizer_f": found_f, "ratio": ratio})
    if config.out:
        write_json(Path(config.out) / "oracle.json", result,
                   meta_block(config.to_dict(), config.seed, _inputs(args.data)))
    return EXIT_OK


def cmd_fetch(args: argparse.Namespace, config: RunConfig) -> int:
    from sources import SOURCES

    source = SOURCES[args.source]()
    table = source.load(_out_dir(config, "data"), refresh=args.refresh)
    print(f"{source.info.name}: {table.n_units} units ({table.n_treated} treated)")
    print(f"Schema: {_out_dir(config, 'data') / source.csv_name.replace('.csv', '.schema.json')}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "bench": cmd_bench,
    "oracle": cmd_oracle,
    "fetch": cmd_fetch,
}


def main(argv: Optional[list] = None) -> int:
    configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(load_config_file(args.config), collect_overrides(args))
        return COMMANDS[args.command](args, config)
    except NoFeasibleRule as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NO_RULE
    except (CausalRulesError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
