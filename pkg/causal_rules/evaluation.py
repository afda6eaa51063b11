"""
Metrics, brute-force oracle, cross-validated grid search and the scalability bench.

Report definitions:
  overlap  = mean over rule pairs of |cover(a) & cover(b)| / n_units, in percent
  jaccard  = mean over rule pairs of |cover(a) & cover(b)| / |cover(a) | cover(b)|, in percent
  coverage = |union of covers| / n_units, in percent
Per-rule PEHE and MAPE use the rule's tau as the prediction for every covered unit.
"""

import itertools
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from loguru import logger
from scipy import stats as sps

from .config import BinningConfig, GridSpec, PropensityConfig, SearchConfig, SynthConfig
from .dataset import BinarizedDataset, RawTable, stratified_folds
from .errors import (
    AllTruthZero,
    EmptyInput,
    LengthMismatch,
    MinSupportViolated,
    NoFeasibleRule,
    SearchSpaceTooLarge,
)
from .pipeline import FittedModel, fit_pipeline, heldout_score, prepare
from .rulecore import OverlapMask, Rule, RuleSet, q_stats, rule_cover
from .synth import SynthTruth, generate

ORACLE_LIMIT = 10 ** 6

REPORT_HEADER = (
    "overlap: mean pairwise |A & B| / n (%); jaccard: mean pairwise |A & B| / |A | B| (%); "
    "coverage: |union| / n (%); per-rule PEHE/MAPE use the rule's tau for every covered unit"
)


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise LengthMismatch(len(pred), len(truth))
    if pred.size == 0:
        raise EmptyInput("prediction vector")
    return pred, truth


def pehe(pred, truth) -> float:
    """Root mean squared error of effect predictions."""
    pred, truth = _pair(pred, truth)
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def mape(pred, truth) -> float:
    """Mean of |pred - truth| / |truth|; units with zero truth are left out."""
    pred, truth = _pair(pred, truth)
    keep = truth != 0
    if not keep.any():
        raise AllTruthZero()
    if not keep.all():
        logger.debug(f"MAPE: excluded {int((~keep).sum())} units with zero true effect")
    return float(np.mean(np.abs(pred[keep] - truth[keep]) / np.abs(truth[keep])))


@dataclass(frozen=True)
class RuleMetrics:
    text: str
    length: int
    tau: float
    variance: float
    f_value: float
    coverage_count: int
    n_treated: int
    n_control: int
    avg_ite: Optional[float] = None
    pehe: Optional[float] = None
    mape: Optional[float] = None


@dataclass(frozen=True)
class SetMetrics:
    n_rules: int
    avg_length: float
    overlap_pct: float
    jaccard_pct: float
    coverage_pct: float
    pehe: Optional[float] = None


def _truth_vector(ds: BinarizedDataset, truth: Union[None, np.ndarray, SynthTruth]) -> Optional[np.ndarray]:
    if isinstance(truth, SynthTruth):
        truth = truth.te
    if truth is None:
        truth = ds.ite
    if truth is not None and len(truth) != ds.n_units:
        raise LengthMismatch(len(truth), ds.n_units)
    return truth


def subgroup_metrics(rule: Rule, ds: BinarizedDataset, truth: Union[None, np.ndarray, SynthTruth] = None,
                     lam: float = 0.0, m_min: int = 1) -> RuleMetrics:
    s = q_stats(rule, ds, m_min=m_min, lam=lam, strict=True)
    ite = _truth_vector(ds, truth)
    avg_ite = rule_pehe = rule_mape = None
    if ite is not None:
        covered = ite[rule_cover(rule, ds)]
        pred = np.full(covered.shape, s.tau)
        avg_ite = float(np.mean(covered))
        rule_pehe = pehe(pred, covered)
        try:
            rule_mape = mape(pred, covered)
        except AllTruthZero:
            rule_mape = None
    return RuleMetrics(
        text=f"IF {rule.describe(ds)} THEN τ = {round(s.tau, 2):g}",
        length=len(rule),
        tau=s.tau,
        variance=s.sigma2,
        f_value=s.f_value,
        coverage_count=s.n_treated_covered + s.n_control_covered,
        n_treated=s.n_treated_covered,
        n_control=s.n_control_covered,
        avg_ite=avg_ite,
        pehe=rule_pehe,
        mape=rule_mape,
    )


def interpretability_metrics(rs: RuleSet, ds: BinarizedDataset,
                             truth: Union[None, np.ndarray, SynthTruth] = None) -> SetMetrics:
    n = ds.n_units
    covers = rs.covers(ds)
    if not len(rs):
        return SetMetrics(0, 0.0, 0.0, 0.0, 0.0)
    avg_length = float(np.mean([len(r.rule) for r in rs]))
    overlaps, jaccards = [], []
    for a, b in itertools.combinations(range(len(rs)), 2):
        inter = int(np.sum(covers[a] & covers[b]))
        union = int(np.sum(covers[a] | covers[b]))
        overlaps.append(100.0 * inter / n)
        jaccards.append(100.0 * inter / union if union else 0.0)
    coverage = 100.0 * int(np.sum(covers.any(axis=0))) / n

    set_pehe = None
    ite = _truth_vector(ds, truth)
    if ite is not None:
        pred = rs.predict(ds)
        known = ~np.isnan(pred)
        if known.any():
            set_pehe = pehe(pred[known], ite[known])
    return SetMetrics(
        n_rules=len(rs),
        avg_length=avg_length,
        overlap_pct=float(np.mean(overlaps)) if overlaps else 0.0,
        jaccard_pct=float(np.mean(jaccards)) if jaccards else 0.0,
        coverage_pct=coverage,
        pehe=set_pehe,
    )


def count_rules(n_literals: int, max_len: int) -> int:
    """Non-contradictory rules of length 0..max_len over complementary literal pairs."""
    pairs = n_literals // 2
    return sum(math.comb(pairs, k) * 2 ** k for k in range(0, min(max_len, pairs) + 1))


def brute_force_best_rule(ds: BinarizedDataset, cfg: SearchConfig, max_len: Optional[int] = None,
                          mask: Optional[OverlapMask] = None, limit: int = ORACLE_LIMIT) -> tuple[Rule, dict]:
    """Evaluate f on every non-contradictory rule up to max_len, the empty rule included."""
    max_len = cfg.max_len if max_len is None else max_len
    size = count_rules(ds.n_literals, max_len)
    if size > limit:
        raise SearchSpaceTooLarge(size, limit)

    pairs = [(lit.id, lit.partner) for lit in ds.literals if lit.id < lit.partner]
    table = {}
    best, best_f = None, -math.inf
    for k in range(0, max_len + 1):
        for chosen in itertools.combinations(pairs, k):
            for ids in itertools.product(*chosen):
                rule = Rule(ids)
                f = q_stats(rule, ds, penalty=mask, m_min=cfg.m_min, lam=cfg.lam).f_value
                table[rule] = f
                if f > best_f:
                    best, best_f = rule, f
    if best is None:
        raise NoFeasibleRule("brute force found no feasible rule")
    logger.info(f"Oracle: {len(table)} rules, best f={best_f:.6f}: {best.describe(ds)}")
    return best, table


@dataclass
class MetricsReport:
    """Per-rule rows and per-set rows, one group per fold (fold 0 for a single evaluation)."""
    rule_rows: list = field(default_factory=list)
    set_rows: list = field(default_factory=list)
    best_config: Optional[dict] = None
    grid_scores: list = field(default_factory=list)
    header: str = REPORT_HEADER

    def rules_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rule_rows)

    def set_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.set_rows)

    def summary(self) -> dict:
        """Mean and sample standard deviation over folds, per rule rank and for the set."""
        out = {}
        rules = self.rules_frame()
        if not rules.empty:
            numeric = rules.drop(columns=["text", "fold"]).apply(pd.to_numeric, errors="coerce")
            agg = numeric.groupby("rank").agg(["mean", "std"])
            out["rules"] = {
                int(rank): {metric: {"mean": _num(row[(metric, "mean")]), "std": _num(row[(metric, "std")])}
                            for metric in numeric.columns if metric != "rank"}
                for rank, row in agg.iterrows()
            }
        sets = self.set_frame()
        if not sets.empty:
            numeric = sets.drop(columns=["fold"]).apply(pd.to_numeric, errors="coerce")
            out["set"] = {c: {"mean": _num(numeric[c].mean()), "std": _num(numeric[c].std())} for c in numeric.columns}
        return out

    def to_dict(self) -> dict:
        return {
            "header": self.header,
            "best_config": self.best_config,
            "grid_scores": self.grid_scores,
            "rules": self.rule_rows,
            "sets": self.set_rows,
            "summary": self.summary(),
        }

    def to_text(self) -> str:
        lines = [f"# {self.header}"]
        if self.best_config:
            lines.append(f"# best config: {self.best_config}")
        rules = self.rules_frame()
        if not rules.empty:
            lines += ["", rules.to_string(index=False, float_format=lambda v: f"{v:.4f}")]
        sets = self.set_frame()
        if not sets.empty:
            lines += ["", sets.to_string(index=False, float_format=lambda v: f"{v:.4f}")]
        n_folds = len(self.set_rows)
        if n_folds > 1:
            summary = self.summary()
            lines += ["", f"mean ± std over {n_folds} folds"]
            for rank, metrics in summary.get("rules", {}).items():
                cells = [_cell(m, v) for m, v in metrics.items() if v["mean"] is not None]
                lines.append(f"  Rule{rank}: " + "  ".join(cells))
            cells = [_cell(m, v) for m, v in summary.get("set", {}).items() if v["mean"] is not None]
            lines.append("  Set: " + "  ".join(cells))
        return "\n".join(lines) + "\n"

    def csv_tables(self) -> dict:
        """One frame per metric: folds as rows, rule ranks as columns."""
        rules = self.rules_frame()
        tables = {}
        if rules.empty:
            return tables
        for metric in ("tau", "avg_ite", "variance", "pehe", "mape", "coverage_count"):
            if rules[metric].notna().any():
                tables[metric] = rules.pivot(index="fold", columns="rank", values=metric)
        return tables


def _num(value) -> Optional[float]:
    return None if value is None or pd.isna(value) else float(value)


def _cell(metric: str, value: dict) -> str:
    std = "n/a" if value["std"] is None else f"{value['std']:.4f}"
    return f"{metric}={value['mean']:.4f}±{std}"


def _report_rows(rs: RuleSet, ds: BinarizedDataset, truth, lam: float, fold: int) -> tuple[list, dict]:
    metrics = []
    for r in rs:
        try:
            metrics.append(subgroup_metrics(r.rule, ds, truth, lam=lam))
        except MinSupportViolated:
            logger.warning(f"Fold {fold}: rule '{r.text()}' covers no treated or control unit here")
    metrics.sort(key=lambda m: -m.f_value if math.isfinite(m.f_value) else math.inf)
    rows = [{"fold": fold, "rank": k + 1, **asdict(m)} for k, m in enumerate(metrics)]
    set_row = {"fold": fold, **asdict(interpretability_metrics(rs, ds, truth))}
    return rows, set_row


def evaluate_model(model: FittedModel, table: RawTable, truth: Union[None, np.ndarray, SynthTruth] = None) -> MetricsReport:
    ds = prepare(model, table)
    rows, set_row = _report_rows(model.ruleset, ds, truth, model.search.lam, 0)
    return MetricsReport(rule_rows=rows, set_rows=[set_row])


def _fold_job(table: RawTable, labels: np.ndarray, fold: int, lam: float, max_len: int,
              binning: BinningConfig, propensity: PropensityConfig, search: SearchConfig,
              truth: Optional[np.ndarray]) -> dict:
    train_idx = np.flatnonzero(labels != fold)
    test_idx = np.flatnonzero(labels == fold)
    cfg = replace(search, lam=lam, max_len=max_len)
    model = fit_pipeline(table.subset(train_idx), binning, propensity, cfg)
    test = table.subset(test_idx)
    score = heldout_score(model, test)
    rows, set_row = _report_rows(model.ruleset, prepare(model, test), None if truth is None else truth[test_idx], lam, fold)
    set_row["heldout_f"] = score
    return {"lam": lam, "max_len": max_len, "fold": fold, "score": score, "rows": rows, "set_row": set_row}


def cross_validate(table: RawTable, grid: Optional[GridSpec] = None, folds: int = 5, seed: int = 0,
                   binning: Optional[BinningConfig] = None, propensity: Optional[PropensityConfig] = None,
                   search: Optional[SearchConfig] = None, threads: int = 1,
                   truth: Union[None, np.ndarray, SynthTruth] = None) -> MetricsReport:
    """
    Grid search over (lambda, L) scored by the mean held-out objective across
    treatment-stratified folds. The report holds the fold rows of the best grid point.
    """
    grid = grid or GridSpec()
    binning = binning or BinningConfig()
    propensity = propensity or PropensityConfig()
    search = search or SearchConfig()
    if isinstance(truth, SynthTruth):
        truth = truth.te
    if truth is None:
        truth = table.ite

    labels = stratified_folds(table.treatment, folds, seed)
    jobs = [(lam, max_len, k) for lam, max_len in grid.points() for k in range(folds)]
    logger.info(f"Cross-validating {len(grid.points())} grid points x {folds} folds on {threads} workers")
    results = Parallel(n_jobs=threads)(
        delayed(_fold_job)(table, labels, k, lam, max_len, binning, propensity, search, truth)
        for lam, max_len, k in jobs
    )

    scores = []
    best, best_score = None, -math.inf
    for lam, max_len in grid.points():
        fold_scores = [r["score"] for r in results if r["lam"] == lam and r["max_len"] == max_len]
        score = float(np.mean(fold_scores))
        scores.append({"lambda": lam, "L": max_len, "score": score})
        if best is None or score > best_score:
            best, best_score = (lam, max_len), score

    chosen = [r for r in results if (r["lam"], r["max_len"]) == best]
    report = MetricsReport(
        rule_rows=[row for r in chosen for row in r["rows"]],
        set_rows=[r["set_row"] for r in chosen],
        best_config={"lambda": best[0], "L": best[1], "score": best_score},
        grid_scores=scores,
    )
    logger.info(f"Best grid point: lambda={best[0]} L={best[1]} (held-out f {best_score:.4f})")
    return report


def benchmark(unit_counts, covariate_counts, repeats: int = 3, seed: int = 0,
              search: Optional[SearchConfig] = None, binning: Optional[BinningConfig] = None) -> pd.DataFrame:
    """Wall-clock fit time on the (n, d) grid of unit and numeric covariate counts, `repeats` runs each."""
    unit_counts = [unit_counts] if np.isscalar(unit_counts) else list(unit_counts)
    search = search or SearchConfig(k=1)
    rows = []
    for n in unit_counts:
        for d in covariate_counts:
            table, _ = generate(SynthConfig(n_units=int(n), n_categorical=0, n_numeric=int(d), seed=seed))
            times = []
            for _ in range(repeats):
                start = time.perf_counter()
                fit_pipeline(table, binning, None, search)
                times.append(time.perf_counter() - start)
            rows.append({"n": int(n), "d": int(d), "mean_s": float(np.mean(times)),
                         "std_s": float(np.std(times, ddof=1)) if repeats > 1 else 0.0,
                         "runs": repeats})
            logger.info(f"bench n={n} d={d}: {np.mean(times):.3f}s")
    return pd.DataFrame(rows)


def linear_fit(bench: pd.DataFrame) -> Optional[dict]:
    """
    Least-squares line of mean time against d, or against n * d when the unit count
    varies; None with fewer than two points.
    """
    if len(bench) < 2:
        return None
    varies = "n" in bench and bench["n"].nunique() > 1
    x = (bench["n"] * bench["d"]) if varies else bench["d"]
    fit = sps.linregress(x.to_numpy(dtype=float), bench["mean_s"].to_numpy(dtype=float))
    return {"x": "n*d" if varies else "d", "slope": float(fit.slope), "intercept": float(fit.intercept),
            "r2": float(fit.rvalue ** 2)}
