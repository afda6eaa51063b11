"""
Rules, rule sets and the statistics they are scored with.

For a rule R with covered treated units D+ and covered control units D-:

    Q1 = sum_{D+} w*Y   (units already covered by the rule set contribute epsilon)
    Q2 = sum_{D+} w     Q3 = sum_{D-} w*Y     Q4 = sum_{D-} w
    Q5 = sum_{D+} w*(Y - mu)^2 for an anchor mean mu, Q6 = Q2

    tau    = Q1/Q2 - Q3/Q4
    sigma2 = weighted variance of Y over D+ (always computed without the penalty)
    f      = log Q1 + log Q4 - log Q2 - log Q3 - lambda * log sigma2

Infeasible rules (too little support, a zero Q, zero variance while lambda > 0) get
f = -inf together with a reason code.
"""

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .dataset import BinarizedDataset, format_value
from .errors import EmptyInput, InvalidRule, MinSupportViolated

ZERO_Q = "ZeroQ"
ZERO_VARIANCE = "ZeroVariance"
MIN_SUPPORT = "MinSupport"

# Variances below this fraction of the squared treated mean are treated as zero.
VARIANCE_FLOOR = 1e-12

# Column order of UnitTable.columns.
Q1, Q2, Q3, Q4, Q5, N_TREATED, N_CONTROL, S1, S2 = range(9)


@dataclass(frozen=True)
class Rule:
    """Conjunction of literals, stored as sorted literal ids."""
    literal_ids: tuple = ()

    def __post_init__(self):
        ids = tuple(sorted(set(int(i) for i in self.literal_ids)))
        object.__setattr__(self, "literal_ids", ids)

    def __len__(self) -> int:
        return len(self.literal_ids)

    def __contains__(self, literal_id: int) -> bool:
        return literal_id in self.literal_ids

    def __iter__(self):
        return iter(self.literal_ids)

    def with_literal(self, literal_id: int) -> "Rule":
        return Rule(self.literal_ids + (literal_id,))

    def without(self, literal_id: int) -> "Rule":
        return Rule(tuple(i for i in self.literal_ids if i != literal_id))

    def swap(self, out_id: int, in_id: int) -> "Rule":
        return self.without(out_id).with_literal(in_id)

    def validate(self, ds: BinarizedDataset, max_len: Optional[int] = None) -> "Rule":
        for i in self.literal_ids:
            if ds.partner(i) in self.literal_ids:
                raise InvalidRule(self.literal_ids, f"contains literal {i} and its negation")
        if max_len is not None and len(self) > max_len:
            raise InvalidRule(self.literal_ids, f"longer than the maximum length {max_len}")
        return self

    def describe(self, ds_or_literals) -> str:
        literals = getattr(ds_or_literals, "literals", ds_or_literals)
        if not self.literal_ids:
            return "TRUE"
        return " AND ".join(literals[i].describe() for i in self.literal_ids)


@dataclass(frozen=True, eq=False)
class OverlapMask:
    """Treated units already covered by accepted rules, and the value they contribute to Q1."""
    covered: np.ndarray
    epsilon: float

    @classmethod
    def empty(cls, ds: BinarizedDataset, epsilon: float) -> "OverlapMask":
        return cls(np.zeros(ds.n_units, dtype=bool), float(epsilon))

    def add(self, cover: np.ndarray, treatment: np.ndarray) -> "OverlapMask":
        return OverlapMask(self.covered | (cover & treatment), self.epsilon)

    @property
    def size(self) -> int:
        return int(self.covered.sum())


def default_epsilon(ds: BinarizedDataset) -> float:
    """1e-3 times the mean weighted outcome of the treated units."""
    t = ds.treatment
    return 1e-3 * float(np.mean(ds.weights[t] * ds.outcome[t]))


@dataclass(frozen=True)
class RuleStats:
    q1: float
    q2: float
    q3: float
    q4: float
    q5: float
    q6: float
    tau: float
    sigma2: float
    f_value: float
    n_treated_covered: int
    n_control_covered: int
    treated_mean: float
    reason: Optional[str] = None

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.f_value)


def rule_cover(rule: Rule, ds: BinarizedDataset) -> np.ndarray:
    """Units satisfying every literal of the rule; the empty rule covers everything."""
    if not rule.literal_ids:
        return np.ones(ds.n_units, dtype=bool)
    return np.logical_and.reduce(ds.coverage[list(rule.literal_ids)], axis=0)


def weighted_variance(weights: np.ndarray, values: np.ndarray) -> float:
    """sum w (Y - Ybar_w)^2 / sum w."""
    weights = np.asarray(weights, dtype=float)
    values = np.asarray(values, dtype=float)
    if weights.size == 0:
        raise EmptyInput("weighted_variance input")
    total = weights.sum()
    mean = np.sum(weights * values) / total
    return float(np.sum(weights * (values - mean) ** 2) / total)


def variance_is_zero(sigma2, treated_mean):
    return sigma2 <= VARIANCE_FLOOR * np.square(treated_mean)


def objective_with_reason(stats: RuleStats, lam: float) -> tuple[float, Optional[str]]:
    if stats.reason == MIN_SUPPORT:
        return -math.inf, MIN_SUPPORT
    if min(stats.q1, stats.q2, stats.q3, stats.q4) <= 0:
        return -math.inf, ZERO_Q
    f = math.log(stats.q1) + math.log(stats.q4) - math.log(stats.q2) - math.log(stats.q3)
    if lam > 0:
        if variance_is_zero(stats.sigma2, stats.treated_mean):
            return -math.inf, ZERO_VARIANCE
        f -= lam * math.log(stats.sigma2)
    return f, None


def objective(stats: RuleStats, lam: float) -> float:
    """f = log Q1 + log Q4 - log Q2 - log Q3 - lambda log sigma2, or -inf."""
    return objective_with_reason(stats, lam)[0]


def stats_for_cover(cover: np.ndarray, ds: BinarizedDataset, anchor_mu: Optional[float] = None,
                    penalty: Optional[OverlapMask] = None, m_min: int = 1, lam: float = 0.0,
                    strict: bool = False) -> RuleStats:
    w, y = ds.weights, ds.outcome
    if w is None:
        raise ValueError("dataset has no weights; attach propensity weights first")
    t = cover & ds.treatment
    c = cover & ~ds.treatment
    n_t, n_c = int(t.sum()), int(c.sum())

    wy_t = w[t] * y[t]
    q1_raw = float(wy_t.sum())
    q1 = q1_raw if penalty is None else float(np.where(penalty.covered[t], penalty.epsilon, wy_t).sum())
    q2 = float(w[t].sum())
    q3 = float(np.sum(w[c] * y[c]))
    q4 = float(w[c].sum())
    treated_mean = q1_raw / q2 if q2 > 0 else 0.0
    sigma2 = weighted_variance(w[t], y[t]) if n_t else 0.0
    mu = treated_mean if anchor_mu is None else anchor_mu
    q5 = float(np.sum(w[t] * (y[t] - mu) ** 2))
    tau = q1 / q2 - q3 / q4 if q2 > 0 and q4 > 0 else math.nan

    reason = None
    if n_t < m_min or n_c < m_min:
        if strict:
            raise MinSupportViolated(n_t, n_c, m_min)
        reason = MIN_SUPPORT
    stats = RuleStats(q1, q2, q3, q4, q5, q2, tau, sigma2, -math.inf, n_t, n_c, treated_mean, reason)
    f, reason = objective_with_reason(stats, lam)
    return RuleStats(q1, q2, q3, q4, q5, q2, tau, sigma2, f, n_t, n_c, treated_mean, reason)


def q_stats(rule: Rule, ds: BinarizedDataset, anchor_mu: Optional[float] = None,
            penalty: Optional[OverlapMask] = None, m_min: int = 1, lam: float = 0.0,
            strict: bool = False) -> RuleStats:
    """Q1..Q6, tau, sigma2 and f for one rule. `strict` raises on insufficient support."""
    return stats_for_cover(rule_cover(rule, ds), ds, anchor_mu, penalty, m_min, lam, strict)


class UnitTable:
    """
    Per-unit summands of the Q statistics for one dataset, penalty and anchor mean.

    totals(cover) gives the statistics of one coverage vector; extended_totals(cover)
    gives them for cover AND literal j, for every literal j at once.
    """

    def __init__(self, ds: BinarizedDataset, penalty: Optional[OverlapMask] = None,
                 mu: Optional[float] = None):
        if ds.weights is None:
            raise ValueError("dataset has no weights; attach propensity weights first")
        self.ds = ds
        w, y, t = ds.weights, ds.outcome, ds.treatment
        tf = t.astype(float)
        cf = 1.0 - tf
        wy = w * y
        wy1 = wy if penalty is None else np.where(penalty.covered, penalty.epsilon, wy)
        self.center = float(np.sum(wy[t]) / np.sum(w[t])) if t.any() else 0.0
        dev = y - self.center
        mu_dev = np.zeros_like(y) if mu is None else y - mu
        self.columns = np.column_stack([
            tf * wy1, tf * w, cf * wy, cf * w, tf * w * mu_dev ** 2,
            tf, cf, tf * w * dev, tf * w * dev ** 2,
        ])

    def totals(self, cover: np.ndarray) -> np.ndarray:
        return cover.astype(float) @ self.columns

    def extended_totals(self, cover: np.ndarray) -> np.ndarray:
        return self.ds.coverage_matrix @ (self.columns * cover[:, None])


def variance_from_totals(totals: np.ndarray, center: float) -> tuple[np.ndarray, np.ndarray]:
    """Weighted treated variance and mean from centered moment sums."""
    q2 = totals[..., Q2]
    with np.errstate(divide="ignore", invalid="ignore"):
        m1 = np.where(q2 > 0, totals[..., S1] / q2, 0.0)
        var = np.where(q2 > 0, totals[..., S2] / q2 - m1 ** 2, 0.0)
    return np.maximum(var, 0.0), m1 + center


def feasible_from_totals(totals: np.ndarray, center: float, lam: float, m_min: int) -> np.ndarray:
    ok = (totals[..., N_TREATED] >= m_min - 0.5) & (totals[..., N_CONTROL] >= m_min - 0.5)
    ok &= (totals[..., Q1] > 0) & (totals[..., Q2] > 0) & (totals[..., Q3] > 0) & (totals[..., Q4] > 0)
    if lam > 0:
        var, mean = variance_from_totals(totals, center)
        ok &= ~variance_is_zero(var, mean)
    return ok


def objective_from_totals(totals: np.ndarray, center: float, lam: float, m_min: int) -> np.ndarray:
    """Vectorized f over rows of statistic totals."""
    ok = feasible_from_totals(totals, center, lam, m_min)
    var, _ = variance_from_totals(totals, center)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = (np.log(totals[..., Q1]) + np.log(totals[..., Q4])
             - np.log(totals[..., Q2]) - np.log(totals[..., Q3]))
        if lam > 0:
            f = f - lam * np.log(var)
    return np.where(ok, f, -np.inf)


@dataclass(frozen=True)
class CausalRule:
    """An accepted rule with its consequent (tau computed without the overlap penalty)."""
    rule: Rule
    tau: float
    sigma2: float
    f_value: float
    coverage_count: int
    n_treated: int
    n_control: int
    description: str = ""

    def text(self) -> str:
        return f"IF {self.description} THEN τ = {round(self.tau, 2):g}"

    def to_dict(self, literals) -> dict:
        return {
            "literal_ids": list(self.rule.literal_ids),
            "literals": [literals[i].to_dict() for i in self.rule.literal_ids],
            "tau": self.tau,
            "sigma2": self.sigma2,
            "f_value": self.f_value,
            "coverage_count": self.coverage_count,
            "n_treated": self.n_treated,
            "n_control": self.n_control,
            "text": self.text(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CausalRule":
        text = d.get("text", "")
        description = text[3:text.rfind(" THEN ")] if text.startswith("IF ") else ""
        return cls(Rule(tuple(d["literal_ids"])), d["tau"], d["sigma2"], d["f_value"],
                   d["coverage_count"], d["n_treated"], d["n_control"], description)


def make_causal_rule(rule: Rule, ds: BinarizedDataset, lam: float, m_min: int = 1) -> CausalRule:
    stats = q_stats(rule, ds, m_min=m_min, lam=lam)
    return CausalRule(
        rule=rule,
        tau=stats.tau,
        sigma2=stats.sigma2,
        f_value=stats.f_value,
        coverage_count=stats.n_treated_covered + stats.n_control_covered,
        n_treated=stats.n_treated_covered,
        n_control=stats.n_control_covered,
        description=rule.describe(ds),
    )


@dataclass(frozen=True)
class RuleSet:
    rules: tuple = ()
    hyperparams: dict = field(default_factory=dict)
    fallback_effect: Optional[float] = None

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def covers(self, ds: BinarizedDataset) -> np.ndarray:
        """Boolean matrix rules x units."""
        if not self.rules:
            return np.zeros((0, ds.n_units), dtype=bool)
        return np.vstack([rule_cover(r.rule, ds) for r in self.rules])

    def predict(self, ds: BinarizedDataset) -> np.ndarray:
        """Mean tau of the covering rules per unit; fallback or NaN when uncovered."""
        covers = self.covers(ds)
        taus = np.array([r.tau for r in self.rules], dtype=float)
        counts = covers.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            pred = (taus @ covers) / counts if len(taus) else np.full(ds.n_units, np.nan)
        fill = np.nan if self.fallback_effect is None else self.fallback_effect
        return np.where(counts > 0, pred, fill)

    def lines(self) -> list[str]:
        return [r.text() for r in self.rules]

    def text(self) -> str:
        return "\n".join(self.lines())

    def to_dict(self, literals) -> dict:
        return {
            "rules": [r.to_dict(literals) for r in self.rules],
            "hyperparams": dict(self.hyperparams),
            "fallback_effect": self.fallback_effect,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RuleSet":
        return cls(tuple(CausalRule.from_dict(r) for r in d["rules"]),
                   dict(d.get("hyperparams", {})), d.get("fallback_effect"))


def ruleset_predict(rs: RuleSet, ds: BinarizedDataset, unit: int) -> Optional[float]:
    """Effect estimate for one unit, or None when no rule covers it and no fallback is set."""
    value = rs.predict(ds)[unit]
    return None if math.isnan(value) else float(value)


def contains_contradiction(ids: Iterable[int], ds: BinarizedDataset) -> bool:
    ids = set(ids)
    return any(ds.partner(i) in ids for i in ids)
