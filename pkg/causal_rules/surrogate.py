"""
Minorize-maximize surrogate of the rule objective.

Around an anchor rule R_m the objective f is bounded from below by

    g(R) = log b_Q1(R) + log b_Q4(R) + lambda * log b_Q6(R)
           - T_Q2(R) - T_Q3(R) - lambda * T_Q5(R)

where b_Q = max(b1, b2) (or one of b1, b2) are modular lower bounds of the supermodular statistics Q1, Q4
and Q6, T_Q(R) = log Q(R_m) + (Q(R) - Q(R_m)) / Q(R_m) is the tangent of log Q at the
anchor, and Q5 is taken around the anchor's weighted treated mean mu_m, so that
Q5/Q6 majorizes the treated variance. g touches f at R_m.

Adding literal j to R moves every modular bound by a fixed per-literal increment:

    j in R_m:      b1 += Q(j | R_m \\ j)      b2 += Q(j | V \\ j)
    j not in R_m:  b1 += Q(j | {})           b2 += Q(j | R_m)

so the anchor stores those increments once and candidate moves only need the exact
statistics of the candidate rule, computed for all literals with one matrix product.

Each of b1 and b2 alone is modular, so g built on a single bound is submodular in R.
Their pointwise max is tighter but is not submodular once the anchor is non-empty;
local search only relies on g being a minorant that touches f at R_m.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import SURROGATE_BOUNDS
from .dataset import BinarizedDataset
from .errors import InvalidRule
from .rulecore import (
    Q1, Q2, Q3, Q4, Q5,
    OverlapMask,
    Rule,
    RuleStats,
    UnitTable,
    feasible_from_totals,
    q_stats,
    rule_cover,
)

# Statistics bounded by modular functions, in the order of SurrogateAnchor.increments.
# Q6 equals Q2, so its column is Q2.
BOUNDED = {"q1": (0, Q1), "q4": (1, Q4), "q6": (2, Q2)}


@dataclass(frozen=True, eq=False)
class SurrogateAnchor:
    """Everything g needs about one MM step; immutable once built."""
    anchor_rule: Rule
    mu_m: float
    lam: float
    m_min: int
    anchor_stats: RuleStats
    anchor_totals: np.ndarray
    # tables[name] = {"empty": Q(j|{}), "anchor": Q(j|R_m), "drop_anchor": Q(j|R_m\j), "drop_full": Q(j|V\j)}
    tables: dict
    # increments[k, 0 or 1, j]: change of b1 or b2 of bounded statistic k when j is added
    increments: np.ndarray
    units: UnitTable
    partners: np.ndarray
    bound: str = "max"

    @property
    def n_literals(self) -> int:
        return len(self.partners)

    def bounds(self, rule: Rule) -> np.ndarray:
        """b1 and b2 of the bounded statistics at `rule`, shape (3, 2)."""
        out = np.repeat(self.anchor_totals[[Q1, Q4, Q2]][:, None], 2, axis=1)
        anchor_ids = set(self.anchor_rule.literal_ids)
        rule_ids = set(rule.literal_ids)
        for j in anchor_ids - rule_ids:
            out -= self.increments[:, :, j]
        for j in rule_ids - anchor_ids:
            out += self.increments[:, :, j]
        return out

    def _values(self, bounds: np.ndarray, totals: np.ndarray) -> np.ndarray:
        """
        g from modular bounds of shape (3, 2, ...) and exact totals of shape (..., 9).
        Rules whose bounds are not positive or that are f-infeasible get -inf.
        """
        b = _select(bounds, self.bound)
        ok = feasible_from_totals(totals, self.units.center, self.lam, self.m_min)
        ok &= (b[0] > 0) & (b[1] > 0)
        if self.lam > 0:
            ok &= b[2] > 0
        a = self.anchor_totals
        with np.errstate(divide="ignore", invalid="ignore"):
            g = (np.log(b[0]) + np.log(b[1])
                 - _tangent(totals[..., Q2], a[Q2]) - _tangent(totals[..., Q3], a[Q3]))
            if self.lam > 0:
                g = g + self.lam * (np.log(b[2]) - _tangent(totals[..., Q5], a[Q5]))
        return np.where(ok, g, -np.inf)

    def value(self, rule: Rule) -> float:
        totals = self.units.totals(rule_cover(rule, self.units.ds))
        return float(self._values(self.bounds(rule), totals))

    def blocked(self, rule: Rule) -> np.ndarray:
        """Literals that cannot be added to `rule`: members and their partners."""
        mask = np.zeros(self.n_literals, dtype=bool)
        ids = list(rule.literal_ids)
        mask[ids] = True
        mask[self.partners[ids]] = True
        return mask

    def add_values(self, rule: Rule) -> np.ndarray:
        """g(R + j) for every literal j; -inf where j is blocked."""
        cover = rule_cover(rule, self.units.ds)
        totals = self.units.extended_totals(cover)
        bounds = self.bounds(rule)[:, :, None] + self.increments
        g = self._values(bounds, totals)
        g[self.blocked(rule)] = -np.inf
        return g

    def swap_values(self, rule: Rule, out_id: int) -> np.ndarray:
        """g(R - out_id + j) for every literal j other than out_id."""
        values = self.add_values(rule.without(out_id))
        values[out_id] = -np.inf
        return values


def _select(bounds: np.ndarray, which: str) -> np.ndarray:
    if which == "b1":
        return bounds[:, 0]
    if which == "b2":
        return bounds[:, 1]
    return np.max(bounds, axis=1)


def _tangent(q, q_anchor: float):
    return math.log(q_anchor) + (q - q_anchor) / q_anchor


def _literal_marginals(ds: BinarizedDataset, column: np.ndarray, anchor_cover: np.ndarray,
                       anchor_rule: Rule) -> dict:
    cov = ds.coverage_matrix
    q_empty = float(column.sum())
    q_anchor = float(column @ anchor_cover)

    add_empty = cov @ column - q_empty
    add_anchor = cov @ (column * anchor_cover) - q_anchor

    drop_anchor = np.zeros(ds.n_literals)
    for j in anchor_rule.literal_ids:
        without = rule_cover(anchor_rule.without(j), ds)
        drop_anchor[j] = q_anchor - float(column @ without)

    # V \ j covers unit i when j is the only literal of the universe that i fails.
    misses = (~ds.coverage).astype(float)
    miss_count = misses.sum(axis=0)
    covered_by_v = miss_count == 0
    q_full = float(column @ covered_by_v)
    covered_without = (miss_count[None, :] - misses) == 0
    drop_full = q_full - covered_without.astype(float) @ column

    return {"empty": add_empty, "anchor": add_anchor, "drop_anchor": drop_anchor, "drop_full": drop_full}


def anchor_mean(rule: Rule, ds: BinarizedDataset) -> float:
    """Weighted treated outcome mean over the rule's coverage (all treated units for the empty rule)."""
    t = rule_cover(rule, ds) & ds.treatment
    if not t.any():
        return float(np.sum(ds.weights[ds.treatment] * ds.outcome[ds.treatment]) / np.sum(ds.weights[ds.treatment]))
    return float(np.sum(ds.weights[t] * ds.outcome[t]) / np.sum(ds.weights[t]))


def build_anchor(ds: BinarizedDataset, anchor_rule: Rule, lam: float, m_min: int = 1,
                 penalty: Optional[OverlapMask] = None, mu_m: Optional[float] = None,
                 bound: str = "max") -> SurrogateAnchor:
    if bound not in SURROGATE_BOUNDS:
        raise ValueError(f"unknown surrogate bound {bound!r}; expected one of {SURROGATE_BOUNDS}")
    mu = anchor_mean(anchor_rule, ds) if mu_m is None else float(mu_m)
    stats = q_stats(anchor_rule, ds, anchor_mu=mu, penalty=penalty, m_min=m_min, lam=lam)
    if not stats.feasible:
        raise InvalidRule(anchor_rule.literal_ids, f"anchor is infeasible ({stats.reason})")

    units = UnitTable(ds, penalty, mu)
    cover = rule_cover(anchor_rule, ds).astype(float)
    anchor_totals = units.totals(cover.astype(bool))
    in_anchor = np.zeros(ds.n_literals, dtype=bool)
    in_anchor[list(anchor_rule.literal_ids)] = True

    tables = {}
    increments = np.zeros((3, 2, ds.n_literals))
    for name, (k, col) in BOUNDED.items():
        t = _literal_marginals(ds, units.columns[:, col], cover, anchor_rule)
        tables[name] = t
        increments[k, 0] = np.where(in_anchor, t["drop_anchor"], t["empty"])
        increments[k, 1] = np.where(in_anchor, t["drop_full"], t["anchor"])
    partners = np.array([lit.partner for lit in ds.literals], dtype=int)

    return SurrogateAnchor(
        anchor_rule=anchor_rule,
        mu_m=mu,
        lam=lam,
        m_min=m_min,
        anchor_stats=stats,
        anchor_totals=anchor_totals,
        tables=tables,
        increments=increments,
        units=units,
        partners=partners,
        bound=bound,
    )


def variance_majorant(rule: Rule, ds: BinarizedDataset, mu_m: float, m_min: int = 1) -> float:
    """Q5/Q6 around mu_m, an upper bound of the rule's weighted treated variance."""
    stats = q_stats(rule, ds, anchor_mu=mu_m, m_min=m_min, strict=True)
    return stats.q5 / stats.q6


def modular_bound(q: str, anchor: SurrogateAnchor, rule: Rule) -> float:
    """The anchor's modular bound (max of b1 and b2 unless it keeps only one) for q in {"q1", "q4", "q6"}."""
    if q not in BOUNDED:
        raise ValueError(f"no modular bound for {q!r}; expected one of {sorted(BOUNDED)}")
    return float(_select(anchor.bounds(rule), anchor.bound)[BOUNDED[q][0]])


def surrogate_value(rule: Rule, anchor: SurrogateAnchor) -> float:
    return anchor.value(rule)


def marginal_gain(anchor: SurrogateAnchor, current_rule: Rule, literal_id: int) -> float:
    """g(R + j) - g(R); -inf when R + j is infeasible under the anchor."""
    if literal_id in current_rule or anchor.partners[literal_id] in current_rule:
        raise InvalidRule(current_rule.literal_ids + (literal_id,), "literal or its negation already in the rule")
    after = anchor.value(current_rule.with_literal(literal_id))
    if after == -math.inf:
        return -math.inf
    return after - anchor.value(current_rule)
