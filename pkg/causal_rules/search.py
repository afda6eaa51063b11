"""
Rule search: greedy initialization, local search on the surrogate, the MM loop for a
single rule and the rule-set loop with the overlap penalty.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from loguru import logger

from .config import SearchConfig
from .dataset import BinarizedDataset
from .errors import NoFeasibleRule
from .propensity import ipw_ate
from .rulecore import (
    OverlapMask,
    Rule,
    RuleSet,
    UnitTable,
    default_epsilon,
    make_causal_rule,
    objective_from_totals,
    q_stats,
    rule_cover,
)
from .surrogate import SurrogateAnchor, build_anchor

__all__ = [
    "OverlapMask",
    "ProgressEvent",
    "SearchConfig",
    "greedy_init",
    "learn_ruleset",
    "local_search",
    "optimize_rule",
    "start_literals",
]


@dataclass(frozen=True)
class ProgressEvent:
    rule_index: int
    iteration: int
    f_value: float
    rule_size: int
    # position of the MM start; iteration restarts at 0 for each start
    start: int = 0


ProgressCallback = Callable[[ProgressEvent], None]


def _objective(rule: Rule, ds: BinarizedDataset, cfg: SearchConfig, mask: Optional[OverlapMask]) -> float:
    return q_stats(rule, ds, penalty=mask, m_min=cfg.m_min, lam=cfg.lam).f_value


def start_literals(ds: BinarizedDataset, cfg: SearchConfig, mask: Optional[OverlapMask] = None) -> list:
    """
    Feasible singletons ordered by f, best first, at most cfg.n_starts of them.
    Equal values are ordered by a permutation drawn from cfg.seed.
    """
    units = UnitTable(ds, mask)
    f = objective_from_totals(units.extended_totals(rule_cover(Rule(), ds)), units.center, cfg.lam, cfg.m_min)
    tie_break = np.random.default_rng(cfg.seed).permutation(ds.n_literals)
    order = np.lexsort((tie_break, -f))
    feasible = [int(j) for j in order if np.isfinite(f[j])]
    if not feasible:
        raise NoFeasibleRule(f"no single literal covers {cfg.m_min} treated and {cfg.m_min} control units")
    return feasible[:cfg.n_starts]


def greedy_init(ds: BinarizedDataset, cfg: SearchConfig, mask: Optional[OverlapMask] = None,
                start: Optional[int] = None) -> Rule:
    """
    Start from the best feasible singleton (or from `start`) and keep adding the literal
    that most improves f until nothing improves it or the rule reaches cfg.max_len.
    """
    units = UnitTable(ds, mask)
    partners = np.array([lit.partner for lit in ds.literals], dtype=int)
    rule = Rule()
    current = -np.inf
    if start is not None:
        rule = Rule((start,))
        current = _objective(rule, ds, cfg, mask)
        if current == -np.inf:
            raise NoFeasibleRule(f"start literal {start} is infeasible")
    while len(rule) < cfg.max_len:
        totals = units.extended_totals(rule_cover(rule, ds))
        f = objective_from_totals(totals, units.center, cfg.lam, cfg.m_min)
        ids = list(rule.literal_ids)
        f[ids] = -np.inf
        f[partners[ids]] = -np.inf
        j = int(np.argmax(f))
        if not rule.literal_ids and f[j] == -np.inf:
            raise NoFeasibleRule(f"no single literal covers {cfg.m_min} treated and {cfg.m_min} control units")
        if f[j] <= current:
            break
        rule, current = rule.with_literal(j), float(f[j])
    logger.debug(f"Greedy init: {rule.describe(ds)} (f={current:.4f})")
    return rule


def local_search(anchor: SurrogateAnchor, init: Rule, cfg: SearchConfig) -> Rule:
    """
    Add, remove and swap literals while the surrogate improves.

    Adds and swaps must raise g by more than cfg.f_tolerance; removals are taken when g
    does not drop. Ties go to the lowest literal id.
    """
    tol = cfg.f_tolerance
    rule = init
    g = anchor.value(rule)
    cap = 10 * anchor.n_literals * cfg.max_len
    moves = 0

    while moves < cap:
        changed = False

        while len(rule) < cfg.max_len and moves < cap:
            values = anchor.add_values(rule)
            j = int(np.argmax(values))
            if not values[j] > g + tol:
                break
            rule, g = rule.with_literal(j), float(values[j])
            moves += 1
            changed = True

        while len(rule) > 1 and moves < cap:
            values = [anchor.value(rule.without(j)) for j in rule.literal_ids]
            best = int(np.argmax(values))
            if values[best] < g:
                break
            rule, g = rule.without(rule.literal_ids[best]), float(values[best])
            moves += 1
            changed = True

        best_swap, best_value = None, g + tol
        for i in rule.literal_ids:
            values = anchor.swap_values(rule, i)
            j = int(np.argmax(values))
            if values[j] > best_value:
                best_swap, best_value = (i, j), float(values[j])
        if best_swap is not None and moves < cap:
            rule, g = rule.swap(*best_swap), best_value
            moves += 1
            changed = True

        if not changed:
            break
    else:
        logger.warning(f"Local search stopped at the move cap ({cap}); returning the current rule")
    return rule


def _mm_from(init: Rule, ds: BinarizedDataset, cfg: SearchConfig, mask: Optional[OverlapMask],
             emit: Callable[[int, float, Rule], None]) -> tuple:
    current = init
    f_current = _objective(current, ds, cfg, mask)
    best, f_best = current, f_current
    emit(0, f_current, current)

    for m in range(1, cfg.max_mm_iters + 1):
        anchor = build_anchor(ds, current, cfg.lam, cfg.m_min, mask, bound=cfg.surrogate_bound)
        following = local_search(anchor, current, cfg)
        f_following = _objective(following, ds, cfg, mask)
        emit(m, f_following, following)
        logger.debug(f"MM step {m}: f={f_following:.6f} size={len(following)}")

        if f_following > f_best:
            best, f_best = following, f_following
        if following == current or f_following - f_current < cfg.f_tolerance:
            break
        current, f_current = following, f_following
    return best, f_best


def optimize_rule(ds: BinarizedDataset, cfg: SearchConfig, mask: Optional[OverlapMask] = None,
                  progress: Optional[ProgressCallback] = None, rule_index: int = 0) -> Rule:
    """
    MM loop for one rule, restarted from the greedy extension of each of the best
    cfg.n_starts singletons. Each step anchors the surrogate at the current rule and
    local-searches it; the best iterate by f over all starts is returned, ties going
    to the earlier start.
    """
    best, f_best = None, -np.inf
    seen = set()
    for s, literal in enumerate(start_literals(ds, cfg, mask)):
        init = greedy_init(ds, cfg, mask, start=literal)
        if init in seen:
            continue
        seen.add(init)

        def emit(m: int, f_value: float, rule: Rule, start=s) -> None:
            if progress:
                progress(ProgressEvent(rule_index, m, f_value, len(rule), start))

        found, f_found = _mm_from(init, ds, cfg, mask, emit)
        if best is None or f_found > f_best:
            best, f_best = found, f_found
    logger.debug(f"Best of {len(seen)} starts: {best.describe(ds)} (f={f_best:.4f})")
    return best


def learn_ruleset(ds: BinarizedDataset, cfg: SearchConfig,
                  progress: Optional[ProgressCallback] = None) -> RuleSet:
    """
    Learn up to cfg.k rules. A rule is accepted while its penalized objective is positive;
    treated units it covers then count epsilon instead of their outcome for later rules.
    """
    epsilon = cfg.epsilon if cfg.epsilon is not None else default_epsilon(ds)
    mask = OverlapMask.empty(ds, epsilon)
    rules = []

    for k in range(cfg.k):
        try:
            rule = optimize_rule(ds, cfg, mask, progress, rule_index=k)
        except NoFeasibleRule as e:
            logger.info(f"Stopping after {k} rules: {e}")
            break
        f_value = _objective(rule, ds, cfg, mask)
        if not f_value > 0:
            logger.info(f"Stopping after {k} rules: best candidate has f={f_value:.4f}")
            break
        accepted = make_causal_rule(rule, ds, cfg.lam, cfg.m_min)
        rules.append(accepted)
        mask = mask.add(rule_cover(rule, ds), ds.treatment)
        logger.info(f"Rule {k + 1}: {accepted.text()} (f={f_value:.4f})")

    hyperparams = {
        "lambda": cfg.lam,
        "K": cfg.k,
        "L": cfg.max_len,
        "epsilon": epsilon,
        "m_min": cfg.m_min,
    }
    fallback = ipw_ate(ds) if cfg.fallback else None
    return RuleSet(tuple(rules), hyperparams, fallback)
