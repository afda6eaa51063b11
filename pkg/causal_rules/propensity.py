"""
Propensity scores and inverse probability weights.

The propensity model is an L2-penalized logistic regression of the treatment flag on
the literal indicators, fitted by Newton steps with step halving. Scores are clipped
to [clip_lo, clip_hi] before weighting, since IPW is unstable near 0 and 1.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from loguru import logger
from scipy import linalg
from scipy.special import expit, logit

from .config import PropensityConfig
from .dataset import BinarizedDataset
from .errors import AllTreatedOrAllControl, ScoreOutOfRange


@dataclass(frozen=True, eq=False)
class PropensityModel:
    """Fitted logistic model; coefficients[0] is the intercept."""
    coefficients: np.ndarray
    feature_literals: tuple
    regularization_strength: float
    clip_bounds: tuple
    converged: bool
    iterations: int
    objective_trace: tuple = ()

    def design(self, ds: BinarizedDataset) -> np.ndarray:
        return _design_matrix(ds, self.feature_literals)

    def raw_scores(self, ds: BinarizedDataset) -> np.ndarray:
        return expit(self.design(ds) @ self.coefficients)

    def predict(self, ds: BinarizedDataset) -> np.ndarray:
        lo, hi = self.clip_bounds
        return np.clip(self.raw_scores(ds), lo, hi)

    def to_dict(self) -> dict:
        return {
            "coefficients": [float(c) for c in self.coefficients],
            "feature_literals": list(self.feature_literals),
            "l2": self.regularization_strength,
            "clip_bounds": list(self.clip_bounds),
            "converged": self.converged,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PropensityModel":
        return cls(
            coefficients=np.array(d["coefficients"], dtype=float),
            feature_literals=tuple(d["feature_literals"]),
            regularization_strength=d["l2"],
            clip_bounds=tuple(d["clip_bounds"]),
            converged=d["converged"],
            iterations=d["iterations"],
        )


def _design_matrix(ds: BinarizedDataset, feature_literals: tuple) -> np.ndarray:
    x = np.ones((ds.n_units, len(feature_literals) + 1))
    if feature_literals:
        x[:, 1:] = ds.coverage[list(feature_literals)].T
    return x


def _penalized_loglik(x: np.ndarray, t: np.ndarray, beta: np.ndarray, l2: float) -> float:
    z = x @ beta
    return float(np.sum(t * z - np.logaddexp(0.0, z)) - 0.5 * l2 * np.sum(beta[1:] ** 2))


def fit_propensity(ds: BinarizedDataset, l2: float = 1e-2, max_iter: int = 100, tol: float = 1e-8,
                   clip_bounds: tuple = (0.01, 0.99)) -> PropensityModel:
    """Maximize the L2-penalized Bernoulli log-likelihood of T given the literals."""
    t = ds.treatment.astype(float)
    n_treated = int(t.sum())
    if n_treated == 0 or n_treated == ds.n_units:
        raise AllTreatedOrAllControl(n_treated, ds.n_units)

    # One indicator per complementary pair; the other member is collinear with it.
    features = tuple(lit.id for lit in ds.literals if lit.kind in ("le", "eq"))
    x = _design_matrix(ds, features)
    p = x.shape[1]
    penalty = np.full(p, l2)
    penalty[0] = 0.0

    beta = np.zeros(p)
    beta[0] = logit(n_treated / ds.n_units)
    current = _penalized_loglik(x, t, beta, l2)
    trace = [current]
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        mu = expit(x @ beta)
        grad = x.T @ (t - mu) - penalty * beta
        hess = (x * (mu * (1.0 - mu))[:, None]).T @ x + np.diag(penalty)
        try:
            step = linalg.solve(hess, grad, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]

        scale = 1.0
        while True:
            candidate = beta + scale * step
            value = _penalized_loglik(x, t, candidate, l2)
            if value >= current or scale < 1e-10:
                break
            scale *= 0.5

        if value < current:
            # No ascent direction left at machine precision.
            converged = True
            break
        change = float(np.max(np.abs(candidate - beta)))
        beta, current = candidate, value
        trace.append(current)
        if change < tol:
            converged = True
            break

    if not converged:
        logger.warning(f"Propensity fit stopped after {iterations} iterations without converging")
    logger.debug(f"Propensity fit: {iterations} iterations, penalized log-likelihood {current:.4f}")
    return PropensityModel(
        coefficients=beta,
        feature_literals=features,
        regularization_strength=l2,
        clip_bounds=tuple(clip_bounds),
        converged=converged,
        iterations=iterations,
        objective_trace=tuple(trace),
    )


def fit_from_config(ds: BinarizedDataset, config: Optional[PropensityConfig] = None) -> PropensityModel:
    config = config or PropensityConfig()
    return fit_propensity(ds, config.l2, config.max_iter, config.tol, (config.clip_lo, config.clip_hi))


def compute_weights(ds: BinarizedDataset, model: Union[PropensityModel, np.ndarray],
                    clip_bounds: tuple = (0.01, 0.99)) -> np.ndarray:
    """w_i = T_i / e_i + (1 - T_i) / (1 - e_i) with clipped scores e_i."""
    if isinstance(model, PropensityModel):
        scores = model.predict(ds)
    else:
        scores = np.asarray(model, dtype=float)
        outside = ~((scores > 0) & (scores < 1))
        if outside.any():
            i = int(np.flatnonzero(outside)[0])
            raise ScoreOutOfRange(i, float(scores[i]))
        scores = np.clip(scores, *clip_bounds)
    t = ds.treatment.astype(float)
    return t / scores + (1.0 - t) / (1.0 - scores)


def weight_dataset(ds: BinarizedDataset, config: Optional[PropensityConfig] = None,
                   model: Optional[PropensityModel] = None) -> tuple[BinarizedDataset, Optional[PropensityModel]]:
    """
    Attach weights to a dataset.

    A precomputed propensity column wins; otherwise the given model is applied, or a
    new one is fitted on this dataset.
    """
    config = config or PropensityConfig()
    bounds = (config.clip_lo, config.clip_hi)
    if ds.propensity is not None:
        return ds.with_weights(compute_weights(ds, ds.propensity, bounds)), None
    if model is None:
        model = fit_from_config(ds, config)
    return ds.with_weights(compute_weights(ds, model)), model


def ipw_ate(ds: BinarizedDataset) -> float:
    """Normalized IPW estimate of the average treatment effect over all units."""
    w, y, t = ds.weights, ds.outcome, ds.treatment
    treated = np.sum(w[t] * y[t]) / np.sum(w[t])
    control = np.sum(w[~t] * y[~t]) / np.sum(w[~t])
    return float(treated - control)


def score_histogram(scores: np.ndarray, treatment: np.ndarray, bins: int = 10) -> dict:
    """Counts of propensity scores per group on a shared [0, 1] grid."""
    edges = np.linspace(0.0, 1.0, bins + 1)
    treatment = np.asarray(treatment).astype(bool)
    return {
        "edges": [float(e) for e in edges],
        "treated": [int(c) for c in np.histogram(scores[treatment], edges)[0]],
        "control": [int(c) for c in np.histogram(scores[~treatment], edges)[0]],
    }
