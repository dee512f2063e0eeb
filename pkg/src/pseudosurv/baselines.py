"""Reference predictors: linear Cox survival curves and pseudo-value GEE.

The GEE regresses marginal pseudo survival probabilities on covariates
through the complementary log-log link, log(-log S) = alpha_j + beta . Z,
solved with independence working correlation.  Under a proportional hazards
generator beta matches the Cox log hazard ratio, which makes the fit a
useful bias probe: with covariate-dependent censoring the plain pseudo
values attenuate beta, while IPCW pseudo values restore it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cox import CoxModel, censoring_weights, fit_cox
from .data import Dataset
from .errors import DataError, NumericError
from .pseudo import TimeGrid, pseudo_marginal


def cox_predict_survival(model: CoxModel, covariates, t):
    """S_0(t) ** exp(beta . (Z - means)) with S_0 = exp(-baseline cumhaz)."""
    if model.target != "event":
        raise DataError("model must be fit with target='event'")
    base = np.exp(-np.asarray(model.baseline_cumhaz.at(t), dtype=float))
    theta = model.linear_predictor(np.asarray(covariates, dtype=float))
    if np.ndim(theta) == 0:
        return base ** np.exp(theta)
    return np.power.outer(base, np.exp(theta)).T if np.ndim(base) else base ** np.exp(theta)


@dataclass(frozen=True)
class GeeModel:
    """Fitted pseudo-value regression: one intercept per grid time plus slopes."""

    time_intercepts: np.ndarray
    beta: np.ndarray
    cutpoints: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "time_intercepts", np.asarray(self.time_intercepts, dtype=float))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        object.__setattr__(self, "cutpoints", np.asarray(self.cutpoints, dtype=float))


def _cloglog_mean(eta):
    return np.exp(-np.exp(eta))


def fit_gee(
    data: Dataset,
    grid: TimeGrid,
    ipcw: bool = False,
    cap: float = 20.0,
    censoring_covariates: Sequence[str] | None = None,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> GeeModel:
    """Fit the pseudo-value regression on marginal pseudo values at the grid times.

    With ``ipcw`` a Cox censoring model (all covariates unless a subset is
    named) supplies the weights used inside the pseudo-value construction.
    The estimating equations (independence working correlation, identity
    variance) are solved by Gauss-Newton with step halving on the residual
    sum of squares; pseudo responses outside (0, 1) are used as-is.
    """
    weights = None
    if ipcw:
        censor_model = fit_cox(data, target="censoring", covariates=censoring_covariates)
        weights = censoring_weights(data, censor_model, cap=cap)

    n, p = len(data), data.p
    J = grid.n_intervals
    cuts = grid.cutpoints
    ys = [pseudo_marginal(data, float(t), weights) for t in cuts]
    y = np.concatenate(ys)
    X = np.zeros((n * J, J + p))
    for j in range(J):
        X[j * n : (j + 1) * n, j] = 1.0
        X[j * n : (j + 1) * n, J:] = data.covariates

    theta = np.zeros(J + p)
    theta[:J] = np.log(-np.log(np.clip([v.mean() for v in ys], 0.01, 0.99)))

    def sse(t):
        r = y - _cloglog_mean(X @ t)
        return float(r @ r)

    current = sse(theta)
    for _ in range(max_iter):
        eta = X @ theta
        mu = _cloglog_mean(eta)
        dmu = -np.exp(eta - np.exp(eta))
        jac = dmu[:, None] * X
        resid = y - mu
        delta, *_ = np.linalg.lstsq(jac, resid, rcond=None)
        scale = 1.0
        for _ in range(40):
            candidate = sse(theta + scale * delta)
            if candidate <= current + 1e-12 * max(1.0, current):
                break
            scale *= 0.5
        else:
            raise NumericError("gee did not converge")
        theta = theta + scale * delta
        current = candidate
        if np.max(np.abs(scale * delta)) <= tol:
            return GeeModel(theta[:J], theta[J:], cuts)
    raise NumericError("gee did not converge")


def gee_predict_survival(model: GeeModel, covariates, time_index: int) -> float:
    """exp(-exp(alpha_j + beta . Z)) for one grid time."""
    if not 0 <= time_index < model.time_intercepts.size:
        raise DataError("time_index out of range")
    eta = model.time_intercepts[time_index] + np.asarray(covariates, dtype=float) @ model.beta
    return float(_cloglog_mean(eta))
