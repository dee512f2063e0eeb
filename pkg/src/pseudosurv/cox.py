"""Cox proportional hazards fitting and IPCW weight construction.

The same fitting routine serves two purposes: modelling the event time
distribution (linear reference predictor) and modelling the censoring time
distribution, from which per-subject inverse-probability-of-censoring weight
functions are derived.  Fitting is Newton-Raphson on the partial likelihood
with Breslow tie handling and step-halving.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import DataError, NumericError
from .estimators import StepSurvivalCurve, WeightFunction


@dataclass(frozen=True)
class CoxModel:
    """Fitted proportional hazards model.

    ``beta`` are log hazard ratios for the covariates named in
    ``covariate_names`` (centered at ``covariate_means`` before
    exponentiation); ``baseline_cumhaz`` is the Breslow cumulative baseline
    hazard at the centered covariates.  ``target`` records whether the model
    was fit to the event or the censoring indicator.
    """

    beta: np.ndarray
    baseline_cumhaz: StepSurvivalCurve
    covariate_means: np.ndarray
    covariate_names: tuple[str, ...]
    target: str
    loglik_path: tuple[float, ...] = ()

    def linear_predictor(self, covariates: np.ndarray) -> np.ndarray:
        """beta . (Z - means) for a (p,) vector or (n, p) matrix."""
        z = np.asarray(covariates, dtype=float)
        return (np.atleast_2d(z) - self.covariate_means) @ self.beta if z.ndim > 1 else (
            (z - self.covariate_means) @ self.beta
        )


def _select_columns(data: Dataset, covariates: Sequence[str] | None):
    if covariates is None:
        return data.covariates, tuple(data.covariate_names)
    names = tuple(covariates)
    cols = []
    for name in names:
        if name not in data.covariate_names:
            raise DataError(f"unknown covariate {name!r}")
        cols.append(data.covariate_names.index(name))
    return data.covariates[:, cols], names


def _partial_loglik(ts, ev, X, beta):
    """Breslow partial log-likelihood with gradient and Hessian.

    Inputs must be sorted by time ascending.  Risk-set aggregates are
    reverse cumulative sums evaluated at the first index of each tied group.
    """
    theta = X @ beta
    theta = theta - theta.max()  # rescale for a stable exp; cancels in every ratio
    r = np.exp(theta)
    s0 = np.cumsum(r[::-1])[::-1]
    s1 = np.cumsum((r[:, None] * X)[::-1], axis=0)[::-1]
    s2 = np.cumsum(np.einsum("i,ij,ik->ijk", r, X, X)[::-1], axis=0)[::-1]

    u, d = np.unique(ts[ev], return_counts=True)
    first = np.searchsorted(ts, u, side="left")
    s0u, s1u, s2u = s0[first], s1[first], s2[first]

    ll = theta[ev].sum() - (d * np.log(s0u)).sum()
    mean = s1u / s0u[:, None]
    grad = X[ev].sum(axis=0) - (d[:, None] * mean).sum(axis=0)
    hess = -(
        d[:, None, None] * (s2u / s0u[:, None, None] - mean[:, :, None] * mean[:, None, :])
    ).sum(axis=0)
    return ll, grad, hess


def fit_cox(
    data: Dataset,
    target: str = "event",
    covariates: Sequence[str] | None = None,
    max_iter: int = 50,
    tol: float = 1e-8,
) -> CoxModel:
    """Fit a Cox model to the event or censoring indicator.

    ``target='censoring'`` flips the indicator before fitting, so the model
    describes the censoring time distribution.  Convergence requires the
    gradient sup-norm to fall below ``tol``; each Newton step is halved until
    the partial log-likelihood does not decrease.
    """
    if target not in ("event", "censoring"):
        raise DataError("target must be 'event' or 'censoring'")
    X_raw, names = _select_columns(data, covariates)
    ev = data.event if target == "event" else ~data.event
    if not ev.any():
        raise DataError("no target events")

    order = np.argsort(data.time, kind="stable")
    ts = data.time[order]
    evs = ev[order]
    means = X_raw.mean(axis=0)
    X = X_raw[order] - means

    p = X.shape[1]
    beta = np.zeros(p)
    ll, grad, hess = _partial_loglik(ts, evs, X, beta)
    path = [ll]
    converged = False
    for _ in range(max_iter):
        if np.max(np.abs(grad)) <= tol:
            converged = True
            break
        try:
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            raise NumericError("cox did not converge") from None
        scale = 1.0
        for _ in range(30):
            ll_new, grad_new, hess_new = _partial_loglik(ts, evs, X, beta + scale * step)
            if ll_new >= ll - 1e-12 * max(1.0, abs(ll)):
                break
            scale *= 0.5
        else:
            raise NumericError("cox did not converge")
        beta = beta + scale * step
        ll, grad, hess = ll_new, grad_new, hess_new
        path.append(ll)
    if not converged and np.max(np.abs(grad)) > tol:
        raise NumericError("cox did not converge")

    # Breslow baseline at the converged (centered) coefficients.
    theta = X @ beta
    r = np.exp(theta)
    s0 = np.cumsum(r[::-1])[::-1]
    u, d = np.unique(ts[evs], return_counts=True)
    first = np.searchsorted(ts, u, side="left")
    baseline = StepSurvivalCurve(u, np.cumsum(d / s0[first]), 0.0)
    return CoxModel(beta, baseline, means, names, target, tuple(path))


def censoring_weights(data: Dataset, model: CoxModel, cap: float = 20.0) -> WeightFunction:
    """Per-subject IPCW weight functions from the fitted censoring model.

    G(t | Z_i) = exp(-Lambda_0(t) * exp(beta . (Z_i - means))); the weight at
    u is min(1 / G(u-), cap).  The same weight function is meant to be built
    once on the training split and reused everywhere weights are needed.
    """
    if cap <= 1.0:
        raise DataError("weight cap must exceed 1")
    if model.target != "censoring":
        raise DataError("model must be fit with target='censoring'")
    Z, _ = _select_columns(data, model.covariate_names)
    risk = np.exp((Z - model.covariate_means) @ model.beta)
    lam0 = model.baseline_cumhaz.values
    surv = np.exp(-np.outer(risk, lam0)) if lam0.size else np.ones((len(data), 0))
    # extreme risk scores underflow exp to 0; the cap makes the weight finite
    # either way, so floor at the smallest positive float to keep G in (0, 1]
    surv = np.maximum(surv, np.finfo(float).tiny)
    return WeightFunction(model.baseline_cumhaz.times, surv, cap)
