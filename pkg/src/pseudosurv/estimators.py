"""Nonparametric survival estimation primitives.

Everything here is expressed over one right-continuous step-function
representation: a curve is its jump locations plus the value that holds from
each jump onward, with a single initial value before the first jump.
Evaluation is a binary search, so curves stay cheap no matter how dense the
time axis is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DataError


@dataclass(frozen=True)
class StepSurvivalCurve:
    """Right-continuous step function used for survival and hazard estimates.

    ``values[k]`` holds on [times[k], times[k+1]); ``initial_value`` holds on
    [0, times[0]).  Survival curves start at 1 and fall; cumulative hazards
    start at 0 and rise.
    """

    times: np.ndarray
    values: np.ndarray
    initial_value: float = 1.0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or values.shape != times.shape:
            raise DataError("curve times and values must be 1-d and equal length")
        if times.size and np.any(np.diff(times) <= 0):
            raise DataError("curve times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "initial_value", float(self.initial_value))

    def _eval(self, t, side: str):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise DataError("evaluation time must be nonnegative")
        idx = np.searchsorted(self.times, t_arr, side=side) - 1
        if self.times.size:
            out = np.where(idx < 0, self.initial_value, self.values[np.maximum(idx, 0)])
        else:
            out = np.full_like(t_arr, self.initial_value, dtype=float)
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def at(self, t):
        """Right-continuous evaluation: value of the latest jump at or before t."""
        return self._eval(t, side="right")

    def at_left(self, t):
        """Left limit: value just before t (jumps at t excluded)."""
        return self._eval(t, side="left")


def curve_eval(curve: StepSurvivalCurve, t):
    """Evaluate a step curve at time(s) ``t`` (right-continuous)."""
    return curve.at(t)


def _event_table(time: np.ndarray, event: np.ndarray):
    """Distinct event times with death counts and at-risk counts.

    Ties are handled with the standard convention: subjects censored at an
    event time are still in the risk set for that time.
    """
    sorted_times = np.sort(time)
    u, d = np.unique(time[event], return_counts=True)
    n_at_risk = time.size - np.searchsorted(sorted_times, u, side="left")
    return u, d, n_at_risk


def kaplan_meier(data: Dataset) -> StepSurvivalCurve:
    """Product-limit estimate of S(t) = P(T > t).

    With no events the curve is flat at 1.  The jump at a tied time counts
    deaths against a risk set that still contains same-time censorings.

    Consecutive factors telescope wherever no censoring intervenes, so the
    product is accumulated per censoring-free run: on fully uncensored data
    every value is a single division, survivors / n, hence exactly the
    empirical survival function.
    """
    if len(data) == 0:
        raise DataError("empty dataset")
    u, d, n = _event_table(data.time, data.event)
    if u.size == 0:
        return StepSurvivalCurve(u, d.astype(float), 1.0)
    survivors = n - d
    # a run breaks where censorings shrink the risk set between event times
    breaks = np.empty(u.size, dtype=bool)
    breaks[0] = True
    breaks[1:] = n[1:] != survivors[:-1]
    run_id = np.cumsum(breaks) - 1
    run_start = n[breaks]
    run_end_ratio = survivors[np.concatenate((breaks[1:], [True]))] / run_start
    base = np.concatenate(([1.0], np.cumprod(run_end_ratio)[:-1]))
    values = base[run_id] * (survivors / run_start[run_id])
    return StepSurvivalCurve(u, values, 1.0)


def censoring_kaplan_meier(data: Dataset) -> StepSurvivalCurve:
    """Kaplan-Meier estimate of the censoring distribution (flipped indicator)."""
    flipped = Dataset(data.time, ~data.event, data.covariates, data.covariate_names)
    return kaplan_meier(flipped)


@dataclass(frozen=True)
class WeightFunction:
    """Per-subject inverse-probability-of-censoring weights.

    Stores one censoring survival curve G(t | Z_i) per subject on a shared
    jump grid (``surv_values`` row i), all starting at 1 before the first
    jump.  The weight of subject i at time u is min(1 / G(u- | Z_i), cap):
    the left limit of the censoring survival curve, capped to keep the
    variance finite deep in the censoring tail.
    """

    times: np.ndarray
    surv_values: np.ndarray
    cap: float = 20.0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        vals = np.asarray(self.surv_values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] != times.size:
            raise DataError("surv_values must be (n_subjects, len(times))")
        if times.size and np.any(np.diff(times) <= 0):
            raise DataError("weight times must be strictly increasing")
        if vals.size and (np.any(vals <= 0) or np.any(vals > 1.0 + 1e-12)):
            raise DataError("censoring survival values must lie in (0, 1]")
        if self.cap <= 0:
            raise DataError("weight cap must be positive")
        times.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "surv_values", vals)
        object.__setattr__(self, "cap", float(self.cap))

    @property
    def n_subjects(self) -> int:
        return self.surv_values.shape[0]

    def censoring_survival(self, i: int) -> StepSurvivalCurve:
        """The stored G(t | Z_i) curve for one subject."""
        return StepSurvivalCurve(self.times, self.surv_values[i], 1.0)

    def survival_at_left(self, u) -> np.ndarray:
        """G(u- | Z_i) for every subject: shape (n,) or (n, len(u))."""
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        idx = np.searchsorted(self.times, u_arr, side="left") - 1
        if self.times.size:
            g = np.where(idx < 0, 1.0, self.surv_values[:, np.maximum(idx, 0)])
        else:
            g = np.ones((self.n_subjects, u_arr.size))
        return g[:, 0] if np.isscalar(u) or np.asarray(u).ndim == 0 else g

    def weights_at(self, u) -> np.ndarray:
        """Capped IPCW weights min(1/G(u-), cap) for every subject at ``u``."""
        g = self.survival_at_left(u)
        return np.minimum(1.0 / g, self.cap)

    def weight(self, i: int, u) -> float:
        g = self.censoring_survival(i).at_left(u)
        return float(np.minimum(1.0 / g, self.cap))

    def subset(self, indices) -> "WeightFunction":
        idx = np.asarray(indices)
        return WeightFunction(self.times, self.surv_values[idx], self.cap)

    @classmethod
    def constant(cls, weights, cap: float | None = None) -> "WeightFunction":
        """Weights that are constant in time, one value >= 1 per subject."""
        w = np.atleast_1d(np.asarray(weights, dtype=float))
        if np.any(w < 1.0):
            raise DataError("constant weights must be >= 1 (they are 1/G with G <= 1)")
        if cap is None:
            cap = max(20.0, float(w.max()))
        return cls(np.array([0.0]), (1.0 / w)[:, None], cap)


def nelson_aalen_weighted(data: Dataset, weights: WeightFunction) -> StepSurvivalCurve:
    """IPCW-weighted Nelson-Aalen cumulative hazard.

    Each jump is (sum of weights of events at u) / (weighted at-risk total at
    u).  With all weights equal the weights cancel and the plain Nelson-Aalen
    estimator comes back.
    """
    if len(data) == 0:
        raise DataError("empty dataset")
    if weights.n_subjects != len(data):
        raise DataError("weight function does not match dataset size")
    u = np.unique(data.time[data.event])
    if u.size == 0:
        return StepSurvivalCurve(u, np.empty(0), 0.0)
    w = weights.weights_at(u)
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise DataError("invalid weight")
    at_risk = data.time[:, None] >= u[None, :]
    event_at = (data.time[:, None] == u[None, :]) & data.event[:, None]
    num = (w * event_at).sum(axis=0)
    den = (w * at_risk).sum(axis=0)
    return StepSurvivalCurve(u, np.cumsum(num / den), 0.0)


def nelson_aalen(data: Dataset) -> StepSurvivalCurve:
    """Unweighted Nelson-Aalen cumulative hazard."""
    if len(data) == 0:
        raise DataError("empty dataset")
    u, d, n = _event_table(data.time, data.event)
    return StepSurvivalCurve(u, np.cumsum(d / n), 0.0)


def ipcw_survival(data: Dataset, weights: WeightFunction) -> StepSurvivalCurve:
    """IPCW survival estimate exp(-weighted cumulative hazard)."""
    cumhaz = nelson_aalen_weighted(data, weights)
    return StepSurvivalCurve(cumhaz.times, np.exp(-cumhaz.values), 1.0)
