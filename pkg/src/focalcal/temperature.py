"""Post-hoc temperature scaling: apply a temperature to logits and fit
one on a validation split, either by grid search on the binned
calibration gap (the stronger baseline) or by 1-D search on NLL.

Scaling divides logits by T > 0 before the softmax, so predictions (and
therefore accuracy) are untouched while confidences reshape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metrics import DEFAULT_BINS, EvalSet, LogitSet, ece, nll
from .numerics import minimize_1d

# Grid searched by the calibration-gap criterion: 0.1, 0.2, ..., 10.0.
# T = 0 is excluded (undefined division).
ECE_GRID = tuple(i / 10.0 for i in range(1, 101))

NLL_T_BOUNDS = (0.01, 100.0)


@dataclass(frozen=True)
class TemperatureFit:
    """A fitted temperature, the criterion used, and its value at T."""

    temperature: float
    criterion: str
    value: float

    def to_json(self) -> dict:
        return {"temperature": self.temperature, "criterion": self.criterion,
                "value": self.value}


def apply_temperature(logit_set: LogitSet, t: float) -> EvalSet:
    """Rowwise temperature-scaled softmax of a logit set.

    Top-1 predictions are identical to the T = 1 predictions for every
    positive temperature.
    """
    if t <= 0:
        raise ValueError("non-positive temperature")
    return EvalSet.from_logits(logit_set, t=t)


def fit_temperature_ece(val: LogitSet, m: int = DEFAULT_BINS) -> TemperatureFit:
    """Grid-search the temperature minimizing the validation set's binned
    calibration gap over ECE_GRID; ties resolve to the smallest T."""
    if val.n < 1:
        raise ValueError("empty validation set")
    values = np.array([ece(apply_temperature(val, t), m) for t in ECE_GRID])
    best = int(np.argmin(values))  # first minimum = smallest T on a tie
    return TemperatureFit(ECE_GRID[best], "ece_grid", float(values[best]))


def fit_temperature_nll(val: LogitSet) -> TemperatureFit:
    """Fit the temperature by minimizing validation NLL.

    Runs golden-section search on log T over [0.01, 100]; if the search
    result does not beat T = 1 the fit falls back to 1, so the returned
    NLL never exceeds the unscaled one.
    """
    if val.n < 1:
        raise ValueError("empty validation set")

    def objective(u: float) -> float:
        return nll(apply_temperature(val, math.exp(u)))

    lo, hi = math.log(NLL_T_BOUNDS[0]), math.log(NLL_T_BOUNDS[1])
    t = math.exp(minimize_1d(objective, lo, hi, tol=1e-9))
    value = nll(apply_temperature(val, t))
    base = nll(apply_temperature(val, 1.0))
    if base < value:
        t, value = 1.0, base
    return TemperatureFit(t, "nll_descent", value)
