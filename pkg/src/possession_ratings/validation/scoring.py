"""Proper scoring rules and the paired t-test."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .matches import OUTCOMES

# (H, D, A) indicator vectors
_INDICATOR = {"H": np.array([1.0, 0.0, 0.0]), "D": np.array([0.0, 1.0, 0.0]),
              "A": np.array([0.0, 0.0, 1.0])}


def brier(forecast, outcome: str) -> float:
    """``sum_i (d_i - p_i)^2`` over the three outcomes; in [0, 2]."""
    return float(np.sum((_INDICATOR[outcome] - forecast.vector()) ** 2))


def informational_loss(forecast, outcome: str) -> float:
    """``-log2`` of the probability on the realised outcome; +inf when it is 0."""
    p = forecast.prob(outcome)
    return math.inf if p <= 0 else -math.log2(p)


@dataclass
class LossTable:
    bs: np.ndarray
    il: np.ndarray
    infinite_il: bool

    @property
    def mean_bs(self) -> float:
        return float(np.mean(self.bs))

    @property
    def mean_il(self) -> float:
        return float(np.mean(self.il))


def score_forecasts(forecasts, outcomes) -> LossTable:
    forecasts, outcomes = list(forecasts), list(outcomes)
    if len(forecasts) != len(outcomes):
        raise ValueError("forecasts and outcomes differ in length")
    for o in outcomes:
        if o not in OUTCOMES:
            raise ValueError(f"unknown outcome {o!r}")
    bs = np.array([brier(f, o) for f, o in zip(forecasts, outcomes)])
    il = np.array([informational_loss(f, o) for f, o in zip(forecasts, outcomes)])
    flagged = bool(np.any(np.isinf(il)))
    if flagged:
        warnings.warn("zero probability on a realised outcome: infinite informational loss",
                      stacklevel=2)
    return LossTable(bs, il, flagged)


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int
    degenerate: bool = False


def paired_ttest(a, b) -> TTestResult:
    """Two-sided paired t-test on ``d = a - b``.

    Zero spread in ``d`` gives p = 1 when mean(d) = 0 and p = 0 (flagged) otherwise.
    """
    a, b = np.asarray(a, float), np.asarray(b, float)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("need two equal-length loss vectors with at least 2 entries")
    d = a - b
    n = d.size
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, n - 1)
        return TTestResult(math.copysign(math.inf, mean), 0.0, n - 1, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, float(2.0 * stats.t.sf(abs(t), n - 1)), n - 1)
