"""CATE/ATE summaries and validation metrics from posterior draws.

The CATE draw at unit ``i`` is the sampled value of ``g`` there, so CATE
draws are the ``g`` draws themselves and ATE draws are their per-draw means
over units. Intervals are equal-tailed quantiles of the draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DimensionMismatch, InsufficientDraws, TooFewUnits

__all__ = [
    "CateSummary",
    "DiagnosticsReport",
    "cate_draws",
    "ate_draws",
    "summarize",
    "diagnostics",
    "bin_by_quantile",
]


@dataclass(frozen=True, eq=False)
class CateSummary:
    point: np.ndarray
    lwr: np.ndarray
    upr: np.ndarray
    level: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "unit": np.arange(np.size(self.point)),
                "cate_point": np.atleast_1d(self.point),
                "cate_lwr": np.atleast_1d(self.lwr),
                "cate_upr": np.atleast_1d(self.upr),
            }
        )


@dataclass(frozen=True)
class DiagnosticsReport:
    mse: float
    bias: float
    coverage: float

    def as_dict(self):
        return {"mse": self.mse, "bias": self.bias, "coverage": self.coverage}


def cate_draws(draws) -> np.ndarray:
    """The (K', n) matrix of CATE draws, i.e. ``draws.g_draws``."""
    return np.atleast_2d(draws.g_draws)


def ate_draws(cate) -> np.ndarray:
    cate = np.atleast_2d(np.asarray(cate, dtype=float))
    if cate.shape[1] < 1:
        raise DimensionMismatch("need at least one unit")
    return cate.mean(axis=1)


def summarize(draws, level=0.95) -> CateSummary:
    """Posterior mean and equal-tailed ``level`` interval.

    A vector is treated as draws of one scalar; a (K', n) matrix is
    summarized column by column. Quantiles interpolate linearly between
    order statistics.

    >>> s = summarize(np.arange(1, 101), 0.95)
    >>> float(s.point), float(s.lwr), float(s.upr)
    (50.5, 3.475, 97.525)
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    d = np.asarray(draws, dtype=float)
    if d.shape[0] < 2:
        raise InsufficientDraws(f"need at least 2 draws, got {d.shape[0]}")
    alpha = 1.0 - level
    lwr, upr = np.quantile(d, [alpha / 2.0, 1.0 - alpha / 2.0], axis=0)
    return CateSummary(point=d.mean(axis=0), lwr=lwr, upr=upr, level=level)


def diagnostics(true_cate, summary: CateSummary) -> DiagnosticsReport:
    """MSE, bias (truth minus estimate, averaged) and interval coverage."""
    tau = np.asarray(true_cate, dtype=float).reshape(-1)
    est = np.asarray(summary.point, dtype=float).reshape(-1)
    lwr = np.asarray(summary.lwr, dtype=float).reshape(-1)
    upr = np.asarray(summary.upr, dtype=float).reshape(-1)
    if not (tau.size == est.size == lwr.size == upr.size):
        raise DimensionMismatch(f"{tau.size} true effects but {est.size} estimates")
    err = tau - est
    return DiagnosticsReport(
        mse=float(np.mean(err**2)),
        bias=float(np.mean(err)),
        coverage=float(np.mean((tau >= lwr) & (tau <= upr))),
    )


def _quantile_bins(values, n_bins):
    # equal-count bins by rank; ties broken by position so the split is stable
    n = values.size
    order = np.argsort(values, kind="stable")
    bins = np.empty(n, dtype=int)
    bins[order] = (np.arange(n) * n_bins) // n
    return bins


def bin_by_quantile(values, cate, n_bins=10, level=0.95) -> pd.DataFrame:
    """Summaries of the mean CATE within quantile bins of ``values``.

    Units are split into ``n_bins`` equal-count groups by the rank of
    ``values``. For every draw the CATE is averaged within each bin; the bin
    point is the mean of those bin means and the interval their
    equal-tailed quantiles.

    Returns a frame with columns ``bin, n_units, mean_value, point, lwr, upr``.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    cate = np.atleast_2d(np.asarray(cate, dtype=float))
    n = values.size
    if cate.shape[1] != n:
        raise DimensionMismatch(f"{n} values but {cate.shape[1]} units in the draws")
    if n_bins < 1 or n < n_bins:
        raise TooFewUnits(f"cannot split {n} units into {n_bins} bins")
    bins = _quantile_bins(values, n_bins)
    rows = []
    for b in range(n_bins):
        idx = bins == b
        s = summarize(cate[:, idx].mean(axis=1), level)
        rows.append((b + 1, int(idx.sum()), float(values[idx].mean()), float(s.point), float(s.lwr), float(s.upr)))
    return pd.DataFrame(rows, columns=["bin", "n_units", "mean_value", "point", "lwr", "upr"])
