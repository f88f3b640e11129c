"""Synthetic benchmark data with known treatment effects.

``gen_case_a`` is a 40-covariate design with correlated binary and count
covariates and a strongly nonlinear effect surface; ``gen_case_b`` is a
5-covariate design whose effect is ``1 + 2 x2 x3 + 15 x3``. Both default to
n = 250 units and return the true propensities alongside the data.

The outcome formulas are exposed separately (``case_a_outcomes``,
``case_b_outcomes``) so they can be evaluated at hand-picked covariates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import Dataset, validate_dataset
from .numerics import make_rng

__all__ = [
    "NOISE_SD",
    "POISSON_RATE_FLOOR",
    "CASE_B_STEP",
    "SyntheticDataset",
    "case_a_covariates",
    "case_a_outcomes",
    "gen_case_a",
    "case_b_covariates",
    "case_b_outcomes",
    "case_b_cate",
    "gen_case_b",
]

NOISE_SD = 0.01  # variance 1e-4
POISSON_RATE_FLOOR = 1e-3
CASE_B_STEP = np.array([2.0, -1.0, -4.0])  # step function of x5 in {0, 1, 2}


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    dataset: Dataset
    true_cate: np.ndarray
    true_e: np.ndarray
    y1: np.ndarray
    y0: np.ndarray


def _col(x, k):
    # covariates are numbered from 1
    return x[:, k - 1]


def case_a_covariates(n, rng):
    x = np.empty((n, 40))
    x[:, 0:15] = rng.standard_normal((n, 15))
    x[:, 15:30] = rng.random((n, 15))
    for k in range(31, 36):
        q = expit(_col(x, k - 30) - _col(x, k - 15))
        x[:, k - 1] = (rng.random(n) < q).astype(float)
    for k in range(36, 41):
        lam = 5.0 + 0.75 * _col(x, k - 35) * (_col(x, k - 20) + _col(x, k - 5))
        x[:, k - 1] = rng.poisson(np.maximum(lam, POISSON_RATE_FLOOR))
    return x


def case_a_outcomes(x):
    """Noise-free (mu0, mu1, propensity) for Case A covariates (n, 40)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s1_5 = x[:, 0:5].sum(axis=1)
    s36_40 = x[:, 35:40].sum(axis=1)
    logit = 0.3 * s1_5 - 0.5 * x[:, 20:25].sum(axis=1) - 0.0001 * x[:, 25:35].sum(axis=1) + 0.055 * s36_40
    prop = expit(logit)
    num = np.sum(x[:, 15:19] * np.exp(x[:, 29:33]), axis=1)
    f = num / (1.0 + num)
    mu0 = 0.15 * s1_5 + 1.5 * np.exp(1.0 + 1.5 * f)
    x15 = x[:, 0:5]
    mu1 = np.sum(2.15 * x15 + 2.75 * x15**2 + 10.0 * x15**3, axis=1) + 1.25 * np.sqrt(0.5 + 1.5 * s36_40)
    return mu0, mu1, prop


def case_b_covariates(n, rng):
    x = np.empty((n, 5))
    x[:, 0:3] = rng.standard_normal((n, 3))
    x[:, 3] = (rng.random(n) < 0.25).astype(float)
    x[:, 4] = rng.binomial(2, 0.5, size=n)
    return x


def case_b_outcomes(x):
    """Noise-free (mu0, mu1, propensity) for Case B covariates (n, 5)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    x1, x2, x3, x4, x5 = (x[:, k] for k in range(5))
    prop = expit(0.1 * x1 - 0.001 * x2 + 0.275 * x3 - 0.03 * x4)
    f = -6.0 + CASE_B_STEP[x5.astype(int)] + np.abs(x3 - 1.0)
    mu0 = f - 15.0 * x3
    mu1 = f + (1.0 + 2.0 * x2 * x3)
    return mu0, mu1, prop


def case_b_cate(x):
    """``1 + 2 x2 x3 + 15 x3``, the exact noise-free effect for Case B."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return 1.0 + 2.0 * x[:, 1] * x[:, 2] + 15.0 * x[:, 2]


def _assemble(x, outcomes, rng, cate=None):
    n = x.shape[0]
    mu0, mu1, prop = outcomes(x)
    w = (rng.random(n) < prop).astype(np.int64)
    # independent noise for each potential outcome
    y0 = mu0 + NOISE_SD * rng.standard_normal(n)
    y1 = mu1 + NOISE_SD * rng.standard_normal(n)
    y = np.where(w == 1, y1, y0)
    return SyntheticDataset(
        dataset=validate_dataset(x, y, w, prop),
        true_cate=mu1 - mu0 if cate is None else cate(x),
        true_e=prop,
        y1=y1,
        y0=y0,
    )


def gen_case_a(n=250, seed=0) -> SyntheticDataset:
    rng = make_rng(seed)
    return _assemble(case_a_covariates(n, rng), case_a_outcomes, rng)


def gen_case_b(n=250, seed=0) -> SyntheticDataset:
    rng = make_rng(seed)
    return _assemble(case_b_covariates(n, rng), case_b_outcomes, rng, case_b_cate)
