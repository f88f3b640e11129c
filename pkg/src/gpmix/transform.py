"""Transformed response variable and checks of its two key identities.

For a unit with response ``y``, treatment ``w`` and assignment probability
``e`` the transformed response is

    ystar = (w - e) * y / (e * (1 - e)),

which reduces to ``y / e`` for treated and ``-y / (1 - e)`` for control
units, and whose conditional mean given the covariates is the CATE.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .core import TransformedOutcome
from .errors import DimensionMismatch, PropensityOutOfRange

__all__ = [
    "DEFAULT_CLIP_EPS",
    "clip_propensity",
    "transform_outcome",
    "verify_mixture_identity",
    "CateIdentityCheck",
    "mc_check_cate_identity",
]

DEFAULT_CLIP_EPS = 0.01


def clip_propensity(e, eps=DEFAULT_CLIP_EPS):
    """Clamp propensities into ``[eps, 1 - eps]``.

    Returns the clipped array and the number of entries that moved.
    """
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 0.5), got {eps}")
    e = np.asarray(e, dtype=float)
    clipped = np.clip(e, eps, 1.0 - eps)
    return clipped, int(np.count_nonzero(clipped != e))


def transform_outcome(y, w, e, eps=DEFAULT_CLIP_EPS) -> TransformedOutcome:
    y = np.asarray(y, dtype=float).reshape(-1)
    w = np.asarray(w).reshape(-1)
    e = np.asarray(e, dtype=float).reshape(-1)
    if not (y.size == w.size == e.size):
        raise DimensionMismatch(f"lengths y={y.size}, w={w.size}, e={e.size}")
    if np.any(~np.isfinite(e)) or np.any(e < 0.0) or np.any(e > 1.0):
        raise PropensityOutOfRange("propensities must lie in [0, 1] before clipping")
    e_used, n_clipped = clip_propensity(e, eps)
    ystar = (w - e_used) * y / (e_used * (1.0 - e_used))
    return TransformedOutcome(ystar=ystar, e_used=e_used, n_clipped=n_clipped)


def verify_mixture_identity(f1, f0, e, eps_noise, w):
    """Residual between the transformed response and its mixture decomposition.

    Builds ``y = f_w + eps_noise``, transforms it, and subtracts
    ``g + (1 - e) h + eps/e`` (treated) or ``g - e h + eps/(e - 1)`` (control)
    with ``g = f1 - f0`` and ``h = f1/e + f0/(1 - e)``. Works elementwise on
    arrays; the result should be zero up to rounding.
    """
    f1, f0, e, eps_noise, w = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (f1, f0, e, eps_noise, w))
    )
    y = w * (f1 + eps_noise) + (1.0 - w) * (f0 + eps_noise)
    ystar = (w - e) * y / (e * (1.0 - e))
    g = f1 - f0
    h = f1 / e + f0 / (1.0 - e)
    treated = g + (1.0 - e) * h + eps_noise / e
    control = g - e * h + eps_noise / (e - 1.0)
    resid = ystar - np.where(w == 1.0, treated, control)
    return float(resid) if resid.ndim == 0 else resid


class CateIdentityCheck(NamedTuple):
    x: np.ndarray
    mean: np.ndarray  # empirical mean of ystar at each grid point
    target: np.ndarray  # f1(x) - f0(x)
    se: np.ndarray  # Monte Carlo standard error of ``mean``

    def within(self, n_se=3.0):
        return np.abs(self.mean - self.target) <= n_se * self.se


def mc_check_cate_identity(
    f1: Callable,
    f0: Callable,
    e_fn: Callable,
    x_grid,
    draws: int,
    rng: np.random.Generator,
    noise_sd: float = 0.1,
) -> CateIdentityCheck:
    """Monte Carlo check that the transformed response is unbiased for the CATE.

    At each grid point, simulates ``draws`` units with ``w ~ Bernoulli(e(x))``
    and ``y = f_w(x) + N(0, noise_sd^2)``, transforms, and reports the sample
    mean of ``ystar`` with its standard error next to ``f1(x) - f0(x)``.
    """
    if draws < 10_000:
        raise ValueError("draws must be at least 1e4")
    xs = [np.asarray(x, dtype=float) for x in x_grid]
    means, targets, ses = [], [], []
    for x in xs:
        e = float(e_fn(x))
        w = (rng.random(draws) < e).astype(float)
        y1 = float(f1(x)) + noise_sd * rng.standard_normal(draws)
        y0 = float(f0(x)) + noise_sd * rng.standard_normal(draws)
        y = np.where(w == 1.0, y1, y0)
        ystar = transform_outcome(y, w, np.full(draws, e), eps=1e-12).ystar
        means.append(ystar.mean())
        ses.append(ystar.std(ddof=1) / np.sqrt(draws))
        targets.append(float(f1(x)) - float(f0(x)))
    return CateIdentityCheck(
        x=np.array([np.squeeze(x) for x in xs]),
        mean=np.array(means),
        target=np.array(targets),
        se=np.array(ses),
    )
