"""Covariance kernels for the two GP priors and Gram-matrix construction.

``g`` (the treatment effect) gets a non-stationary linear kernel

    k_g(u, v) = s0_sq + sum_i s_sq[i] * (u[i] - c[i]) * (v[i] - c[i])

and ``h`` (the nuisance mixture-location function) a squared exponential

    k_h(u, v) = sh_sq * exp(-bandwidth_sq * ||u - v||^2).

Both kernel classes are callables on a pair of points and also expose a
vectorized ``matrix(x)``; :func:`gram` uses the latter when present.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .core import ModelHyperParams
from .errors import DimensionMismatch, NonPositiveParameter, NotFactorizable, NotPSD
from .numerics import chol_psd

__all__ = [
    "LinearKernelParams",
    "SeKernelParams",
    "LinearKernel",
    "SeKernel",
    "linear_kernel",
    "se_kernel",
    "gram",
    "default_hyperparams",
    "kernels_from_hypers",
]


@dataclass(frozen=True, eq=False)
class LinearKernelParams:
    s0_sq: float
    s_sq: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        s_sq = np.atleast_1d(np.asarray(self.s_sq, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if s_sq.shape != c.shape:
            raise DimensionMismatch("s_sq and c must have the same length")
        if not self.s0_sq > 0 or not np.all(s_sq > 0):
            raise NonPositiveParameter("linear kernel variances must be > 0")
        object.__setattr__(self, "s_sq", s_sq)
        object.__setattr__(self, "c", c)


@dataclass(frozen=True)
class SeKernelParams:
    sh_sq: float
    bandwidth_sq: float

    def __post_init__(self):
        if not (self.sh_sq > 0 and self.bandwidth_sq > 0):
            raise NonPositiveParameter("SE kernel parameters must be > 0")


def _pair(u, v, p):
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if u.shape != v.shape or (p is not None and u.size != p):
        raise DimensionMismatch(f"points of shape {u.shape} and {v.shape} for a p={p} kernel")
    return u, v


class LinearKernel:
    def __init__(self, params: LinearKernelParams):
        self.params = params

    def __call__(self, u, v) -> float:
        prm = self.params
        u, v = _pair(u, v, prm.c.size)
        return float(prm.s0_sq + np.sum(prm.s_sq * (u - prm.c) * (v - prm.c)))

    def matrix(self, x):
        prm = self.params
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != prm.c.size:
            raise DimensionMismatch(f"x has {x.shape[1]} columns, kernel expects {prm.c.size}")
        z = (x - prm.c) * np.sqrt(prm.s_sq)
        return prm.s0_sq + z @ z.T


class SeKernel:
    def __init__(self, params: SeKernelParams):
        self.params = params

    def __call__(self, u, v) -> float:
        u, v = _pair(u, v, None)
        d2 = float(np.sum((u - v) ** 2))
        return self.params.sh_sq * float(np.exp(-self.params.bandwidth_sq * d2))

    def matrix(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d2 = squareform(pdist(x, "sqeuclidean"))
        return self.params.sh_sq * np.exp(-self.params.bandwidth_sq * d2)


def linear_kernel(u, v, params: LinearKernelParams) -> float:
    return LinearKernel(params)(u, v)


def se_kernel(u, v, params: SeKernelParams) -> float:
    return SeKernel(params)(u, v)


def gram(kernel, x, jitter=1e-8):
    """Gram matrix ``K[i, j] = kernel(x[i], x[j])``.

    ``kernel`` is any callable on two points; kernels with a ``matrix``
    method are evaluated in vectorized form. The upper triangle is mirrored
    so the result is exactly symmetric, and the matrix is checked to admit a
    jittered Cholesky factorization (:class:`NotPSD` otherwise). The returned
    matrix does not include the jitter.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    if n == 0:
        raise DimensionMismatch("x is empty")
    if hasattr(kernel, "matrix"):
        k = np.asarray(kernel.matrix(x), dtype=float)
    else:
        k = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                k[i, j] = kernel(x[i], x[j])
    k = np.triu(k) + np.triu(k, 1).T
    try:
        chol_psd(k, jitter)
    except NotFactorizable as exc:
        raise NotPSD(str(exc)) from exc
    return k


def _median_sq_distance(x):
    if x.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(x, "sqeuclidean")))
    return med if med > 0 else 1.0


def default_hyperparams(x, ig_a=2.0, ig_b=1.0, **overrides) -> ModelHyperParams:
    """Hyperparameters used when the caller supplies none.

    ``s0_sq = 1``, ``s_sq = 1/p`` per coordinate, ``c`` = column means of
    ``x``, ``sh_sq = 1`` and ``bandwidth_sq = 1 / median ||x_i - x_j||^2``.
    Any field can be replaced through ``overrides``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    p = x.shape[1]
    values = dict(
        s0_sq=1.0,
        s_sq=np.full(p, 1.0 / p),
        c=x.mean(axis=0),
        sh_sq=1.0,
        bandwidth_sq=1.0 / _median_sq_distance(x),
        ig_a=ig_a,
        ig_b=ig_b,
    )
    if "s_sq" in overrides and np.ndim(overrides["s_sq"]) == 0:
        overrides["s_sq"] = np.full(p, float(overrides["s_sq"]))
    values.update(overrides)
    return ModelHyperParams(**values)


def kernels_from_hypers(hypers: ModelHyperParams):
    """(kernel for g, kernel for h) built from a :class:`ModelHyperParams`."""
    return (
        LinearKernel(LinearKernelParams(hypers.s0_sq, hypers.s_sq, hypers.c)),
        SeKernel(SeKernelParams(hypers.sh_sq, hypers.bandwidth_sq)),
    )
