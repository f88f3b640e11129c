"""Seedable sampling and dense linear-algebra helpers used by the samplers.

Randomness always flows through an explicit :class:`numpy.random.Generator`;
nothing here touches global RNG state, so a fixed seed and a fixed call
sequence reproduce every draw bitwise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from .errors import (
    AsymmetricInput,
    DataError,
    DimensionMismatch,
    NonPositiveParameter,
    NotFactorizable,
    SingularDesign,
)

__all__ = [
    "make_rng",
    "chol_psd",
    "sample_mvn",
    "sample_inverse_gamma",
    "standard_normal_cdf",
    "LogisticFit",
    "SeparationWarning",
    "fit_logistic",
]

JITTER_ESCALATIONS = 9  # jitter * 10**k for k = 0..8


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator from an integer seed (or pass an existing generator through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def chol_psd(a, jitter=1e-8):
    """Lower Cholesky factor of ``a + j*I`` with escalating jitter.

    ``j`` runs through ``jitter * 10**k * scale`` for ``k = 0..8`` where
    ``scale`` is the mean of the diagonal of ``a`` (1 when that is not
    positive); the first value for which the factorization succeeds is used.

    Returns
    -------
    L : ndarray
        Lower-triangular factor with ``L @ L.T == a + j*I``.
    j : float
        The jitter actually added.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotFactorizable("matrix has non-finite entries")
    amax = np.max(np.abs(a)) if a.size else 0.0
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-8 * max(amax, 1e-300):
        raise AsymmetricInput("matrix is not symmetric within 1e-8 relative tolerance")
    a = 0.5 * (a + a.T)
    scale = float(np.mean(np.diag(a))) if a.size else 1.0
    if not scale > 0:
        scale = 1.0
    eye = np.eye(a.shape[0])
    for k in range(JITTER_ESCALATIONS):
        j = jitter * 10.0**k * scale
        try:
            L = linalg.cholesky(a + j * eye, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        return L, j
    raise NotFactorizable(
        f"Cholesky failed for every jitter up to {jitter * 10.0 ** (JITTER_ESCALATIONS - 1) * scale:.3g}"
    )


def sample_mvn(mean, cov, rng, jitter=1e-10, size=None):
    """Draw from N(mean, cov) as ``mean + L z`` using :func:`chol_psd`.

    With ``size=None`` a single length-n vector is returned, otherwise an
    array of shape ``(size, n)``.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    L, _ = chol_psd(np.atleast_2d(cov), jitter)
    if L.shape[0] != mean.size:
        raise DimensionMismatch("mean and cov disagree on dimension")
    if size is None:
        return mean + L @ rng.standard_normal(mean.size)
    z = rng.standard_normal((size, mean.size))
    return mean + z @ L.T


def sample_inverse_gamma(a, b, rng, size=None):
    """Inverse-gamma draw with shape ``a`` and scale ``b`` (mean ``b/(a-1)`` for a > 1).

    Implemented as the reciprocal of a Gamma(shape=a, rate=b) draw.
    """
    if not (a > 0 and b > 0):
        raise NonPositiveParameter(f"inverse-gamma needs a > 0 and b > 0, got a={a}, b={b}")
    return 1.0 / rng.gamma(a, 1.0 / b, size=size)


def standard_normal_cdf(z):
    """Standard normal CDF (scalar or array), accurate to double precision."""
    out = special.ndtr(z)
    return float(out) if np.ndim(out) == 0 else out


class SeparationWarning(RuntimeWarning):
    """Fitted logistic probabilities reached 0 or 1."""


@dataclass(frozen=True)
class LogisticFit:
    coef: np.ndarray  # intercept first
    converged: bool
    separated: bool
    n_iter: int

    def predict(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return special.expit(self.coef[0] + x @ self.coef[1:])


def _logistic_loglik(eta, w):
    # sum w*log(p) + (1-w)*log(1-p) written stably in terms of eta
    return float(np.sum(w * eta - np.logaddexp(0.0, eta)))


def fit_logistic(x, w, max_iters=100, tol=1e-8):
    """Maximum-likelihood logistic regression of ``w`` on ``[1, x]`` by IRLS.

    Iterates Newton steps (with step halving when the log-likelihood would
    drop) until the largest coefficient change is below ``tol``. If any
    fitted probability comes within 1e-10 of 0 or 1 the data are treated as
    separated: iteration stops, a :class:`SeparationWarning` is emitted and the
    current iterate is returned with ``separated=True``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    w = np.asarray(w, dtype=float).reshape(-1)
    n, p = x.shape
    if w.size != n:
        raise DimensionMismatch("x and w disagree on n")
    if n <= p + 1:
        raise DataError(f"need n > p + 1 for a logistic fit, got n={n}, p={p}")
    design = np.column_stack([np.ones(n), x])
    if np.linalg.matrix_rank(design) < p + 1:
        raise SingularDesign("design matrix [1, x] is rank deficient")

    beta = np.zeros(p + 1)
    eta = design @ beta
    ll = _logistic_loglik(eta, w)
    converged = separated = False
    it = 0
    for it in range(1, max_iters + 1):
        prob = special.expit(eta)
        if np.any(prob < 1e-10) or np.any(prob > 1.0 - 1e-10):
            separated = True
            break
        weights = prob * (1.0 - prob)
        hess = design.T @ (design * weights[:, None])
        grad = design.T @ (w - prob)
        try:
            step = linalg.solve(hess, grad, assume_a="pos", check_finite=False)
        except (linalg.LinAlgError, ValueError):
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        t = 1.0
        for _ in range(30):
            cand = beta + t * step
            cand_eta = design @ cand
            cand_ll = _logistic_loglik(cand_eta, w)
            if cand_ll >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        change = np.max(np.abs(cand - beta))
        beta, eta, ll = cand, cand_eta, cand_ll
        if change < tol:
            converged = True
            break
    else:
        prob = special.expit(eta)
        separated = bool(np.any(prob < 1e-10) or np.any(prob > 1.0 - 1e-10))

    if separated:
        warnings.warn(
            "logistic fit hit fitted probabilities of 0 or 1 (separation); returning last iterate",
            SeparationWarning,
            stacklevel=2,
        )
    return LogisticFit(coef=beta, converged=converged, separated=separated, n_iter=it)
