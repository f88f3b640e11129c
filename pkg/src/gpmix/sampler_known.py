"""Gibbs sampler for the GP mixture when assignment probabilities are known.

Given the transformed response, the treated/control branch of each unit is
observed, so the model reduces to

    ystar | g, h, sigma2  ~  N(g + Lambda h, D),

with ``Lambda_ii = 1 - e_i`` (treated) or ``-e_i`` (control) and
``D_ii = sigma2 / e_i^2`` (treated) or ``sigma2 / (1 - e_i)^2`` (control).
Under GP priors on ``g`` and ``h`` and an inverse-gamma prior on ``sigma2``
every full conditional is conjugate.

The Gaussian conditionals are sampled by pathwise conditioning: draw from
the prior, then correct with a solve against ``K + D`` (or
``Lambda K Lambda + D``). This never forms ``K^{-1}``, which matters because
the linear-kernel Gram matrix has rank at most ``p + 1``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .core import Dataset, McmcConfig, ModelHyperParams
from .errors import ConfigInvalid, DimensionMismatch, FactorizationFailure, NumericalError
from .kernels import gram, kernels_from_hypers
from .numerics import chol_psd, make_rng, sample_inverse_gamma
from .transform import DEFAULT_CLIP_EPS, transform_outcome

__all__ = [
    "AuxMatrices",
    "ChainState",
    "GPPrior",
    "PosteriorDraws",
    "build_aux",
    "prior_factor",
    "g_conditional_moments",
    "h_conditional_moments",
    "draw_g",
    "draw_h",
    "draw_sigma2",
    "gibbs_sweep",
    "forward_simulate",
    "run_gibbs_known",
]


@dataclass(frozen=True, eq=False)
class AuxMatrices:
    """Diagonals of ``D``, ``Lambda`` and ``V = D / sigma2``, plus ``m = Lambda h``."""

    d_diag: np.ndarray
    lambda_diag: np.ndarray
    v_diag: np.ndarray
    m: np.ndarray


@dataclass(frozen=True, eq=False)
class ChainState:
    g: np.ndarray
    h: np.ndarray
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be > 0, got {self.sigma2}")


@dataclass(frozen=True, eq=False)
class GPPrior:
    """Jittered prior covariance ``cov = gram + jitter*I`` and its lower Cholesky factor."""

    cov: np.ndarray
    chol: np.ndarray
    jitter: float


@dataclass(eq=False)
class PosteriorDraws:
    g_draws: np.ndarray  # (K', n)
    h_draws: np.ndarray  # (K', n)
    sigma2_draws: np.ndarray  # (K',)
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.sigma2_draws.size


def build_aux(w, e, sigma2, h) -> AuxMatrices:
    w = np.asarray(w, dtype=float)
    e = np.asarray(e, dtype=float)
    h = np.asarray(h, dtype=float)
    if not (w.shape == e.shape == h.shape):
        raise DimensionMismatch("w, e and h must have the same length")
    v = w / e**2 + (1.0 - w) / (1.0 - e) ** 2
    lam = w * (1.0 - e) + (1.0 - w) * (-e)
    return AuxMatrices(d_diag=sigma2 * v, lambda_diag=lam, v_diag=v, m=lam * h)


def prior_factor(gram_matrix, jitter=1e-8) -> GPPrior:
    L, j = chol_psd(gram_matrix, jitter)
    cov = np.asarray(gram_matrix, dtype=float) + j * np.eye(L.shape[0])
    return GPPrior(cov=cov, chol=L, jitter=j)


def _factor(a):
    # a is K + positive diagonal, so this nearly always succeeds without jitter
    try:
        return linalg.cho_factor(a, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return chol_psd(a, 1e-12)[0], True


def _as_prior(gram_matrix, prior, jitter):
    return prior if prior is not None else prior_factor(gram_matrix, jitter)


def g_conditional_moments(ystar, aux: AuxMatrices, gram_g, *, jitter=1e-8, prior=None):
    """Mean and covariance of g | h, sigma2, data (for testing and diagnostics)."""
    k = _as_prior(gram_g, prior, jitter).cov
    fac = _factor(k + np.diag(aux.d_diag))
    resid = np.asarray(ystar, dtype=float) - aux.m
    mean = k @ linalg.cho_solve(fac, resid)
    cov = k - k @ linalg.cho_solve(fac, k)
    return mean, 0.5 * (cov + cov.T)


def h_conditional_moments(ystar, g, aux: AuxMatrices, gram_h, *, jitter=1e-8, prior=None):
    """Mean and covariance of h | g, sigma2, data."""
    k = _as_prior(gram_h, prior, jitter).cov
    lam = aux.lambda_diag
    k_lam = k * lam[None, :]  # K Lambda
    fac = _factor(lam[:, None] * k_lam + np.diag(aux.d_diag))
    resid = np.asarray(ystar, dtype=float) - np.asarray(g, dtype=float)
    mean = k_lam @ linalg.cho_solve(fac, resid)
    cov = k - k_lam @ linalg.cho_solve(fac, k_lam.T)
    return mean, 0.5 * (cov + cov.T)


def draw_g(ystar, aux: AuxMatrices, gram_g, rng, *, jitter=1e-8, prior=None):
    """One draw of g from N(S D^{-1}(ystar - m), S) with S = (K_g^{-1} + D^{-1})^{-1}."""
    pr = _as_prior(gram_g, prior, jitter)
    n = aux.d_diag.size
    f0 = pr.chol @ rng.standard_normal(n)
    e0 = np.sqrt(aux.d_diag) * rng.standard_normal(n)
    fac = _factor(pr.cov + np.diag(aux.d_diag))
    resid = np.asarray(ystar, dtype=float) - aux.m
    return f0 + pr.cov @ linalg.cho_solve(fac, resid - f0 - e0)


def draw_h(ystar, g, aux: AuxMatrices, gram_h, rng, *, jitter=1e-8, prior=None):
    """One draw of h | g, sigma2; ``Lambda^T D^{-1} Lambda`` is diagonal."""
    pr = _as_prior(gram_h, prior, jitter)
    lam = aux.lambda_diag
    n = lam.size
    f0 = pr.chol @ rng.standard_normal(n)
    e0 = np.sqrt(aux.d_diag) * rng.standard_normal(n)
    k_lam = pr.cov * lam[None, :]
    fac = _factor(lam[:, None] * k_lam + np.diag(aux.d_diag))
    resid = np.asarray(ystar, dtype=float) - np.asarray(g, dtype=float)
    return f0 + k_lam @ linalg.cho_solve(fac, resid - lam * f0 - e0)


def draw_sigma2(ystar, g, aux: AuxMatrices, ig_a, ig_b, rng):
    """sigma2 | g, h ~ IG(a + n/2, b + sum(r_i^2 / v_i) / 2) with r = ystar - g - m.

    ``1 / v_i`` is ``e_i^2`` for treated and ``(1 - e_i)^2`` for control units.
    """
    resid = np.asarray(ystar, dtype=float) - np.asarray(g, dtype=float) - aux.m
    shape = ig_a + 0.5 * resid.size
    scale = ig_b + 0.5 * float(np.sum(resid**2 / aux.v_diag))
    return float(sample_inverse_gamma(shape, scale, rng))


def gibbs_sweep(state: ChainState, ystar, w, e, hypers: ModelHyperParams, prior_g: GPPrior, prior_h: GPPrior, rng):
    """One g -> h -> sigma2 cycle, each step conditioning on the latest values."""
    aux = build_aux(w, e, state.sigma2, state.h)
    g = draw_g(ystar, aux, None, rng, prior=prior_g)
    h = draw_h(ystar, g, aux, None, rng, prior=prior_h)
    aux = build_aux(w, e, state.sigma2, h)
    sigma2 = draw_sigma2(ystar, g, aux, hypers.ig_a, hypers.ig_b, rng)
    return ChainState(g=g, h=h, sigma2=sigma2)


def forward_simulate(w, e, hypers: ModelHyperParams, prior_g: GPPrior, prior_h: GPPrior, rng):
    """Joint draw of (state, ystar) from the prior and the likelihood."""
    w = np.asarray(w, dtype=float)
    n = w.size
    g = prior_g.chol @ rng.standard_normal(n)
    h = prior_h.chol @ rng.standard_normal(n)
    sigma2 = float(sample_inverse_gamma(hypers.ig_a, hypers.ig_b, rng))
    aux = build_aux(w, e, sigma2, h)
    ystar = g + aux.m + np.sqrt(aux.d_diag) * rng.standard_normal(n)
    return ChainState(g=g, h=h, sigma2=sigma2), ystar


def initial_state(ystar) -> ChainState:
    n = ystar.size
    var = float(np.var(ystar, ddof=1)) if n > 1 else 0.0
    return ChainState(g=np.zeros(n), h=np.zeros(n), sigma2=var if var > 0 else 1.0)


def build_priors(x, hypers: ModelHyperParams, jitter):
    kg, kh = kernels_from_hypers(hypers)
    if hypers.p != np.shape(x)[1]:
        raise ConfigInvalid(f"hyperparameters are for p={hypers.p}, data has p={np.shape(x)[1]}")
    return prior_factor(gram(kg, x, jitter), jitter), prior_factor(gram(kh, x, jitter), jitter)


def run_gibbs_known(
    dataset: Dataset,
    hypers: ModelHyperParams,
    cfg: McmcConfig,
    *,
    clip_eps=DEFAULT_CLIP_EPS,
    progress=None,
) -> PosteriorDraws:
    """Run the known-propensity Gibbs sampler.

    Starts from ``g = h = 0`` and ``sigma2 = var(ystar)``, runs
    ``cfg.total_iters`` sweeps, drops the first ``cfg.burn_in`` and keeps
    every ``cfg.thin``-th of the rest. ``progress``, if given, is called as
    ``progress(iteration, total)`` after every sweep.
    """
    if dataset.e_known is None:
        raise ConfigInvalid("run_gibbs_known needs a dataset with known propensities")
    started = time.perf_counter()
    trv = transform_outcome(dataset.y, dataset.w, dataset.e_known, clip_eps)
    ystar, e = trv.ystar, trv.e_used
    w = dataset.w.astype(float)
    try:
        prior_g, prior_h = build_priors(dataset.x, hypers, cfg.jitter)
    except NumericalError as exc:
        raise FactorizationFailure(f"prior Gram factorization failed: {exc}", 0) from exc

    rng = make_rng(cfg.seed)
    state = initial_state(ystar)
    kp, n = cfg.n_retained, dataset.n
    g_draws, h_draws, s_draws = np.empty((kp, n)), np.empty((kp, n)), np.empty(kp)
    slot = 0
    for it in range(1, cfg.total_iters + 1):
        try:
            state = gibbs_sweep(state, ystar, w, e, hypers, prior_g, prior_h, rng)
        except (NumericalError, linalg.LinAlgError, ValueError) as exc:
            raise FactorizationFailure(f"Gibbs sweep failed: {exc}", it) from exc
        if cfg.keep(it):
            g_draws[slot], h_draws[slot], s_draws[slot] = state.g, state.h, state.sigma2
            slot += 1
        if progress is not None:
            progress(it, cfg.total_iters)

    meta = {
        "mode": "known",
        "n": n,
        "p": dataset.p,
        "total_iters": cfg.total_iters,
        "burn_in": cfg.burn_in,
        "thin": cfg.thin,
        "seed": int(cfg.seed),
        "jitter": cfg.jitter,
        "jitter_used_g": prior_g.jitter,
        "jitter_used_h": prior_h.jitter,
        "clip_eps": clip_eps,
        "n_clipped": trv.n_clipped,
        "wall_time_s": time.perf_counter() - started,
    }
    return PosteriorDraws(g_draws=g_draws, h_draws=h_draws, sigma2_draws=s_draws, meta=meta)
