"""Metropolis-within-Gibbs sampler for unknown assignment probabilities.

Propensities follow a probit model ``e_i = Phi([1, x_i] @ beta)`` with a
Gaussian prior ``beta ~ N(0, psi)``. Each sweep runs the conjugate g, h,
sigma2 updates of the known-propensity sampler given the current
propensities, then a random-walk Metropolis step on the whole ``beta``
vector, then recomputes ``e`` and the transformed response.

The log target for ``beta`` is evaluated on the scale of the observed
response: the normal density of ``ystar`` plus the log-Jacobian of
``y -> ystar``, so moving ``beta`` is judged by how well ``y`` is explained
and not by how the transform rescales it. The Jacobian exactly cancels the
``log e`` normalizer of the ``ystar`` density.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, special

from .core import Dataset, McmcConfig, ModelHyperParams, ProbitConfig
from .errors import ConfigInvalid, FactorizationFailure, NonFiniteLogDensity, NumericalError
from .numerics import SeparationWarning, fit_logistic, make_rng
from .sampler_known import (
    ChainState,
    GPPrior,
    PosteriorDraws,
    build_priors,
    gibbs_sweep,
    initial_state,
)
from .transform import DEFAULT_CLIP_EPS, clip_propensity, transform_outcome

__all__ = [
    "LOGIT_TO_PROBIT",
    "ProbitState",
    "JointDraws",
    "default_probit_config",
    "probit_propensity",
    "trv_log_density",
    "log_jacobian",
    "log_prior_beta",
    "log_joint",
    "mh_accept",
    "mh_step_beta",
    "run_gibbs_unknown",
]

# Phi(z) ~ expit(1.702 z): divide logistic coefficients by this to get probit ones.
LOGIT_TO_PROBIT = 1.0 / 1.702

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class ProbitState:
    beta: np.ndarray
    e: np.ndarray
    accept_count: int = 0
    proposal_sd: float = 0.1
    nonfinite_count: int = 0
    # log_joint at this state, valid only for the (chain, dataset) objects in target_for
    log_target: float | None = field(default=None, repr=False)
    target_for: tuple | None = field(default=None, repr=False)


@dataclass(eq=False)
class JointDraws(PosteriorDraws):
    beta_draws: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    e_draws: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    acceptance_rate: float = 0.0


def probit_propensity(x, beta, eps=DEFAULT_CLIP_EPS):
    """``Phi([1, x] @ beta)`` clipped into ``[eps, 1 - eps]``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    beta = np.asarray(beta, dtype=float)
    e = special.ndtr(beta[0] + x @ beta[1:])
    return np.clip(e, eps, 1.0 - eps) if 0.0 < eps < 0.5 else clip_propensity(e, eps)[0]


def default_probit_config(x, w, psi_scale=2.5, step_size=0.1) -> ProbitConfig:
    """Prior ``psi = psi_scale**2 * I``; start from the rescaled logistic MLE.

    Falls back to ``beta = 0`` when the logistic fit reports separation or
    the design is unusable.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    k = x.shape[1] + 1
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SeparationWarning)
            fit = fit_logistic(x, w)
        beta0 = np.zeros(k) if fit.separated else fit.coef * LOGIT_TO_PROBIT
    except (NumericalError, ValueError):
        beta0 = np.zeros(k)
    return ProbitConfig(psi=psi_scale**2 * np.eye(k), beta_init=beta0, step_size=step_size)


def trv_log_density(ystar, g, h, sigma2, w, e):
    """Sum of log N(ystar_i | g_i + Lambda_ii h_i, sigma2 * v_i) over units.

    ``v_i`` is ``1/e_i^2`` for treated and ``1/(1-e_i)^2`` for control units.
    """
    w = np.asarray(w, dtype=float)
    e = np.asarray(e, dtype=float)
    lam = w * (1.0 - e) - (1.0 - w) * e
    var = sigma2 * (w / e**2 + (1.0 - w) / (1.0 - e) ** 2)
    resid = np.asarray(ystar) - np.asarray(g) - lam * np.asarray(h)
    return float(-0.5 * np.sum(_LOG_2PI + np.log(var) + resid**2 / var))


def log_jacobian(w, e):
    """log |d ystar / d y| summed over units: -log e (treated), -log(1-e) (control)."""
    w = np.asarray(w, dtype=float)
    e = np.asarray(e, dtype=float)
    return float(-np.sum(w * np.log(e) + (1.0 - w) * np.log1p(-e)))


def _bernoulli_loglik(w, e):
    return float(np.sum(w * np.log(e) + (1.0 - w) * np.log1p(-e)))


def log_prior_beta(beta, psi):
    """Log density of N(0, psi) at ``beta``."""
    beta = np.asarray(beta, dtype=float)
    L = np.linalg.cholesky(np.asarray(psi, dtype=float))
    z = linalg.solve_triangular(L, beta, lower=True)
    return float(-0.5 * (z @ z) - np.sum(np.log(np.diag(L))) - 0.5 * beta.size * _LOG_2PI)


def _outcome_and_assignment(y, w, e, g, h, sigma2):
    # trv_log_density + log_jacobian + Bernoulli log-likelihood, fused. With
    # q = e (treated) or 1 - e (control): Lambda = w - e, v = 1/q^2, and the
    # log q terms of the three pieces net to a single sum(log q).
    q = np.where(w == 1, e, 1.0 - e)
    ystar = (w - e) * y / (e * (1.0 - e))
    r = (ystar - g - (w - e) * h) * q
    return float(-0.5 * y.size * np.log(2.0 * np.pi * sigma2) - 0.5 * (r @ r) / sigma2 + np.sum(np.log(q)))


def _log_prior_beta_cached(beta, cfg: ProbitConfig):
    z = cfg.psi_chol_inv @ beta
    return float(-0.5 * (z @ z) - cfg.psi_half_logdet - 0.5 * beta.size * _LOG_2PI)


def _log_gp_prior(f, prior: GPPrior):
    z = linalg.solve_triangular(prior.chol, f, lower=True)
    return float(-0.5 * (z @ z) - np.sum(np.log(np.diag(prior.chol))) - 0.5 * f.size * _LOG_2PI)


def _log_inv_gamma(s2, a, b):
    return float(a * np.log(b) - special.gammaln(a) - (a + 1.0) * np.log(s2) - b / s2)


def log_joint(
    state: ChainState,
    probit: ProbitState,
    dataset: Dataset,
    hypers: ModelHyperParams,
    probit_cfg: ProbitConfig,
    *,
    priors: tuple[GPPrior, GPPrior] | None = None,
):
    """Unnormalized log joint density at (g, h, sigma2, beta, e).

    ``probit.e`` is taken as already clipped. Sums the outcome likelihood
    (ystar density, with ystar recomputed from ``probit.e``, plus the
    log-Jacobian), the Bernoulli likelihood of ``w``, the Gaussian
    prior on ``beta`` and the inverse-gamma prior on ``sigma2``. The GP prior
    terms for ``g`` and ``h`` are added when ``priors`` is given; they do not
    depend on ``beta``.

    Raises
    ------
    NonFiniteLogDensity
        The result is NaN or infinite.
    """
    e = probit.e
    if not np.all(np.isfinite(e)):
        raise NonFiniteLogDensity("propensities are not finite")
    total = (
        _outcome_and_assignment(dataset.y, dataset.w, e, state.g, state.h, state.sigma2)
        + _log_prior_beta_cached(probit.beta, probit_cfg)
        + _log_inv_gamma(state.sigma2, hypers.ig_a, hypers.ig_b)
    )
    if priors is not None:
        total += _log_gp_prior(state.g, priors[0]) + _log_gp_prior(state.h, priors[1])
    if not np.isfinite(total):
        raise NonFiniteLogDensity(f"log joint evaluated to {total}")
    return total


def mh_accept(log_target_current, log_target_proposal, rng, log_q_forward=0.0, log_q_reverse=0.0):
    """Metropolis-Hastings accept/reject; consumes exactly one uniform.

    ``log_q_forward`` is log q(proposal | current) and ``log_q_reverse`` is
    log q(current | proposal); both cancel for symmetric proposals.
    """
    u = rng.random()
    log_alpha = min(0.0, (log_target_proposal + log_q_reverse) - (log_target_current + log_q_forward))
    return bool(np.log(u) < log_alpha)


def _random_walk(beta, sd, rng):
    return beta + sd * rng.standard_normal(beta.size)


def mh_step_beta(
    current: ProbitState,
    chain: ChainState,
    dataset: Dataset,
    hypers: ModelHyperParams,
    rng,
    probit_cfg: ProbitConfig,
    *,
    clip_eps=DEFAULT_CLIP_EPS,
    proposal=None,
):
    """One random-walk Metropolis update of ``beta``.

    Proposes ``beta* ~ N(beta, proposal_sd^2 I)`` (or ``proposal(beta, rng)``
    when given, which must be symmetric) and accepts with probability
    ``min(1, exp(log_joint(beta*) - log_joint(beta)))``. A non-finite log
    density at the proposal counts as a rejection.

    Returns ``(new_state, accepted)``.
    """
    if proposal is None:
        beta_star = _random_walk(current.beta, current.proposal_sd, rng)
    else:
        beta_star = np.asarray(proposal(current.beta, rng), dtype=float)
    key = (chain, dataset)
    cached = current.target_for is not None and all(a is b for a, b in zip(current.target_for, key))
    if cached:
        lj_cur = current.log_target
    else:
        lj_cur = log_joint(chain, current, dataset, hypers, probit_cfg)
        current = replace(current, log_target=lj_cur, target_for=key)
    cand = replace(current, beta=beta_star, e=probit_propensity(dataset.x, beta_star, clip_eps))
    try:
        lj_prop = log_joint(chain, cand, dataset, hypers, probit_cfg)
    except NonFiniteLogDensity:
        rng.random()  # keep the stream aligned with the finite case
        return replace(current, nonfinite_count=current.nonfinite_count + 1), 0
    if mh_accept(lj_cur, lj_prop, rng):
        return replace(cand, accept_count=current.accept_count + 1, log_target=lj_prop), 1
    return current, 0


def run_gibbs_unknown(
    dataset: Dataset,
    hypers: ModelHyperParams,
    cfg: McmcConfig,
    probit_cfg: ProbitConfig | None = None,
    *,
    clip_eps=DEFAULT_CLIP_EPS,
    tune=True,
    tune_interval=50,
    progress=None,
) -> JointDraws:
    """Jointly sample (g, h, sigma2, beta, e).

    With ``tune=True`` the proposal scale is halved or doubled after every
    ``tune_interval`` burn-in sweeps whose acceptance rate falls outside
    [0.2, 0.5]; it is frozen after burn-in.
    """
    if dataset.e_known is not None:
        raise ConfigInvalid("run_gibbs_unknown expects a dataset without known propensities")
    if probit_cfg is None:
        probit_cfg = default_probit_config(dataset.x, dataset.w)
    if probit_cfg.beta_init.size != dataset.p + 1:
        raise ConfigInvalid(f"beta_init has length {probit_cfg.beta_init.size}, expected {dataset.p + 1}")
    started = time.perf_counter()
    w = dataset.w.astype(float)
    try:
        prior_g, prior_h = build_priors(dataset.x, hypers, cfg.jitter)
    except NumericalError as exc:
        raise FactorizationFailure(f"prior Gram factorization failed: {exc}", 0) from exc

    rng = make_rng(cfg.seed)
    beta = probit_cfg.beta_init.copy()
    probit = ProbitState(beta=beta, e=probit_propensity(dataset.x, beta, clip_eps), proposal_sd=probit_cfg.step_size)
    trv = transform_outcome(dataset.y, w, probit.e, clip_eps)
    ystar = trv.ystar
    state = initial_state(ystar)

    kp, n, k = cfg.n_retained, dataset.n, dataset.p + 1
    g_d, h_d, s_d = np.empty((kp, n)), np.empty((kp, n)), np.empty(kp)
    b_d, e_d = np.empty((kp, k)), np.empty((kp, n))
    slot = window_acc = accepted_post = 0
    clip_events = 0
    sd_history = []
    for it in range(1, cfg.total_iters + 1):
        try:
            state = gibbs_sweep(state, ystar, w, probit.e, hypers, prior_g, prior_h, rng)
        except (NumericalError, linalg.LinAlgError, ValueError) as exc:
            raise FactorizationFailure(f"Gibbs sweep failed: {exc}", it) from exc
        probit, acc = mh_step_beta(probit, state, dataset, hypers, rng, probit_cfg, clip_eps=clip_eps)
        trv = transform_outcome(dataset.y, w, probit.e, clip_eps)
        ystar = trv.ystar
        clip_events += int(np.count_nonzero(special.ndtr(probit.beta[0] + dataset.x @ probit.beta[1:]) != probit.e))

        if it <= cfg.burn_in:
            window_acc += acc
            if tune and it % tune_interval == 0:
                rate = window_acc / tune_interval
                if rate < 0.2:
                    probit = replace(probit, proposal_sd=probit.proposal_sd / 2.0)
                elif rate > 0.5:
                    probit = replace(probit, proposal_sd=probit.proposal_sd * 2.0)
                sd_history.append(probit.proposal_sd)
                window_acc = 0
        else:
            accepted_post += acc
        if cfg.keep(it):
            g_d[slot], h_d[slot], s_d[slot] = state.g, state.h, state.sigma2
            b_d[slot], e_d[slot] = probit.beta, probit.e
            slot += 1
        if progress is not None:
            progress(it, cfg.total_iters)

    n_post = cfg.total_iters - cfg.burn_in
    meta = {
        "mode": "unknown",
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
        "clip_events": clip_events,
        "beta_init": probit_cfg.beta_init.tolist(),
        "accepted": probit.accept_count,
        "acceptance_rate_post_burn_in": accepted_post / n_post,
        "proposal_sd_final": probit.proposal_sd,
        "proposal_sd_history": sd_history,
        "nonfinite_rejections": probit.nonfinite_count,
        "wall_time_s": time.perf_counter() - started,
    }
    return JointDraws(
        g_draws=g_d,
        h_draws=h_d,
        sigma2_draws=s_d,
        meta=meta,
        beta_draws=b_d,
        e_draws=e_d,
        acceptance_rate=probit.accept_count / cfg.total_iters,
    )
