"""Getting-it-right simulation shared by the sampler tests and the acceptance suite."""

import numpy as np

from gpmix.kernels import default_hyperparams, gram, kernels_from_hypers
from gpmix.numerics import make_rng, sample_inverse_gamma
from gpmix.sampler_known import build_aux, forward_simulate, gibbs_sweep, prior_factor, ChainState
from gpmix.sampler_unknown import ProbitState, mh_step_beta, probit_propensity
from gpmix.core import validate_dataset
from gpmix.transform import transform_outcome


def batch_means_se(a, n_batches=50):
    a = np.asarray(a)
    m = len(a) // n_batches * n_batches
    b = a[:m].reshape(n_batches, -1).mean(axis=1)
    return b.std(ddof=1) / np.sqrt(n_batches)


def geweke_z(forward, successive, n_batches=50):
    """z-scores for equality of means; forward draws are iid, successive ones correlated."""
    forward, successive = np.atleast_2d(forward.T).T, np.atleast_2d(successive.T).T
    z = []
    for j in range(forward.shape[1]):
        se2 = forward[:, j].var(ddof=1) / len(forward) + batch_means_se(successive[:, j], n_batches) ** 2
        z.append((forward[:, j].mean() - successive[:, j].mean()) / np.sqrt(se2))
    return np.array(z)


def geweke_known(n=10, p=2, m=50_000, seed=7):
    """Forward vs successive-conditional draws of (mean g, mean h, log sigma2)."""
    rng = make_rng(seed)
    x = rng.standard_normal((n, p))
    w = (rng.random(n) < 0.5).astype(float)
    w[:2] = [1.0, 0.0]
    e = rng.uniform(0.2, 0.8, n)
    hp = default_hyperparams(x, ig_a=3.0, ig_b=2.0)
    kg, kh = kernels_from_hypers(hp)
    pg, ph = prior_factor(gram(kg, x)), prior_factor(gram(kh, x))

    fw = np.empty((m, 3))
    for i in range(m):
        st, _ = forward_simulate(w, e, hp, pg, ph, rng)
        fw[i] = st.g.mean(), st.h.mean(), np.log(st.sigma2)

    st, ys = forward_simulate(w, e, hp, pg, ph, rng)
    sc = np.empty((m, 3))
    for i in range(m):
        st = gibbs_sweep(st, ys, w, e, hp, pg, ph, rng)
        aux = build_aux(w, e, st.sigma2, st.h)
        ys = st.g + aux.m + np.sqrt(aux.d_diag) * rng.standard_normal(n)
        sc[i] = st.g.mean(), st.h.mean(), np.log(st.sigma2)
    return fw, sc


def geweke_unknown(probit_cfg, n=6, m=20_000, seed=1, mh_steps=3, eps=1e-3):
    """Getting-it-right for the joint (g, h, sigma2, beta) sampler with p=1.

    Data are regenerated on the observed-response scale: ``w ~ Bernoulli(e)``
    and ``y ~ N(f_w, sigma2)`` with ``f1 = e g + e(1-e) h`` and
    ``f0 = -(1-e) g + e(1-e) h``. Test functions: beta0, beta1, mean h,
    log sigma2 and beta0^2.
    """
    rng = make_rng(seed)
    x = rng.standard_normal((n, 1))
    hp = default_hyperparams(x, ig_a=3.0, ig_b=2.0)
    kg, kh = kernels_from_hypers(hp)
    pg, ph = prior_factor(gram(kg, x)), prior_factor(gram(kh, x))
    k = probit_cfg.psi.shape[0]
    psi_chol = np.linalg.cholesky(probit_cfg.psi)

    def prior_draw():
        beta = psi_chol @ rng.standard_normal(k)
        g = pg.chol @ rng.standard_normal(n)
        h = ph.chol @ rng.standard_normal(n)
        return beta, g, h, float(sample_inverse_gamma(hp.ig_a, hp.ig_b, rng))

    def data(beta, g, h, s2):
        e = probit_propensity(x, beta, eps)
        w = (rng.random(n) < e).astype(int)
        f1 = e * g + e * (1 - e) * h
        f0 = -(1 - e) * g + e * (1 - e) * h
        return w, np.where(w == 1, f1, f0) + np.sqrt(s2) * rng.standard_normal(n)

    def stats(beta, g, h, s2):
        return beta[0], beta[1], h.mean(), np.log(s2), beta[0] ** 2

    fw = np.array([stats(*prior_draw()) for _ in range(m)])
    beta, g, h, s2 = prior_draw()
    w, y = data(beta, g, h, s2)
    sc = np.empty((m, 5))
    for i in range(m):
        ds = validate_dataset(x, y, w)
        e = probit_propensity(x, beta, eps)
        ys = transform_outcome(y, w, e, eps).ystar
        st = gibbs_sweep(ChainState(g, h, s2), ys, w.astype(float), e, hp, pg, ph, rng)
        pr = ProbitState(beta, e, 0, probit_cfg.step_size)
        for _ in range(mh_steps):
            pr, _ = mh_step_beta(pr, st, ds, hp, rng, probit_cfg, clip_eps=eps)
        beta, g, h, s2 = pr.beta, st.g, st.h, st.sigma2
        w, y = data(beta, g, h, s2)
        sc[i] = stats(beta, g, h, s2)
    return fw, sc
