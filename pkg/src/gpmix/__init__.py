"""Gaussian-process mixture model for heterogeneous treatment effects.

The response is mapped to the transformed variable
``ystar = (w - e) y / (e (1 - e))``, whose conditional mean is the CATE, and
modelled as ``g(x) + Lambda h(x) + noise`` with GP priors on the effect ``g``
(linear kernel) and the nuisance ``h`` (squared-exponential kernel).
Posterior draws come from a conjugate Gibbs sampler when assignment
probabilities are known and from Metropolis-within-Gibbs with a probit
propensity model when they are not.
"""

__version__ = "0.1.0"

from .core import (
    Dataset,
    McmcConfig,
    ModelHyperParams,
    ProbitConfig,
    TransformedOutcome,
    validate_dataset,
)
from .errors import *  # noqa: F401,F403
from .estimands import (
    CateSummary,
    DiagnosticsReport,
    ate_draws,
    bin_by_quantile,
    cate_draws,
    diagnostics,
    summarize,
)
from .kernels import (
    LinearKernel,
    LinearKernelParams,
    SeKernel,
    SeKernelParams,
    default_hyperparams,
    gram,
    linear_kernel,
    se_kernel,
)
from .numerics import chol_psd, fit_logistic, make_rng, sample_inverse_gamma, sample_mvn, standard_normal_cdf
from .sampler_known import PosteriorDraws, run_gibbs_known
from .sampler_unknown import JointDraws, default_probit_config, probit_propensity, run_gibbs_unknown
from .simgen import SyntheticDataset, gen_case_a, gen_case_b
from .transform import clip_propensity, mc_check_cate_identity, transform_outcome, verify_mixture_identity
