"""Data model and validation shared by the samplers, estimands and CLI.

Every container here is a frozen dataclass whose array fields are stored as
read-only copies, so instances can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigInvalid,
    DataError,
    DimensionMismatch,
    EmptyDataset,
    NonBinaryTreatment,
    NonPositiveParameter,
    PropensityOutOfRange,
)

__all__ = [
    "Dataset",
    "TransformedOutcome",
    "ModelHyperParams",
    "ProbitConfig",
    "McmcConfig",
    "validate_dataset",
]


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed sample: covariates ``x`` (n, p), response ``y``, treatment ``w``.

    ``e_known`` holds the assignment probabilities when they are known by
    design (randomized or simulated studies) and is ``None`` otherwise.
    Build instances through :func:`validate_dataset`.
    """

    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    e_known: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def has_known_propensity(self) -> bool:
        return self.e_known is not None

    def without_propensity(self) -> "Dataset":
        return Dataset(self.x, self.y, self.w, None)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        same_e = (self.e_known is None and other.e_known is None) or (
            self.e_known is not None
            and other.e_known is not None
            and np.array_equal(self.e_known, other.e_known)
        )
        return (
            np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.w, other.w)
            and same_e
        )

    __hash__ = None


def validate_dataset(x, y=None, w=None, e_known=None) -> Dataset:
    """Check shapes and value ranges and return an immutable :class:`Dataset`.

    ``x`` may also be an existing :class:`Dataset`, in which case it is
    re-validated and an equal instance is returned.

    Raises
    ------
    EmptyDataset
        ``n == 0``.
    DimensionMismatch
        ``x``, ``y``, ``w`` (and ``e_known``) disagree on ``n``.
    NonBinaryTreatment
        Some ``w`` entry is not exactly 0 or 1.
    PropensityOutOfRange
        Some ``e_known`` entry is outside the open interval (0, 1).
    """
    if isinstance(x, Dataset):
        x, y, w, e_known = x.x, x.y, x.w, x.e_known
    if y is None or w is None:
        raise TypeError("y and w are required")

    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2:
        raise DimensionMismatch(f"x must be a 2-D matrix, got ndim={x.ndim}")
    y = np.asarray(y, dtype=float).reshape(-1)
    w_raw = np.asarray(w).reshape(-1)

    n = x.shape[0]
    if n == 0 or y.size == 0 or w_raw.size == 0:
        raise EmptyDataset("dataset has no units")
    if x.shape[1] == 0:
        raise DimensionMismatch("x has no covariate columns")
    lengths = {"x": n, "y": y.size, "w": w_raw.size}
    if e_known is not None:
        e_known = np.asarray(e_known, dtype=float).reshape(-1)
        lengths["e_known"] = e_known.size
    if len(set(lengths.values())) != 1:
        raise DimensionMismatch(f"length mismatch: {lengths}")

    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError("x and y must be finite")
    w_float = w_raw.astype(float)
    bad = ~((w_float == 0.0) | (w_float == 1.0))
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise NonBinaryTreatment(f"w[{i}] = {w_raw[i]!r} is not 0 or 1")
    if e_known is not None:
        out = ~((e_known > 0.0) & (e_known < 1.0))
        if np.any(out):
            i = int(np.flatnonzero(out)[0])
            raise PropensityOutOfRange(f"e_known[{i}] = {e_known[i]!r} not in (0, 1)")

    return Dataset(
        x=_frozen(x),
        y=_frozen(y),
        w=_frozen(w_float, dtype=np.int64),
        e_known=None if e_known is None else _frozen(e_known),
    )


@dataclass(frozen=True, eq=False)
class TransformedOutcome:
    """Transformed response ``ystar`` and the propensities ``e_used`` behind it."""

    ystar: np.ndarray
    e_used: np.ndarray
    n_clipped: int = 0


@dataclass(frozen=True, eq=False)
class ModelHyperParams:
    """Fixed hyperparameters of the two GP priors and the noise prior.

    ``s0_sq``, ``s_sq`` and ``c`` parametrize the linear kernel on ``g``;
    ``sh_sq`` and ``bandwidth_sq`` the squared-exponential kernel on ``h``;
    ``ig_a``, ``ig_b`` the inverse-gamma prior on the noise variance.
    """

    s0_sq: float
    s_sq: np.ndarray
    c: np.ndarray
    sh_sq: float
    bandwidth_sq: float
    ig_a: float = 2.0
    ig_b: float = 1.0

    def __post_init__(self):
        s_sq = np.atleast_1d(np.asarray(self.s_sq, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if s_sq.shape != c.shape:
            raise DimensionMismatch(f"s_sq has shape {s_sq.shape} but c has {c.shape}")
        for name in ("s0_sq", "sh_sq", "bandwidth_sq", "ig_a", "ig_b"):
            value = float(getattr(self, name))
            if not (np.isfinite(value) and value > 0):
                raise NonPositiveParameter(f"{name} must be > 0, got {value}")
            object.__setattr__(self, name, value)
        if not np.all(s_sq > 0):
            raise NonPositiveParameter("every s_sq entry must be > 0")
        object.__setattr__(self, "s_sq", _frozen(s_sq))
        object.__setattr__(self, "c", _frozen(c))

    @property
    def p(self) -> int:
        return self.s_sq.size


@dataclass(frozen=True, eq=False)
class ProbitConfig:
    """Prior covariance ``psi`` of the probit coefficients, starting point and step size."""

    psi: np.ndarray
    beta_init: np.ndarray
    step_size: float = 0.1

    def __post_init__(self):
        psi = np.atleast_2d(np.asarray(self.psi, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta_init, dtype=float))
        if psi.shape != (beta.size, beta.size):
            raise DimensionMismatch(f"psi shape {psi.shape} does not match beta length {beta.size}")
        if np.max(np.abs(psi - psi.T)) > 1e-10:
            raise ConfigInvalid("psi must be symmetric")
        try:
            chol = np.linalg.cholesky(psi)
        except np.linalg.LinAlgError as exc:
            raise ConfigInvalid("psi must be positive definite") from exc
        if not (self.step_size > 0):
            raise NonPositiveParameter(f"step_size must be > 0, got {self.step_size}")
        object.__setattr__(self, "psi", _frozen(psi))
        object.__setattr__(self, "beta_init", _frozen(beta))
        # cached for the Gaussian log-prior: L^{-1} and log|psi| / 2
        object.__setattr__(self, "psi_chol", _frozen(chol))
        object.__setattr__(self, "psi_chol_inv", _frozen(np.linalg.inv(chol)))
        object.__setattr__(self, "psi_half_logdet", float(np.sum(np.log(np.diag(chol)))))
        object.__setattr__(self, "step_size", float(self.step_size))


@dataclass(frozen=True)
class McmcConfig:
    """Chain length ``total_iters``, ``burn_in`` discarded sweeps, thinning ``thin``.

    Defaults are 6000 sweeps with 1000 burned and no thinning.
    """

    total_iters: int = 6000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0
    jitter: float = 1e-8
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if int(self.total_iters) != self.total_iters or self.total_iters < 1:
            raise ConfigInvalid("total_iters must be a positive integer")
        if int(self.burn_in) != self.burn_in or not 0 <= self.burn_in < self.total_iters:
            raise ConfigInvalid("burn_in must be an integer in [0, total_iters)")
        if int(self.thin) != self.thin or self.thin < 1:
            raise ConfigInvalid("thin must be a positive integer")
        if not (self.jitter > 0):
            raise ConfigInvalid("jitter must be > 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigInvalid("seed must fit in an unsigned 64-bit integer")
        if self.n_retained < 1:
            raise ConfigInvalid("configuration retains no draws")

    @property
    def n_retained(self) -> int:
        return (self.total_iters - self.burn_in) // self.thin

    def keep(self, iteration: int) -> bool:
        """Whether 1-based sweep ``iteration`` is stored."""
        k = iteration - self.burn_in
        return k > 0 and k % self.thin == 0 and k // self.thin <= self.n_retained
