"""Exception hierarchy shared across the package."""


class GpmixError(Exception):
    """Base class for all package errors."""


class DataError(GpmixError, ValueError):
    """Input data violates a structural requirement."""


class DimensionMismatch(DataError):
    pass


class NonBinaryTreatment(DataError):
    pass


class PropensityOutOfRange(DataError):
    pass


class EmptyDataset(DataError):
    pass


class MissingColumn(DataError):
    pass


class TooFewUnits(DataError):
    pass


class InsufficientDraws(DataError):
    pass


class ConfigInvalid(GpmixError, ValueError):
    pass


class NonPositiveParameter(GpmixError, ValueError):
    pass


class NumericalError(GpmixError, ArithmeticError):
    """Base class for failures of the linear algebra or the samplers."""


class AsymmetricInput(NumericalError):
    pass


class NotFactorizable(NumericalError):
    pass


class NotPSD(NumericalError):
    pass


class SingularDesign(NumericalError):
    pass


class NonFiniteLogDensity(NumericalError):
    pass


class FactorizationFailure(NumericalError):
    """A sampler could not factorize a conditional covariance.

    Carries the (1-based) sweep index at which the failure happened.
    """

    def __init__(self, message, iteration=None):
        super().__init__(message if iteration is None else f"{message} (iteration {iteration})")
        self.iteration = iteration
