"""Exception hierarchy for the excursim package."""


class ExcursimError(Exception):
    """Base class for all errors raised by excursim."""


class ModelEvaluationError(ExcursimError):
    """A model function (mean, std, correlation) returned a non-finite value."""


class SingularModelError(ExcursimError):
    """A covariance matrix could not be factored even at the maximum ridge."""


class InvalidLevelError(ExcursimError):
    """Excursion level outside the supported regime (requires b > 1)."""


class QuadratureError(ExcursimError):
    """Adaptive quadrature failed to converge within the refinement budget."""


class SamplerInefficiencyError(ExcursimError):
    """Rejection sampler acceptance rate collapsed; use the grid sampler."""


class InvalidWeightError(ExcursimError):
    """Likelihood-ratio weight requested for a non-positive volume estimate."""


class IntegrandBoundsError(ExcursimError):
    """Integrand value observed outside its declared [a1, a2] bounds."""


class ConfigurationError(ExcursimError):
    """Invalid or incomplete configuration (models, experiments, CLI)."""


class InsufficientReplicatesError(ExcursimError):
    """Too few replicates to aggregate (need at least two)."""


class NoHitError(ExcursimError):
    """Every replicate missed the rare event; increase the replicate count."""


class ReplicateFailureError(ExcursimError):
    """More than the tolerated fraction of replicates errored during a run."""
