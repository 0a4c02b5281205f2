"""Exception hierarchy.

Two families: ``ValidationError`` for inputs that violate a documented
invariant (bad densities, probabilities, temperatures, configs) and
``ComputationError`` for failures that only show up while evaluating
(singularities hit, quadrature not converging, ambiguous enclosure).
The CLI maps them to exit codes 3 and 4.
"""


class BerryEmfError(Exception):
    """Base class for all package errors."""


class ValidationError(BerryEmfError, ValueError):
    pass


class ComputationError(BerryEmfError, ArithmeticError):
    pass


class InvalidConfig(ValidationError):
    pass


class InvalidDensity(ValidationError):
    pass


class InvalidEnsemble(ValidationError):
    pass


class InvalidTemperature(ValidationError):
    pass


class InvalidGradient(ValidationError):
    pass


class ScenarioTooLarge(ValidationError):
    pass


class SingularEvaluation(ComputationError):
    """A field was evaluated inside the exclusion disk of a singular point."""


class SingularLoop(ComputationError):
    """A loop passes within the exclusion radius of a singular point."""


class QuadratureFailure(ComputationError):
    pass


class QuadratureMismatch(ComputationError):
    """Quadrature and exact census disagree beyond tolerance."""


class AmbiguousEnclosure(ComputationError):
    """A vortex core sits on (within eps of) a loop boundary."""


class DensityFloor(ComputationError):
    pass
