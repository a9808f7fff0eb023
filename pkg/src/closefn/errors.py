"""Exception hierarchy.

Validation-style failures inherit ``ValueError`` as well so that callers who
do not care about the fine-grained taxonomy can catch the usual builtin.
"""


class CloseFnError(Exception):
    """Base class for all library errors."""


class DomainMismatch(CloseFnError, ValueError):
    """Two objects that must share a domain do not."""


class OutOfDomain(CloseFnError, ValueError):
    """Evaluation point lies outside the declared box domain."""


class NonFiniteEvaluation(CloseFnError, ArithmeticError):
    """A function evaluated to NaN or +/-inf at some point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NonSmoothFunction(CloseFnError, TypeError):
    """A gradient was requested from a family that has none."""


class MissingRegularity(CloseFnError, ValueError):
    """A certificate rule needs regularity metadata that is absent."""


class WeakeningViolation(CloseFnError, ValueError):
    """Attempted to 'weaken' a certificate to a strictly stronger one."""


class EpsilonOverflow(CloseFnError, OverflowError):
    """The multiplicative exponent exceeded the numeric safety cap."""


class InvalidWeights(CloseFnError, ValueError):
    """Mixture weights are outside [0, 1] or do not sum to one."""


class UnsupportedCombination(CloseFnError, ValueError):
    """A loss kind / distribution / dimension combination with no exact form."""


class NoiseViolation(CloseFnError, ValueError):
    """The designated reference hypothesis is not a population minimizer."""


class EmptySubset(CloseFnError, ValueError):
    """A complexity estimate was requested for an empty member set."""


class DegenerateRStar(CloseFnError, ArithmeticError):
    """Fixed-point radius is zero where a negative power of it is needed."""


class ConfigError(CloseFnError, ValueError):
    """Malformed run configuration (bad command, unreadable file, bad field)."""


class ValidationFailure(CloseFnError):
    """A mathematical invariant that a run was asked to verify did not hold.

    Raised by run commands; mapped to exit code 2 by the CLI so that 'the
    math failed' is distinguishable from operational errors.
    """
