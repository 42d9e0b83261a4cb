"""Exception types shared by the toolkit.

Each class maps onto one CLI exit code, see ``bubblestrip.cli``.
"""


class BubbleStripError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgument(BubbleStripError, ValueError):
    """An argument lies outside the domain of the operation."""


class IntegrabilityError(InvalidArgument):
    """A requested integral diverges at the origin or at infinity."""


class SingularityError(InvalidArgument):
    """A kernel was evaluated on its diagonal."""


class ConfigError(BubbleStripError, ValueError):
    """A configuration violates a structural hypothesis."""


class SolverFailure(BubbleStripError, RuntimeError):
    """A root finder did not bracket or did not converge."""


class TruncationFailure(BubbleStripError, RuntimeError):
    """A lattice sum could not reach the requested tail bound.

    The best partial value and its certified tail are attached so callers
    can still report them.
    """

    def __init__(self, message, value=None, tail=None):
        super().__init__(message)
        self.value = value
        self.tail = tail


class OracleFailure(BubbleStripError, RuntimeError):
    """Monte-Carlo weights were not finite or had no usable variance."""
