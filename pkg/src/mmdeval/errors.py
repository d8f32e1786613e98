"""Exception hierarchy shared by every module.

Input problems derive from :class:`InputError` (a ``ValueError``) and
numerical breakdowns from :class:`NumericalError` (an ``ArithmeticError``);
the command line maps the two families to exit codes 1 and 2.
"""


class InputError(ValueError):
    """Invalid arguments: bad shapes, too few rows, out-of-range parameters."""


class DomainError(InputError):
    """Argument outside the mathematical domain of a function."""


class InsufficientSamplesError(InputError):
    pass


class NumericalError(ArithmeticError):
    """An algorithm failed to produce a trustworthy result."""


class ConvergenceError(NumericalError):
    pass


class NotPSDError(NumericalError):
    """Matrix has an eigenvalue below the clamping tolerance."""


class NonDifferentiableError(NumericalError):
    """A gradient was requested at a point where the function has a kink."""


class FeatureFileError(InputError):
    """Base class for feature-file parse failures; ``code`` identifies the kind."""

    code = "feature-file"


class MagicMismatchError(FeatureFileError):
    code = "bad-magic"


class TruncatedFileError(FeatureFileError):
    code = "truncated"


class NonFiniteError(FeatureFileError):
    code = "non-finite"


class RaggedCSVError(FeatureFileError):
    code = "ragged-csv"
