"""Exception types raised by cylfit."""


class CylfitError(Exception):
    """Base class for all cylfit errors."""


class InvalidInputError(CylfitError, ValueError):
    """Malformed or out-of-domain input (empty cloud, zero direction, bad CSV...)."""


class DegenerateCloudError(CylfitError):
    """The point cloud admits no unique best-fitting cylinder.

    Attributes:
        degeneracy: the ``DegeneracyClass`` that triggered the refusal.
        explanation: human-readable reason, suitable for CLI output.
    """

    def __init__(self, degeneracy, explanation: str):
        super().__init__(explanation)
        self.degeneracy = degeneracy
        self.explanation = explanation


class NumericFailureError(CylfitError, ArithmeticError):
    """Non-finite values appeared during evaluation or refinement."""
