"""Exception types shared across the package.

All numerical and validation failures raise a subclass of :class:`EfrRomError`
so callers (and the CLI) can distinguish bad input from numerical breakdown.
"""


class EfrRomError(Exception):
    """Base class for all package errors."""


class ValidationError(EfrRomError):
    """Bad input: shapes, ranges, configuration. Maps to CLI exit status 1."""


class NumericalError(EfrRomError):
    """Numerical breakdown at runtime. Maps to CLI exit status 2."""


class DimensionError(ValidationError):
    """Incompatible or non-square array shapes."""


class SymmetryError(ValidationError):
    """Matrix expected to be symmetric is not, beyond tolerance."""


class RangeError(ValidationError):
    """Scalar parameter outside its admissible interval."""


class GridError(ValidationError):
    """Spatial grid too small or otherwise unusable."""


class RankError(ValidationError):
    """Requested more modes than the numerical rank supports."""

    def __init__(self, requested, admissible):
        self.requested = requested
        self.admissible = admissible
        super().__init__(
            f"requested {requested} modes but numerical rank admits at most {admissible}"
        )


class InvalidOrderError(ValidationError):
    """Filter/matrix-power order must be a positive integer."""


class ConfigError(ValidationError):
    """Pipeline configuration file or value is invalid."""


class ArtifactError(ValidationError):
    """Offline artifacts missing or unreadable."""


class ConvergenceError(NumericalError):
    """Iterative eigensolver failed to converge within its sweep cap."""


class NotSPDError(NumericalError):
    """Cholesky factorization hit a non-positive pivot."""


class SolverError(NumericalError):
    """A linear system was singular or a time step failed."""


class PositivityError(NumericalError):
    """A quantity required to be strictly positive was not."""
