"""Exception hierarchy shared by all modules.

Each exception class carries the CLI exit code it maps to.
"""


class NftError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class InvalidArgument(NftError, ValueError):
    """A caller supplied an argument outside the documented domain."""

    exit_code = 1


class ConfigurationError(NftError, ValueError):
    """A burst configuration cannot be realised on the requested grid."""

    exit_code = 2


class FormatError(NftError):
    """A binary file is malformed.

    Parameters
    ----------
    message : str
        Human readable description.
    offset : int, optional
        Byte offset at which the problem was detected.
    """

    exit_code = 2

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class IncompatibleCheckpoint(FormatError):
    """Checkpoint was written for a different model layout."""


class NumericalFault(NftError, ArithmeticError):
    """A computation produced non-finite values or hit a degeneracy."""

    exit_code = 3


class ScatteringDegeneracy(NumericalFault):
    """|a(lambda)| collapsed to zero on the real axis (near-soliton content)."""

    def __init__(self, lam, magnitude):
        self.lam = float(lam)
        self.magnitude = float(magnitude)
        super().__init__(
            f"|a(lambda)| = {magnitude:.3e} below degeneracy threshold at lambda = {lam:.6e} rad/s"
        )


class ReconstructionError(NumericalFault):
    """The inverse transform could not reproduce the target spectrum.

    Attributes
    ----------
    step : int or None
        Peel step at which an overflow occurred, if any.
    residual : float or None
        Best achieved max-abs spectral residual.
    """

    def __init__(self, message, step=None, residual=None):
        self.step = step
        self.residual = residual
        super().__init__(message)
