"""Exception hierarchy. CLI exit codes are keyed off the base classes."""


class BandJostError(Exception):
    """Base class for all package errors."""


class InputError(BandJostError, ValueError):
    """Malformed or invalid operator description (CLI exit code 2)."""


class NumericalError(BandJostError, ArithmeticError):
    """A computation could not be carried out or certified (CLI exit code 1)."""


class UnsupportedConfiguration(BandJostError):
    """Valid input outside the supported theory (CLI exit code 3)."""


class PoleError(NumericalError):
    """Evaluation requested at a pole of the Green kernel (z in {0, 1, -1})."""


class NonSummableError(NumericalError):
    """Tail certificate too weak for the requested sum or moment."""


class HorizonError(NumericalError):
    """Truncation horizon leaves a certified tail above the tolerance."""


class NonConvergentMajorant(NumericalError):
    """The factorial majorant of the successive approximations overflows."""


class EnclosureUnavailable(UnsupportedConfiguration):
    """sup q_n >= 1, so the efficient constants do not exist."""


class NotQuasiSymmetric(UnsupportedConfiguration):
    """Periodic background with alpha != delta."""


class ConventionError(NumericalError):
    """Burchnall-Chaundy polynomial failed its operator-identity validation."""


class QRConvergenceError(NumericalError):
    """Shifted QR iteration hit its iteration cap."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
