"""Exception hierarchy shared by all modules."""


class FloquetError(Exception):
    """Base class for library errors."""


class ContractViolation(FloquetError, ValueError):
    """An input breaks a documented precondition (e.g. non-Hermitian matrix)."""


class NumericError(FloquetError, ArithmeticError):
    """A numerical kernel failed to converge or produced non-finite output."""


class DimensionError(FloquetError, ValueError):
    """Requested operator exceeds the dense dimension cap or has inconsistent shape."""


class ParseError(FloquetError, ValueError):
    """A configuration document does not match its schema."""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ValidationError(FloquetError, ValueError):
    """A parsed model violates a physical invariant (hermiticity, norm bounds)."""


class DomainError(FloquetError, ValueError):
    """A scalar argument lies outside the domain of a formula."""


class BoundaryError(FloquetError, ValueError):
    """A Fourier shift pushes weight outside the truncation window."""

    def __init__(self, message, lost_norm=0.0):
        self.lost_norm = lost_norm
        super().__init__(f"{message} (lost norm {lost_norm:.3e})")


class NormalizationError(FloquetError, ValueError):
    """A block-encoding normalization is too small for its target."""


class StructuralError(FloquetError, ValueError):
    """Two objects that must be combined have incompatible structure."""


class ConfigurationError(FloquetError, ValueError):
    """Parameters are mutually inconsistent or a required resource is missing."""


class PromiseViolation(FloquetError):
    """The rounding promise does not hold for the spectrum in question."""

    def __init__(self, message, offending=()):
        self.offending = list(offending)
        super().__init__(message)


class PreconditionError(FloquetError, ValueError):
    """Eigenstate-preparation preconditions fail on the actual model."""


class GapViolation(PreconditionError):
    """The promised quasienergy gap does not hold."""


class OverlapError(PreconditionError):
    """The initial state overlaps the target eigenstate less than promised."""
