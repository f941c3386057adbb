"""Exception types shared across the package."""


class PriorForgeError(Exception):
    """Base class for all errors raised by this package."""


class FormulaError(PriorForgeError):
    """Malformed model formula. Carries the byte offset of the offending token."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)


class DesignError(PriorForgeError):
    """Design matrix could not be assembled from the data."""


class FitError(PriorForgeError):
    """Model fitting failed (rank deficiency, divergence, domain problems)."""


class QuarticFitError(PriorForgeError):
    """The quartic profile approximation is invalid (non-concave fit)."""


class RhoDomainError(PriorForgeError):
    """A partial correlation lies outside the representable range of a profile.

    ``rho_max`` gives the largest attainable |rho| for the profile, when known.
    """

    def __init__(self, message: str, rho_max: float | None = None):
        self.rho_max = rho_max
        if rho_max is not None:
            message = f"{message} (max attainable |rho| = {rho_max:.6g})"
        super().__init__(message)
