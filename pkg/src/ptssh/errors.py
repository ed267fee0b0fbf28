"""Exception hierarchy shared by all ptssh modules."""


class PTSSHError(Exception):
    """Base class for every error raised by ptssh."""


class ParameterError(PTSSHError, ValueError):
    """Invalid model or run parameters."""


class DomainError(PTSSHError, ValueError):
    """Input outside the domain where a formula is defined (poles, branch limits)."""


class DegenerateLimitError(DomainError):
    """A closed form degenerates in a limit that has its own code path (e.g. gamma = 0)."""


class ExpansionError(DomainError):
    """A perturbative expansion is singular at the requested point."""


class NormalizationError(PTSSHError, ArithmeticError):
    """The requested normalization convention cannot be applied."""


class ClassificationError(PTSSHError):
    """Spectral indicators disagree beyond tolerance.

    The raw spectrum is attached as ``spectrum`` for diagnostics.
    """

    def __init__(self, message, spectrum=None):
        super().__init__(message)
        self.spectrum = spectrum


class IntegratorError(PTSSHError):
    """Time integration failed to reach the requested accuracy."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
