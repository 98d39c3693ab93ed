"""Exception hierarchy shared by the library and the CLI exit-code contract."""


class GavgError(Exception):
    """Base class for all library errors."""


class InvalidInput(GavgError):
    """Malformed or inconsistent input data (CLI exit code 1)."""


class HypothesisViolation(GavgError):
    """A mathematical hypothesis required by an operation fails (CLI exit code 2).

    Carries optional structured context, e.g. the partial convergence trace
    accumulated before a divergence guard fired.
    """

    def __init__(self, message, trace=None, witness=None):
        super().__init__(message)
        self.trace = trace
        self.witness = witness
