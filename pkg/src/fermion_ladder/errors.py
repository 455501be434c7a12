"""Exception hierarchy shared by all modules."""


class LadderError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(LadderError, ValueError):
    pass


class NumericError(LadderError, ArithmeticError):
    pass


class DegenerateOutcomeError(NumericError):
    """A projection was requested on a branch with (numerically) zero weight."""


class CapacityError(LadderError):
    """Exact-diagonalization request exceeds the supported Hilbert-space size."""


class OracleError(LadderError):
    pass


class SelfTestError(LadderError):
    """A startup self-test against the brute-force oracle failed."""


class FitError(LadderError):
    pass


class ConfigError(LadderError, ValueError):
    def __init__(self, message, key_path=None):
        self.key_path = key_path
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)


class PurityAbort(NumericError):
    """Purity defect of a trajectory exceeded the abort threshold."""
