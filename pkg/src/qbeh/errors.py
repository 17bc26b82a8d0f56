"""Exception hierarchy shared by every qbeh module."""


class QbehError(Exception):
    """Base class for all toolkit errors."""


class ContractError(QbehError, ValueError):
    """An argument violates the documented precondition of an operation."""


class UsageError(QbehError, ValueError):
    """The caller asked for something the operation does not support."""


class NumericalError(QbehError, ArithmeticError):
    """A computation hit a singularity or failed to converge."""


class PoleProximityError(NumericalError):
    """Evaluation too close to a pole of an immittance or kernel."""

    def __init__(self, message, resonance=None):
        super().__init__(message)
        self.resonance = resonance


class SynthesisError(NumericalError):
    """No multi-start reached the acceptance residual.

    Carries the best residual and parameters found so the caller can
    inspect what went wrong.
    """

    def __init__(self, message, best_residual=None, best_params=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_params = best_params


class StepFailure(NumericalError):
    """Newton iteration inside one integration step did not converge."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ConfigError(QbehError):
    """Configuration file is syntactically or semantically invalid."""

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems or [])
