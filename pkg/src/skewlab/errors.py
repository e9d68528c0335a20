"""Exception hierarchy shared by every pipeline stage."""


class SkewLabError(Exception):
    """Base class for all package errors."""


class ConfigError(SkewLabError, ValueError):
    """Bad configuration, unknown registry name, or violated precondition."""


class InputError(SkewLabError, ValueError):
    """Malformed array input: wrong shape, non-finite entries, asymmetry."""


class IntegrationBlowup(SkewLabError, ArithmeticError):
    """A trajectory produced NaN/Inf or left the trapping region."""

    def __init__(self, message, time=None):
        super().__init__(message if time is None else f"{message} (t={time:.6g})")
        self.time = time


class CapacityError(SkewLabError, MemoryError):
    """Requested trajectory storage exceeds the configured budget."""


class ConvergenceError(SkewLabError, ArithmeticError):
    """An iterative solve failed to converge."""


class JobFailure(SkewLabError, RuntimeError):
    """A child job of an ensemble failed; carries the job's seed."""

    def __init__(self, message, seed=None, index=None):
        super().__init__(f"{message} [job={index}, seed={seed}]")
        self.seed = seed
        self.index = index
