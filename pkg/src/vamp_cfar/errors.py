"""Exception taxonomy shared by all toolkit modules.

Every failure the toolkit can signal deliberately has its own class so
callers (and the Monte-Carlo harness in particular) can distinguish
"this trial's detector gave up" from "the recovery engine produced NaN"
from "your config file is wrong".
"""


class VampCfarError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(VampCfarError, ValueError):
    """Inputs have inconsistent or out-of-range dimensions."""


class DegenerateDivergenceError(VampCfarError, ArithmeticError):
    """A denoiser/LMMSE divergence hit exactly 0 or 1, making the
    extrinsic update undefined."""


class NumericFailureError(VampCfarError, ArithmeticError):
    """NaN or Inf appeared inside an iterative computation."""


class ThresholdDomainError(VampCfarError, ValueError):
    """Rayleigh threshold requested for a non-positive variance or a
    false-alarm rate outside (0, 1]."""


class InsufficientNullSamplesError(VampCfarError, ValueError):
    """Fewer than two null samples remain, so the sample variance of
    the residual is undefined."""


class DetectorFailureError(VampCfarError, RuntimeError):
    """The parameter-convergence detector could not complete.

    Carries the 1-based iteration index at which it gave up.
    """

    def __init__(self, iteration: int, reason: str):
        self.iteration = iteration
        self.reason = reason
        super().__init__(f"detector failed at iteration {iteration}: {reason}")


class ParameterSchemaError(VampCfarError, ValueError):
    """A layer-parameter file violates the schema.  The message names
    the offending field path (e.g. ``layers[2].alpha``)."""


class ConfigError(VampCfarError, ValueError):
    """An experiment config file is missing keys or holds invalid values."""
