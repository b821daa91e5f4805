"""Typed errors shared across the package."""


class HdtestError(Exception):
    """Base class for all errors raised by hdtest."""


class InsufficientDataError(HdtestError, ValueError):
    """The sample is too small for the requested statistic."""


class DimensionMismatchError(HdtestError, ValueError):
    """Samples that must share a dimension do not."""


class DegenerateVariableError(HdtestError, ValueError):
    """A variable has zero (or negative) sample variance where a positive one is required.

    The offending variable index, when known, is stored in ``index``.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class CalibrationError(HdtestError, RuntimeError):
    """A variance estimate needed for studentization is nonpositive.

    The raw offending value is stored in ``value`` so harnesses can report
    failure rates honestly instead of clamping.
    """

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class NotDefinedError(HdtestError, ValueError):
    """The classical statistic is not defined in this regime (p too large)."""


class UnsupportedDimensionError(HdtestError, ValueError):
    """The statistic's null law is not usable at this dimension."""


class InfeasibleProblemError(HdtestError, RuntimeError):
    """The constrained optimization problem has no feasible point."""


class OracleCapError(HdtestError, ValueError):
    """A brute-force enumeration was requested above its configured size cap."""


class HarnessError(HdtestError, RuntimeError):
    """A simulation scenario could not produce any usable replication."""
