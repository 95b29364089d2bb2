"""Exception hierarchy.

``NumericalError`` subclasses map to CLI exit status 3; ``ConfigError`` and
validation problems map to exit status 2.
"""


class HarnessLabError(Exception):
    pass


class SpecError(HarnessLabError, ValueError):
    """Invalid process specification or operation arguments."""


class IntegrabilityError(SpecError):
    """Jump component without a finite first absolute moment."""


class PinNotOnGrid(HarnessLabError, ValueError):
    pass


class NotNested(HarnessLabError, ValueError):
    pass


class NotCentered(HarnessLabError, ValueError):
    pass


class UnsupportedFamily(HarnessLabError, ValueError):
    pass


class InsufficientSamples(HarnessLabError, ValueError):
    pass


class InsufficientData(HarnessLabError, ValueError):
    pass


class ConfigError(HarnessLabError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class NumericalError(HarnessLabError):
    """Numerical failure; ``operation`` names the operation that raised it."""

    def __init__(self, message, operation=None):
        super().__init__(message)
        self.operation = operation


class NoDensity(NumericalError):
    pass


class TruncationBudgetExceeded(NumericalError):
    pass


class QuadratureBudgetExceeded(NumericalError):
    pass


class MassCheckFailed(NumericalError):
    pass


class NumericalUnderflow(NumericalError):
    pass


class DegenerateWeights(NumericalError):
    pass
