"""Exception hierarchy shared by every module in the package."""


class ForceRLError(Exception):
    """Base class for all package errors."""


class EmptyData(ForceRLError, ValueError):
    pass


class NoConvergence(ForceRLError, RuntimeError):
    pass


class InsufficientSamples(ForceRLError, ValueError):
    pass


class FeatureNormViolation(ForceRLError, ValueError):
    pass


class ZeroDirection(ForceRLError, ValueError):
    pass


class EmptyNet(ForceRLError, ValueError):
    pass


class NumericalFailure(ForceRLError, ArithmeticError):
    pass


class InvalidKernel(ForceRLError, ValueError):
    pass


class InvalidReward(ForceRLError, ValueError):
    pass


class InvalidInstance(ForceRLError, ValueError):
    """Raised when a generated instance breaks a linear-MDP invariant."""


class OracleUnavailable(ForceRLError, RuntimeError):
    pass


class ConfigError(ForceRLError, ValueError):
    """Invalid agent or experiment configuration.

    ``line`` is the 1-based line of the offending key in the source file,
    when known.
    """

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        prefix = ""
        if source is not None:
            prefix = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(prefix + message)
