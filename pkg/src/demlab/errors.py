"""Exception hierarchy shared by every demlab module."""


class DemLabError(Exception):
    pass


class ParameterError(DemLabError, ValueError):
    """Invalid or infeasible parameters for an operation."""


class ConfigurationError(ParameterError):
    """Mis-assembled inputs: mismatched lists, horizon overrun, bad config file."""


class DomainError(DemLabError, ValueError):
    """A function evaluated outside its domain."""


class IntegrationError(DemLabError, ArithmeticError):
    pass


class ProcessExhausted(DemLabError):
    """The process has no admissible next step (e.g. the graph is complete)."""


class ProcessHalted(DemLabError):
    """Normal termination of the greedy matching process: no alive edges left."""


class UndefinedDriftError(DemLabError):
    pass


class GenerationError(DemLabError):
    pass


class OutputError(DemLabError, OSError):
    """A result file could not be written or read."""
