"""Exception hierarchy shared by all modules."""


class MicromaserError(Exception):
    """Base class for library errors."""


class TruncationError(MicromaserError):
    """A state or operator does not fit inside the truncated Fock space."""


class DegenerateError(MicromaserError):
    """Input lies on a degenerate point where the quantity is undefined."""


class NumericalError(MicromaserError):
    """A numerical routine produced an unusable result."""


class ConvergenceError(NumericalError):
    """Quadrature or time stepping failed to reach the requested tolerance."""


class EigensolverError(NumericalError):
    """A dense eigensolver failed."""


class KernelDimensionError(MicromaserError):
    """A generator kernel has an unexpected dimension."""


class NotStationaryError(MicromaserError):
    """A candidate state is not a common eigenvector of the Kraus operators."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class DivergenceError(MicromaserError):
    """A geometric series defining a steady state does not converge."""


class InvalidCoherenceError(MicromaserError):
    """A coherence violates positivity of the 2x2 density matrix."""


class PartitionError(MicromaserError):
    """A mode partition does not cover the support of a state."""


class ConfigError(MicromaserError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """Configuration text could not be parsed."""

    def __init__(self, message, line, column=1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ValidationError(ConfigError):
    """Configuration parsed but a field is invalid."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
