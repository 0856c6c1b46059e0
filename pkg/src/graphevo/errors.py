"""Exception hierarchy shared across the package."""


class GraphEvoError(Exception):
    """Base class for all package errors."""


class ParseError(GraphEvoError):
    """Malformed input file; carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InstanceError(GraphEvoError):
    """Input is well-formed but inconsistent with the problem instance."""


class ContractError(GraphEvoError):
    """A caller violated a precondition. Indicates a programming bug."""


class TransportError(GraphEvoError):
    """Backend transport failed after all retries."""

    def __init__(self, message, attempts=0):
        self.attempts = attempts
        super().__init__(message)


class ConfigError(GraphEvoError):
    """Invalid run configuration."""


class ComparisonError(GraphEvoError):
    """Two ledgers or reports cannot be compared."""
