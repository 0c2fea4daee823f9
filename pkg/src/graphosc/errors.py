"""Exception hierarchy shared by all modules.

Each class carries the process exit code the CLI maps it to.
"""


class GraphoscError(Exception):
    exit_code = 1


class DomainError(GraphoscError, ValueError):
    """Input outside the mathematical domain of an operation."""

    exit_code = 2


class ContractError(GraphoscError, ValueError):
    """Arguments are individually valid but mutually inconsistent."""

    exit_code = 2


class ConfigError(GraphoscError, ValueError):
    exit_code = 2


class FormatError(GraphoscError, ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    exit_code = 2

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class NumericalError(GraphoscError, ArithmeticError):
    """Non-finite or exploding values; ``step`` is the offending step index."""

    exit_code = 3

    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message if step is None else f"{message} (step {step})")


class SizeCapError(GraphoscError, ValueError):
    """Exact algorithm requested above its configured size cap."""

    exit_code = 4
