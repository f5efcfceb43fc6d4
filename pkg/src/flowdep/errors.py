"""Exception hierarchy shared by every flowdep module.

Each class carries the process exit status the command-line front end uses
when the error escapes a subcommand.
"""


class FlowdepError(Exception):
    exit_code = 1


class ConfigError(FlowdepError, ValueError):
    """Invalid parameter or option value supplied by the caller."""

    exit_code = 1


class ParseError(FlowdepError, ValueError):
    """Malformed input record.

    Parameters
    ----------
    message : str
        What went wrong.
    line : int, optional
        1-based line number in the offending stream.
    field : str, optional
        Name of the field that failed validation.
    """

    exit_code = 2

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        if line is not None:
            message = f"{message} at line {line}"
        super().__init__(message)


class DomainError(FlowdepError, ValueError):
    """A numeric value is outside the domain of the requested operation."""

    exit_code = 3


class InsufficientDataError(DomainError):
    pass


class DegenerateMarginalError(DomainError):
    pass
