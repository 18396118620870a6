"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class BosonlightError(Exception):
    exit_code = 1


class InvalidArgument(BosonlightError, ValueError):
    exit_code = 2


class ConfigError(InvalidArgument):
    exit_code = 2


class Unsupported(InvalidArgument):
    exit_code = 2


class ResourceLimitError(BosonlightError):
    exit_code = 3


class NumericalFailure(BosonlightError):
    exit_code = 4

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics
