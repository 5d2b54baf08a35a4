"""Exception types; each maps to a CLI exit code."""


class ConfigError(ValueError):
    exit_code = 2


class TraceExhaustedError(RuntimeError):
    exit_code = 3


class SolverError(RuntimeError):
    exit_code = 4
