"""Exception types shared across the package."""


class WindBidError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(WindBidError, ValueError):
    pass


class NumericalFailure(WindBidError):
    """Simplex could not make progress within pivot tolerances or iteration limits."""

    def __init__(self, message, scenario=None):
        if scenario is not None:
            message = f"scenario {scenario}: {message}"
        super().__init__(message)
        self.scenario = scenario


class DegenerateSeries(WindBidError, ValueError):
    pass


class InsufficientData(WindBidError, ValueError):
    pass


class DataExhausted(WindBidError):
    pass


class SchemaError(WindBidError, ValueError):
    def __init__(self, message, path=None, line=None, column=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{': '.join([', '.join(where), message])}"
        super().__init__(message)
        self.path = path
        self.line = line
        self.column = column


class ArchitectureMismatch(WindBidError, ValueError):
    pass


class ConfigError(WindBidError, ValueError):
    pass
