"""Exception hierarchy. Each family maps to one CLI exit code."""


class FragilityError(Exception):
    exit_code = 1


class ConfigError(FragilityError, ValueError):
    exit_code = 2


class DataError(FragilityError, ValueError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ValidationError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class DegenerateMarketError(DataError):
    pass


class SpecError(ConfigError):
    """Synthetic-panel spec that cannot be realized."""


class NumericalError(FragilityError, ArithmeticError):
    exit_code = 4

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
