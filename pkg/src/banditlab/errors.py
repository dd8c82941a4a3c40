"""Exception hierarchy shared by every banditlab module."""


class BanditLabError(Exception):
    """Base class for all library errors."""


class InvalidConfigurationError(BanditLabError, ValueError):
    """A parameter lies outside its admissible range."""


class UnsupportedConfigurationError(BanditLabError, ValueError):
    """The requested combination is well formed but not supported."""


class UndefinedBoundError(BanditLabError, ValueError):
    """A regret lower bound was requested where it does not exist."""


class UndefinedTestError(BanditLabError, ValueError):
    """A statistical test cannot be computed on the given table."""


class UndefinedCurveError(BanditLabError, ValueError):
    """A curve was requested over an empty sample."""


class PopulationError(BanditLabError, ValueError):
    """A patient population is malformed or empty.

    ``row`` and ``column`` locate the offending cell (1-based data rows,
    header excluded) when the error comes from a file.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class ConfigError(BanditLabError, ValueError):
    """A CLI configuration file failed validation.

    ``path`` is the dotted field path (``section.key``) of the bad entry.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
