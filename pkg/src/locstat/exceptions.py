"""Exception hierarchy shared by all locstat modules."""


class LocstatError(Exception):
    """Base class for every error raised by locstat."""


class InvalidArgumentError(LocstatError, ValueError):
    """An argument is outside its documented domain."""


class InadmissibleError(LocstatError, ValueError):
    """A parameter set violates a contraction or summability condition."""


class DegenerateWindowError(LocstatError, ValueError):
    """The localization window carries no kernel mass."""


class SimulationExplosion(LocstatError, RuntimeError):
    """A recursion produced a non-finite or runaway value.

    Parameters
    ----------
    t : int
        First (1-based) time index at which the guard tripped.
    """

    def __init__(self, t, message=None):
        self.t = int(t)
        super().__init__(message or f"trajectory exploded at t={self.t}")


class ConfigError(LocstatError, ValueError):
    """A run configuration could not be parsed or validated."""


class DataError(LocstatError, ValueError):
    """An input series file is malformed.

    Parameters
    ----------
    row : int or None
        1-based line number of the offending row in the file.
    """

    def __init__(self, message, row=None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")
