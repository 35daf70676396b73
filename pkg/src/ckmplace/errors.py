"""Exception types raised across the package."""


class CkmError(ValueError):
    """Malformed or invalid channel knowledge map."""


class OutOfMapError(CkmError):
    """A gain was requested for a location the map does not cover."""


class InfeasiblePlacementError(ValueError):
    """Some UAV location lies outside the feasible area."""


class DegenerateSetError(RuntimeError):
    """The interpolation set does not determine a unique quadratic model."""


class BudgetExceededError(RuntimeError):
    """An exhaustive search would exceed its evaluation budget."""


class ConfigError(ValueError):
    """Invalid experiment or scene configuration.

    ``line`` is the 1-based line of the offending key when it could be located.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
