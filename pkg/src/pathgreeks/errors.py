"""Exception hierarchy shared by all modules."""


class PathGreeksError(Exception):
    """Base class for library errors."""


class InvalidArgumentError(PathGreeksError, ValueError):
    pass


class ModelInvalidError(PathGreeksError, ValueError):
    pass


class InvalidDirectionError(PathGreeksError, ValueError):
    pass


class ConfigError(PathGreeksError, ValueError):
    pass


class NumericalError(PathGreeksError, ArithmeticError):
    """Raised when a simulation or estimator hits a numerical abort."""

    def __init__(self, message: str, path_index: int | None = None):
        if path_index is not None:
            message = f"{message} (path {path_index})"
        super().__init__(message)
        self.path_index = path_index


class DiffusionDegeneracyError(NumericalError):
    pass


class SimulationOverflowError(NumericalError):
    pass
