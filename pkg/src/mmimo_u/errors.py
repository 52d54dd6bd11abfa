"""Exception hierarchy. Each category maps to a distinct CLI exit code."""


class SimulationError(Exception):
    exit_code = 1


class ConfigError(SimulationError, ValueError):
    exit_code = 2


class DataError(SimulationError, ValueError):
    exit_code = 3


class OutputError(SimulationError, OSError):
    exit_code = 4


class AllocationError(SimulationError, ValueError):
    """Spatial resources requested exceed the array size."""

    exit_code = 5


class PlacementError(SimulationError, RuntimeError):
    """Rejection sampling ran out of attempts for one node."""

    exit_code = 6
