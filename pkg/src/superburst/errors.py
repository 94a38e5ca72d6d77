"""Exception types shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
NumericalError -> 3, ConvergenceError -> 4.
"""


class SuperburstError(Exception):
    """Base class for all package errors."""


class ConfigError(SuperburstError):
    """Invalid configuration, parameters, or input files."""


class NumericalError(SuperburstError):
    """Integration failure: invariants violated beyond tolerance."""


class ConvergenceError(SuperburstError):
    """An iterative procedure exhausted its budget without converging."""
