"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class RegsomError(Exception):
    pass


class ConfigError(RegsomError):
    """Bad configuration file, flag value or unknown key."""


class DataError(RegsomError):
    """Input data violates a contract (overlapping spells, missing class mean...)."""


class InfeasibleSpecError(DataError):
    """A synthetic-cohort spec asks for marginals no cohort can satisfy."""


class NumericalError(RegsomError):
    """A numerical routine failed to converge or hit a singular matrix."""
