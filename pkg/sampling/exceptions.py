# sampling/exceptions.py


class PFDiffError(Exception):
    """Base error for the sampling toolkit"""


class ConfigError(PFDiffError):
    """Experiment config failed to parse or validate"""


class ScheduleRangeError(PFDiffError):
    pass


class GridCollisionError(PFDiffError):
    pass


class MixtureError(PFDiffError):
    pass


class SolverDomainError(PFDiffError):
    pass


class ConfigInvariantError(PFDiffError):
    """PFDiff config or grid breaks the grid-size law"""


class StaleBufferError(PFDiffError):
    """Score buffer tag does not match the interval the driver expects"""


class AlignmentError(PFDiffError):
    pass


class DiagnosticDomainError(PFDiffError):
    pass


class MetricError(PFDiffError):
    pass


class PairingError(MetricError):
    pass


class PropertyFailure(PFDiffError):
    """A checked property found counterexamples"""


class FixtureError(PFDiffError):
    """Pinned trend fixture is unreadable or unknown"""
