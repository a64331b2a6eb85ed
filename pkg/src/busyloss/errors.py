"""Exception types shared across the package."""


class BusylossError(Exception):
    """Base class for all package errors."""


class ConfigError(BusylossError):
    """Invalid configuration, flags, or parameter values (CLI exit code 2)."""


class InvalidDistributionError(BusylossError, ValueError):
    """Distribution parameters violate their invariants."""


class NotRepresentableError(BusylossError):
    """The distribution has no exact phase-type representation."""


class InsufficientDataError(BusylossError):
    """Too few samples for the requested statistic."""


class IncompleteBusyPeriodError(BusylossError):
    """A scripted arrival source ran out before the system emptied.

    The busy period cannot be certified complete, so the record is discarded.
    """


class CapacityError(BusylossError):
    """A resource bound was exceeded, e.g. the CTMC state-space limit (CLI exit code 3)."""


class ExcursionTruncatedError(BusylossError):
    """A random-walk excursion hit the step cap before returning to zero.

    Carries the crossings observed so far, so callers may still use the
    partial count while reporting the truncation.
    """

    def __init__(self, crossings: int, steps: int, step_cap: int):
        super().__init__(
            f"excursion exceeded {step_cap} steps ({crossings} crossings observed)"
        )
        self.crossings = crossings
        self.steps = steps
        self.step_cap = step_cap
