"""Exception types shared across the package."""

from __future__ import annotations


class DlslabError(Exception):
    """Base class for all package errors."""


class InvalidParameters(DlslabError, ValueError):
    """A value object was constructed with out-of-contract parameters."""


class UnknownTechnique(DlslabError, ValueError):
    """The requested scheduling technique name is not registered."""

    def __init__(self, name: str, known: tuple[str, ...]):
        self.name = name
        self.known = known
        super().__init__(
            f"unknown technique {name!r}; valid names: {', '.join(known)}"
        )


class ProfileMissing(DlslabError):
    """A technique that needs a workload profile was started without one."""

    def __init__(self, technique: str):
        self.technique = technique
        super().__init__(
            f"technique {technique!r} requires a workload profile "
            "(mu/sigma/h); run profiling first or pass one explicitly"
        )


class MidFlightChange(DlslabError, RuntimeError):
    """set_schedule was called while a loop instance was executing."""


class KernelPanic(DlslabError):
    """A loop body raised; the instance was aborted.

    completed_ranges lists the [start, stop) index ranges whose body calls
    finished before the abort; failed_index is the iteration that raised.
    """

    def __init__(self, failed_index: int, cause: BaseException,
                 completed_ranges: list[tuple[int, int]]):
        self.failed_index = failed_index
        self.cause = cause
        self.completed_ranges = sorted(completed_ranges)
        self.completed_count = sum(b - a for a, b in completed_ranges)
        super().__init__(
            f"loop body raised at iteration {failed_index}: {cause!r} "
            f"({self.completed_count} iterations completed)"
        )


class ZeroMean(DlslabError, ValueError):
    """Thread times have a non-positive mean; cov is undefined."""


class EmptyInput(DlslabError, ValueError):
    """An aggregation operation received no data."""


class SinkUnwritable(DlslabError, OSError):
    """A measurement sink path cannot be opened for writing."""


class ConfigError(DlslabError, ValueError):
    """An experiment config file failed validation.

    field carries a dotted path into the document when known.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
