"""Domain types shared by every other module.

Iteration spaces are zero-based half-open ranges [0, n). A Chunk is a
contiguous slice of that range assigned in one scheduling round. All times
are seconds in live runs and abstract units in simulated runs; the formulas
never mix the two.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidParameters


def apply_chunk_threshold(computed: int, remaining: int, k: int) -> int:
    """Raise a computed chunk size to the threshold k, then clamp.

    Returns min(remaining, max(computed, k)). Total under its
    preconditions (remaining >= 1, k >= 1, computed >= 0) and never 0.
    """
    if remaining < 1 or k < 1 or computed < 0:
        raise InvalidParameters(
            f"apply_chunk_threshold({computed=}, {remaining=}, {k=})"
        )
    return min(remaining, max(computed, k))


@dataclass(frozen=True, slots=True)
class LoopDescriptor:
    """An indexed loop: iteration space [0, n) repeated time_steps times."""

    loop_id: str
    n: int
    time_steps: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameters(f"n must be >= 1, got {self.n}")
        if self.time_steps < 1:
            raise InvalidParameters(
                f"time_steps must be >= 1, got {self.time_steps}"
            )


@dataclass(frozen=True, slots=True)
class WorkloadProfile:
    """Per-loop cost statistics: mean mu and population sigma of the
    per-iteration time, plus h, the estimated cost of one scheduling round.
    """

    mu: float
    sigma: float
    h: float = 0.0

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidParameters(f"profile mu must be > 0, got {self.mu}")
        if self.sigma < 0 or self.h < 0:
            raise InvalidParameters("profile sigma and h must be >= 0")


class ThreadWeights:
    """Per-thread positive processing weights normalized to sum to p."""

    __slots__ = ("values",)

    def __init__(self, values):
        vals = [float(v) for v in values]
        if not vals:
            raise InvalidParameters("weights must be non-empty")
        if any(v <= 0 for v in vals):
            raise InvalidParameters(f"weights must be positive: {vals}")
        total = sum(vals)
        p = len(vals)
        self.values = [v * p / total for v in vals]

    @classmethod
    def uniform(cls, p: int) -> "ThreadWeights":
        return cls([1.0] * p)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, t: int) -> float:
        return self.values[t]

    def __iter__(self):
        return iter(self.values)

    def __eq__(self, other) -> bool:
        return isinstance(other, ThreadWeights) and self.values == other.values

    def __repr__(self) -> str:
        return f"ThreadWeights({self.values!r})"


@dataclass(frozen=True, slots=True)
class ExecutionContext:
    """Execution configuration: thread count p, technique name, and the
    chunk parameter k.

    k is the exact fixed chunk size for ss and a lower-bound threshold for
    every other technique (static partitions blocks regardless of k).
    weights feeds wf2; profile feeds the profile-based techniques and takes
    precedence over the profile store.
    """

    p: int
    technique: str
    chunk_param: int = 1
    weights: ThreadWeights | None = None
    profile: WorkloadProfile | None = None

    def __post_init__(self):
        from .schedulers import normalize_technique  # local: avoids cycle

        if self.p < 1:
            raise InvalidParameters(f"p must be >= 1, got {self.p}")
        if self.chunk_param < 1:
            raise InvalidParameters(
                f"chunk_param must be >= 1, got {self.chunk_param}"
            )
        object.__setattr__(
            self, "technique", normalize_technique(self.technique)
        )
        if self.weights is not None and len(self.weights) != self.p:
            raise InvalidParameters(
                f"weights length {len(self.weights)} != p {self.p}"
            )


@dataclass(frozen=True, slots=True)
class Chunk:
    """A contiguous [start, start+size) slice granted in one round."""

    start: int
    size: int
    thread: int
    batch: int | None = None

    @property
    def stop(self) -> int:
        return self.start + self.size


@dataclass(slots=True)
class ThreadStats:
    """Per-thread accounting for one loop instance.

    mu_est/sigma_est mirror the adaptive per-thread estimates at the time
    the stats were snapshotted (None for non-adaptive techniques).
    """

    p: int
    iterations_done: list[int] = field(default_factory=list)
    busy_time: list[float] = field(default_factory=list)
    sched_time: list[float] = field(default_factory=list)
    mu_est: list[float | None] = field(default_factory=list)
    sigma_est: list[float | None] = field(default_factory=list)

    def __post_init__(self):
        if not self.iterations_done:
            self.iterations_done = [0] * self.p
            self.busy_time = [0.0] * self.p
            self.sched_time = [0.0] * self.p
            self.mu_est = [None] * self.p
            self.sigma_est = [None] * self.p
