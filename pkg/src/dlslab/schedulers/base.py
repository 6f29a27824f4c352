"""Scheduling driver and shared state for all chunk-calculation techniques.

A LoopScheduler owns the per-instance SchedulerState and performs the
technique-agnostic bookkeeping (reservation counters, batch budgets, stats,
adaptive-state feedback). Technique objects are stateless singletons: every
mutable datum lives in SchedulerState or AdaptiveState so the same technique
instance can drive any number of loops.

Callers are responsible for serialization: the threaded runtime wraps calls
in its reservation lock, the simulator is single-threaded by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from ..core import (
    Chunk,
    ExecutionContext,
    LoopDescriptor,
    ThreadStats,
    ThreadWeights,
    WorkloadProfile,
    apply_chunk_threshold,
)
from ..errors import InvalidParameters, ProfileMissing

if TYPE_CHECKING:  # pragma: no cover
    from .techniques import Technique


class AdaptiveState:
    """Learned state that survives across loop instances.

    Holds the current AWF-family weights and the per-thread Welford
    accumulators for AF/mAF mean/stddev estimates of per-iteration time.
    Reset only when the technique changes (set_schedule contract).
    """

    __slots__ = ("p", "weights", "af_count", "af_mean", "af_m2")

    def __init__(self, p: int):
        self.p = p
        self.weights: list[float] = [1.0] * p
        self.af_count: list[int] = [0] * p
        self.af_mean: list[float] = [0.0] * p
        self.af_m2: list[float] = [0.0] * p

    def observe_iteration_time(self, thread: int, sample: float) -> None:
        """Welford update with one per-iteration time sample."""
        sample = max(sample, 1e-12)  # keep mu_est > 0 for the closed forms
        self.af_count[thread] += 1
        delta = sample - self.af_mean[thread]
        self.af_mean[thread] += delta / self.af_count[thread]
        self.af_m2[thread] += delta * (sample - self.af_mean[thread])

    def mu_est(self, thread: int) -> float | None:
        if self.af_count[thread] == 0:
            return None
        return self.af_mean[thread]

    def sigma_est(self, thread: int) -> float | None:
        cnt = self.af_count[thread]
        if cnt == 0:
            return None
        return math.sqrt(self.af_m2[thread] / cnt)


@dataclass(slots=True)
class SchedulerState:
    """Shared mutable state for one loop instance."""

    n: int
    p: int
    k: int
    technique_name: str
    remaining: int
    scheduled: int = 0
    rounds: int = 0
    step_index: int = 0
    # batch bookkeeping (FAC-family techniques)
    batch_index: int = -1
    batch_chunk: int = 0
    batch_remaining: int = 0
    batch_start_remaining: int = 0
    batch_outstanding: dict[int, int] = field(default_factory=dict)
    # TSS linear-decrement state
    tss_chunk: float = 0.0
    tss_delta: float = 0.0
    tss_last: int = 1
    # FSC/BOLD init-time values
    fixed_chunk: int | None = None
    bold_theta: float = 0.0
    # static block partition
    static_taken: list[bool] = field(default_factory=list)
    profile: WorkloadProfile | None = None
    weights: ThreadWeights | None = None
    adaptive: AdaptiveState | None = None
    stats: ThreadStats | None = None

    def take_contiguous(self, size: int, thread: int,
                        batch: int | None = None) -> Chunk:
        """Reserve [scheduled, scheduled+size); caller guarantees
        1 <= size <= remaining."""
        chunk = Chunk(self.scheduled, size, thread, batch)
        self.scheduled += size
        self.remaining -= size
        return chunk

    def open_batch(self, batch_chunk: int) -> None:
        self.batch_index += 1
        self.batch_start_remaining = self.remaining
        self.batch_chunk = batch_chunk
        self.batch_remaining = min(self.p * batch_chunk, self.remaining)

    def batch_closed(self, batch: int) -> bool:
        return batch < self.batch_index or (
            batch == self.batch_index and self.batch_remaining <= 0
        )


def awf_update_weights(stats: ThreadStats, variant: str,
                       previous: ThreadWeights | None = None) -> ThreadWeights:
    """Recompute adaptive processing weights from per-thread rates.

    variant selects the time base: busy time for awf/b/c, busy plus
    scheduling time for d/e. A thread with no completed work (or zero
    time) carries its previous weight forward; the carried weights are
    held fixed and the remaining weight mass is split among the measured
    threads in proportion to their rates so the total stays p.
    """
    variant = variant.lower()
    if variant not in ("awf", "b", "c", "d", "e"):
        raise InvalidParameters(f"unknown awf variant {variant!r}")
    include_sched = variant in ("d", "e")
    p = stats.p
    prev = list(previous) if previous is not None else [1.0] * p

    rates: dict[int, float] = {}
    for t in range(p):
        time_t = stats.busy_time[t]
        if include_sched:
            time_t += stats.sched_time[t]
        if stats.iterations_done[t] > 0 and time_t > 0:
            rates[t] = stats.iterations_done[t] / time_t
    if not rates:
        return ThreadWeights(prev)

    carried_mass = sum(prev[t] for t in range(p) if t not in rates)
    measured_mass = p - carried_mass
    rate_sum = sum(rates.values())
    out = [
        rates[t] * measured_mass / rate_sum if t in rates else prev[t]
        for t in range(p)
    ]
    return ThreadWeights(out)


class LoopScheduler:
    """Grants chunks for one loop instance under a chosen technique.

    Not synchronized; the caller serializes next_chunk/complete_chunk.
    """

    def __init__(
        self,
        descriptor: LoopDescriptor,
        context: ExecutionContext,
        *,
        technique: "Technique | None" = None,
        profile: WorkloadProfile | None = None,
        adaptive: AdaptiveState | None = None,
        step_index: int = 0,
    ):
        from . import get_technique  # local: registry imports this module

        self.descriptor = descriptor
        self.context = context
        self.technique = technique or get_technique(context.technique)
        if context.chunk_param > descriptor.n:
            raise InvalidParameters(
                f"chunk_param {context.chunk_param} exceeds n {descriptor.n}"
            )
        profile = profile if profile is not None else context.profile
        if self.technique.requires_profile and profile is None:
            raise ProfileMissing(self.technique.name)

        weights = context.weights
        if weights is None:
            weights = ThreadWeights.uniform(context.p)
        self.state = SchedulerState(
            n=descriptor.n,
            p=context.p,
            k=context.chunk_param,
            technique_name=self.technique.name,
            remaining=descriptor.n,
            step_index=step_index,
            profile=profile,
            weights=weights,
            adaptive=adaptive if adaptive is not None else AdaptiveState(context.p),
            stats=ThreadStats(context.p),
        )
        self.technique.init_state(self.state)

    def next_chunk(self, thread: int) -> Chunk | None:
        """Reserve the next chunk for the requesting thread, or None when
        this thread has no more work to pull."""
        state = self.state
        if thread < 0 or thread >= state.p:
            raise InvalidParameters(f"thread {thread} out of range for p={state.p}")
        if state.remaining <= 0:
            return None
        chunk = self.technique.grant(state, thread)
        if chunk is not None:
            state.rounds += 1
        return chunk

    def complete_chunk(self, thread: int, chunk: Chunk,
                       busy_time: float, sched_time: float) -> None:
        """Record a finished chunk and feed the technique's learning hook.

        sched_time is the duration of the round that granted this chunk.
        """
        stats = self.state.stats
        stats.iterations_done[thread] += chunk.size
        stats.busy_time[thread] += busy_time
        stats.sched_time[thread] += sched_time
        self.technique.on_complete(self.state, thread, chunk,
                                   busy_time, sched_time)

    def finish_instance(self) -> ThreadStats:
        """Close the instance: run end-of-step hooks and snapshot the
        adaptive estimates into the stats table."""
        state = self.state
        self.technique.on_instance_end(state)
        adaptive = state.adaptive
        for t in range(state.p):
            state.stats.mu_est[t] = adaptive.mu_est(t)
            state.stats.sigma_est[t] = adaptive.sigma_est(t)
        return state.stats
