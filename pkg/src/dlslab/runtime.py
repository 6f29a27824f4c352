"""Threaded parallel-for runtime with live and virtual time.

Worker threads pull chunks from a shared LoopScheduler; every scheduler
call happens under one reservation lock, so chunk reservation is a
single serialized fetch-and-add regardless of technique. Techniques
whose batch rule is modeled as mutex-protected (fac) additionally take a
dedicated batch lock around the request, keeping the structural cost in
the picture even though the reservation lock already serializes.

Live mode times the body with perf_counter_ns. Virtual mode replaces
wall time with exact cost-vector sums plus an OverheadModel, which makes
a p=1 run reproduce the serial execution model step for step while still
exercising real threads.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field

from .core import Chunk, ExecutionContext, LoopDescriptor, ThreadStats, WorkloadProfile
from .errors import InvalidParameters, KernelPanic, MidFlightChange
from .measurement import ChunkTracer, EnvSettings, LoopTimesRecorder, ProfileStore, TraceRecord
from .metrics import ImbalanceReport, build_report
from .schedulers import AdaptiveState, LoopScheduler, Technique, get_technique, normalize_technique
from .simulator import OverheadModel
from .workloads import CostVector


def set_schedule(context: ExecutionContext, technique: str,
                 chunk_param: int | None = None) -> ExecutionContext:
    """A copy of context with a different technique and/or chunk_param."""
    name = normalize_technique(technique)
    return ExecutionContext(
        p=context.p,
        technique=name,
        chunk_param=context.chunk_param if chunk_param is None else chunk_param,
        weights=context.weights,
        profile=context.profile,
    )


def context_with_env(context: ExecutionContext,
                     settings: EnvSettings) -> ExecutionContext:
    """Apply an environment schedule override, if any."""
    if settings.schedule is None:
        return context
    technique, k = settings.schedule
    return set_schedule(context, technique, k)


@dataclass
class RunReport:
    """Everything one parallel-for execution produced."""

    loop_id: str
    technique: str
    n: int
    p: int
    k: int
    time_steps: int
    makespan: float                    # sum of per-instance makespans
    thread_times: tuple[float, ...]    # per-thread time, summed over instances
    cov: float
    pi: float
    pi_defined: bool
    chunk_count: int
    virtual: bool
    instances: list[ImbalanceReport] = field(default_factory=list)
    stats: list[ThreadStats] = field(default_factory=list)
    chunks: list[list[Chunk]] | None = None

    def chunk_sizes(self, instance: int = 0) -> list[int]:
        if self.chunks is None:
            raise InvalidParameters("chunks were not collected for this run")
        return [c.size for c in self.chunks[instance]]


class _Panic:
    """First body failure wins; later ones are ignored."""

    __slots__ = ("lock", "failed_index", "cause")

    def __init__(self):
        self.lock = threading.Lock()
        self.failed_index: int | None = None
        self.cause: BaseException | None = None

    def arm(self, index: int, cause: BaseException) -> None:
        with self.lock:
            if self.cause is None:
                self.failed_index = index
                self.cause = cause


class LoopExecutor:
    """Owns a loop's schedule and its adaptive state across runs.

    set_schedule swaps technique/chunk_param between runs; swapping the
    technique resets learned state (weights, timing estimates), while a
    chunk_param-only change keeps it. Calling it mid-run raises.
    """

    def __init__(self, descriptor: LoopDescriptor, context: ExecutionContext,
                 *, profile: WorkloadProfile | None = None,
                 profile_store: ProfileStore | None = None):
        self.descriptor = descriptor
        self.context = context
        self._profile = profile
        self._store = profile_store
        self._adaptive = AdaptiveState(context.p)
        self._running = False

    def set_schedule(self, technique: str,
                     chunk_param: int | None = None) -> ExecutionContext:
        if self._running:
            raise MidFlightChange(
                "cannot change the schedule while a loop instance is running"
            )
        new = set_schedule(self.context, technique, chunk_param)
        if new.technique != self.context.technique:
            self._adaptive = AdaptiveState(new.p)
        self.context = new
        return new

    def _resolve_profile(self, technique: Technique,
                         costs: CostVector | None,
                         overhead: OverheadModel) -> WorkloadProfile | None:
        if not technique.requires_profile:
            return None
        if self._profile is not None:
            return self._profile
        if self.context.profile is not None:
            return self.context.profile
        if self._store is not None:
            stored = self._store.load(self.descriptor.loop_id,
                                      self.descriptor.n)
            if stored is not None:
                return stored
        if costs is not None:
            h = overhead.round_cost(technique.name,
                                    technique.uses_batch_mutex)
            return costs.profile(h=h)
        return None  # LoopScheduler raises ProfileMissing

    def run(self, body=None, *, costs: CostVector | None = None,
            overhead: OverheadModel | None = None,
            technique: Technique | None = None,
            tracer: ChunkTracer | None = None,
            loop_times: LoopTimesRecorder | None = None,
            collect_chunks: bool = False) -> RunReport:
        """Execute descriptor.time_steps instances with real threads.

        Live mode (body given) runs body(i) for every iteration and
        measures wall time; a thread's time is its last chunk's body-end
        timestamp relative to instance start, so a report recomputed
        from the trace matches exactly. Virtual mode (costs given, no
        body) charges exact cost sums and overhead-model scheduling time
        on per-thread virtual clocks.

        A body exception aborts the run: granted chunks finish, no new
        chunks are granted, and KernelPanic carries the failed iteration
        plus every completed [start, stop) range.
        """
        descriptor = self.descriptor
        context = self.context
        virtual = body is None
        if virtual and costs is None:
            raise InvalidParameters(
                "pass a body to run live or costs to run virtually"
            )
        if costs is not None and len(costs) != descriptor.n:
            raise InvalidParameters(
                f"cost vector has {len(costs)} entries for n={descriptor.n}"
            )
        overhead = overhead if overhead is not None else OverheadModel()
        tech = technique if technique is not None else get_technique(context.technique)
        prof = self._resolve_profile(tech, costs, overhead)

        p = context.p
        totals = [0.0] * p
        makespan = 0.0
        chunk_count = 0
        instances: list[ImbalanceReport] = []
        stats_list: list[ThreadStats] = []
        all_chunks: list[list[Chunk]] | None = [] if collect_chunks else None

        self._running = True
        try:
            for step in range(descriptor.time_steps):
                scheduler = LoopScheduler(
                    descriptor, context, technique=tech, profile=prof,
                    adaptive=self._adaptive, step_index=step,
                )
                collected: list[Chunk] | None = (
                    [] if collect_chunks else None
                )
                if virtual:
                    times = self._instance_virtual(
                        scheduler, tech, costs, overhead, tracer, step,
                        collected)
                else:
                    times = self._instance_live(
                        scheduler, tech, body, tracer, step, collected)
                state = scheduler.state
                if state.remaining != 0:
                    raise AssertionError(
                        f"instance left {state.remaining} iterations unscheduled"
                    )
                stats = scheduler.finish_instance()
                if virtual:
                    total_busy = math.fsum(stats.busy_time)
                    expect = costs.total()
                    if not math.isclose(total_busy, expect, rel_tol=1e-9,
                                        abs_tol=1e-9):
                        raise AssertionError(
                            f"busy-time conservation broke: "
                            f"{total_busy} != {expect}"
                        )
                instances.append(build_report(
                    descriptor.loop_id, step, p, times, state.rounds))
                stats_list.append(stats)
                if loop_times is not None:
                    loop_times.record_instance(descriptor.loop_id, step, times)
                    loop_times.flush()
                if all_chunks is not None:
                    all_chunks.append(collected)
                for w in range(p):
                    totals[w] += times[w]
                makespan += max(times)
                chunk_count += state.rounds
                if tracer is not None:
                    tracer.flush()
        finally:
            self._running = False

        aggregate = build_report(descriptor.loop_id, -1, p, totals, chunk_count)
        return RunReport(
            loop_id=descriptor.loop_id,
            technique=tech.name,
            n=descriptor.n,
            p=p,
            k=context.chunk_param,
            time_steps=descriptor.time_steps,
            makespan=makespan,
            thread_times=tuple(totals),
            cov=aggregate.cov,
            pi=aggregate.pi,
            pi_defined=aggregate.pi_defined,
            chunk_count=chunk_count,
            virtual=virtual,
            instances=instances,
            stats=stats_list,
            chunks=all_chunks,
        )

    def _instance_live(self, scheduler: LoopScheduler, tech: Technique,
                       body, tracer: ChunkTracer | None, step: int,
                       collected: list[Chunk] | None) -> list[float]:
        descriptor = self.descriptor
        p = self.context.p
        lock = threading.Lock()
        batch_lock = threading.Lock()
        uses_mutex = tech.uses_batch_mutex
        abort = threading.Event()
        panic = _Panic()
        completed: list[list[tuple[int, int]]] = [[] for _ in range(p)]
        first_grant: list[int | None] = [None] * p
        finish = [0] * p

        def worker(t: int) -> None:
            buf = tracer.buffer(t) if tracer is not None else None
            mine = completed[t]
            while not abort.is_set():
                s0 = time.perf_counter_ns()
                if uses_mutex:
                    with batch_lock, lock:
                        chunk = scheduler.next_chunk(t)
                        if chunk is not None and collected is not None:
                            collected.append(chunk)
                else:
                    with lock:
                        chunk = scheduler.next_chunk(t)
                        if chunk is not None and collected is not None:
                            collected.append(chunk)
                s1 = time.perf_counter_ns()
                if chunk is None:
                    break
                if first_grant[t] is None:
                    first_grant[t] = s0
                done = chunk.start
                err: BaseException | None = None
                try:
                    for i in range(chunk.start, chunk.stop):
                        body(i)
                        done = i + 1
                except BaseException as exc:
                    err = exc
                b1 = time.perf_counter_ns()
                if err is not None:
                    if done > chunk.start:
                        mine.append((chunk.start, done))
                    panic.arm(done, err)
                    abort.set()
                    finish[t] = b1
                    break
                busy = (b1 - s1) / 1e9
                sched = (s1 - s0) / 1e9
                with lock:
                    scheduler.complete_chunk(t, chunk, busy, sched)
                mine.append((chunk.start, chunk.stop))
                finish[t] = b1
                if buf is not None:
                    buf.append(TraceRecord(
                        descriptor.loop_id, step, t, chunk.start,
                        chunk.size, s0, s1, b1,
                    ))

        threads = [
            threading.Thread(target=worker, args=(t,), name=f"dlslab-w{t}")
            for t in range(p)
        ]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        if tracer is not None:
            tracer.flush()
        if panic.cause is not None:
            ranges = [r for sub in completed for r in sub]
            raise KernelPanic(panic.failed_index, panic.cause, ranges)
        # clock origin: the first grant request that actually received a
        # chunk, so times recomputed from a trace match to the bit
        origin = min(g for g in first_grant if g is not None)
        return [(finish[t] - origin) / 1e9 if first_grant[t] is not None
                else 0.0 for t in range(p)]

    def _instance_virtual(self, scheduler: LoopScheduler, tech: Technique,
                          costs: CostVector, overhead: OverheadModel,
                          tracer: ChunkTracer | None, step: int,
                          collected: list[Chunk] | None) -> list[float]:
        descriptor = self.descriptor
        p = self.context.p
        lock = threading.Lock()
        batch_lock = threading.Lock()
        uses_mutex = tech.uses_batch_mutex
        clocks = [0.0] * p

        def worker(t: int) -> None:
            buf = tracer.buffer(t) if tracer is not None else None
            clock = 0.0
            while True:
                if uses_mutex:
                    with batch_lock, lock:
                        chunk = scheduler.next_chunk(t)
                        if chunk is not None and collected is not None:
                            collected.append(chunk)
                else:
                    with lock:
                        chunk = scheduler.next_chunk(t)
                        if chunk is not None and collected is not None:
                            collected.append(chunk)
                if chunk is None:
                    break
                d_sched = overhead.round_cost(tech.name, uses_mutex)
                busy = costs.range_sum(chunk.start, chunk.stop)
                body_begin = clock + d_sched
                body_end = body_begin + busy
                with lock:
                    scheduler.complete_chunk(t, chunk, busy, d_sched)
                if buf is not None:
                    buf.append(TraceRecord(
                        descriptor.loop_id, step, t, chunk.start,
                        chunk.size, clock, body_begin, body_end,
                    ))
                clock = body_end
            clocks[t] = clock

        threads = [
            threading.Thread(target=worker, args=(t,), name=f"dlslab-w{t}")
            for t in range(p)
        ]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        if tracer is not None:
            tracer.flush()
        return clocks


def parallel_for(descriptor: LoopDescriptor, context: ExecutionContext,
                 body=None, *, costs: CostVector | None = None,
                 overhead: OverheadModel | None = None,
                 profile: WorkloadProfile | None = None,
                 profile_store: ProfileStore | None = None,
                 technique: Technique | None = None,
                 tracer: ChunkTracer | None = None,
                 loop_times: LoopTimesRecorder | None = None,
                 collect_chunks: bool = False) -> RunReport:
    """One-shot parallel loop execution (a fresh LoopExecutor each call)."""
    executor = LoopExecutor(descriptor, context, profile=profile,
                            profile_store=profile_store)
    return executor.run(body, costs=costs, overhead=overhead,
                        technique=technique, tracer=tracer,
                        loop_times=loop_times, collect_chunks=collect_chunks)
