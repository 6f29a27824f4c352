"""Deterministic serial execution model for the scheduling techniques.

Workers are simulated clocks advanced by an event heap keyed on
(time, worker id), so ties always resolve to the lowest id and a given
(loop, context, costs, overhead) quadruple yields bit-identical results
on every run. A worker's chunk completion is fed to the scheduler when
its finish event pops, immediately before its next request, mirroring
the order a real worker thread performs those calls.

Busy time is the exact prefix-sum of the cost vector over the chunk's
range; scheduling time per round comes from an OverheadModel. The final
empty poll that tells a worker to stop is not charged.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .core import Chunk, ExecutionContext, LoopDescriptor, ThreadStats, WorkloadProfile
from .errors import EmptyInput, InvalidParameters
from .measurement import ChunkTracer, TraceRecord
from .metrics import ImbalanceReport, build_report
from .schedulers import AdaptiveState, LoopScheduler, Technique, get_technique
from .workloads import CostVector


@dataclass(frozen=True)
class OverheadModel:
    """Per-round scheduling costs in simulated time units.

    h_assign is the fixed cost of handing out a chunk; h_calc maps
    technique names to their chunk-calculation cost (key "default"
    applies to unlisted names); h_sync is the extra serialization cost
    charged per round to techniques that compute batches under a mutex.
    """

    h_assign: float = 0.0
    h_calc: dict = field(default_factory=dict)
    h_sync: float = 0.0

    def __post_init__(self):
        if self.h_assign < 0 or self.h_sync < 0:
            raise InvalidParameters("overhead costs must be non-negative")
        for name, value in self.h_calc.items():
            if value < 0:
                raise InvalidParameters(
                    f"overhead costs must be non-negative (h_calc[{name!r}])"
                )

    @classmethod
    def constant(cls, h: float) -> "OverheadModel":
        """A flat per-round cost, identical for every technique."""
        return cls(h_assign=h)

    @classmethod
    def from_dict(cls, doc: dict) -> "OverheadModel":
        h_calc = doc.get("h_calc", {})
        if isinstance(h_calc, (int, float)):
            h_calc = {"default": float(h_calc)}
        return cls(
            h_assign=float(doc.get("h_assign", 0.0)),
            h_calc={str(k): float(v) for k, v in h_calc.items()},
            h_sync=float(doc.get("h_sync", 0.0)),
        )

    def calc_cost(self, technique_name: str) -> float:
        return self.h_calc.get(technique_name,
                               self.h_calc.get("default", 0.0))

    def round_cost(self, technique_name: str,
                   batch_mutex: bool = False) -> float:
        return (
            self.h_assign
            + self.calc_cost(technique_name)
            + (self.h_sync if batch_mutex else 0.0)
        )


@dataclass
class SimReport:
    """Everything a simulated execution produced."""

    loop_id: str
    technique: str
    n: int
    p: int
    k: int
    time_steps: int
    makespan: float                    # sum of per-instance makespans
    thread_times: tuple[float, ...]    # per-worker time, summed over instances
    cov: float
    pi: float
    pi_defined: bool
    chunk_count: int                   # scheduling rounds o_sr
    o_cs: float                        # total chunk-calculation cost
    o_sync: float                      # total batch-mutex cost
    sched_total: float                 # total scheduling time charged
    instances: list[ImbalanceReport] = field(default_factory=list)
    stats: list[ThreadStats] = field(default_factory=list)
    chunks: list[list[Chunk]] | None = None

    @property
    def o_sr(self) -> int:
        return self.chunk_count

    def chunk_sizes(self, instance: int = 0) -> list[int]:
        if self.chunks is None:
            raise InvalidParameters("chunks were not collected for this run")
        return [c.size for c in self.chunks[instance]]

    def to_json_dict(self) -> dict:
        return {
            "loop_id": self.loop_id,
            "technique": self.technique,
            "n": self.n,
            "p": self.p,
            "k": self.k,
            "time_steps": self.time_steps,
            "makespan": self.makespan,
            "thread_times": list(self.thread_times),
            "cov": self.cov,
            "pi": self.pi,
            "pi_defined": self.pi_defined,
            "chunk_count": self.chunk_count,
            "o_sr": self.o_sr,
            "o_cs": self.o_cs,
            "o_sync": self.o_sync,
            "sched_total": self.sched_total,
        }


def resolve_profile(
    technique: Technique,
    context: ExecutionContext,
    costs: CostVector,
    overhead: OverheadModel,
    profile: WorkloadProfile | None,
) -> WorkloadProfile | None:
    """Pick the profile a technique will see.

    Explicit argument wins, then the context's profile; techniques that
    need one but got none are self-profiled from the cost vector's exact
    moments, with h taken from the overhead model's per-round cost.
    """
    if profile is not None:
        return profile
    if context.profile is not None:
        return context.profile
    if not technique.requires_profile:
        return None
    h = overhead.round_cost(technique.name, technique.uses_batch_mutex)
    return costs.profile(h=h)


def simulate(
    descriptor: LoopDescriptor,
    context: ExecutionContext,
    costs: CostVector,
    overhead: OverheadModel | None = None,
    *,
    profile: WorkloadProfile | None = None,
    technique: Technique | None = None,
    worker_speed=None,
    tracer: ChunkTracer | None = None,
    collect_chunks: bool = False,
) -> SimReport:
    """Run descriptor.time_steps instances of the loop serially.

    worker_speed, if given, is a callable (worker, chunk) -> factor that
    scales the chunk's busy time; it models heterogeneous or perturbed
    workers for adaptivity experiments. Without it, total busy time is
    checked against the cost vector's total each instance.
    """
    if len(costs) != descriptor.n:
        raise InvalidParameters(
            f"cost vector has {len(costs)} entries for n={descriptor.n}"
        )
    overhead = overhead if overhead is not None else OverheadModel()
    tech = technique if technique is not None else get_technique(context.technique)
    prof = resolve_profile(tech, context, costs, overhead, profile)

    p = context.p
    adaptive = AdaptiveState(p)
    all_chunks: list[list[Chunk]] | None = [] if collect_chunks else None
    instances: list[ImbalanceReport] = []
    stats_list: list[ThreadStats] = []
    totals = [0.0] * p
    makespan = 0.0
    chunk_count = 0
    sched_total = 0.0

    for step in range(descriptor.time_steps):
        scheduler = LoopScheduler(
            descriptor, context, technique=tech, profile=prof,
            adaptive=adaptive, step_index=step,
        )
        clock = [0.0] * p
        pending: list[tuple[Chunk, float, float] | None] = [None] * p
        heap = [(0.0, w) for w in range(p)]
        heapq.heapify(heap)
        collected: list[Chunk] | None = [] if collect_chunks else None

        while heap:
            t, w = heapq.heappop(heap)
            if pending[w] is not None:
                chunk, busy, d_sched = pending[w]
                pending[w] = None
                scheduler.complete_chunk(w, chunk, busy, d_sched)
            chunk = scheduler.next_chunk(w)
            if chunk is None:
                clock[w] = t  # final empty poll is not charged
                continue
            d_sched = overhead.round_cost(tech.name, tech.uses_batch_mutex)
            busy = costs.range_sum(chunk.start, chunk.stop)
            if worker_speed is not None:
                busy *= float(worker_speed(w, chunk))
            body_end = t + d_sched + busy
            pending[w] = (chunk, busy, d_sched)
            clock[w] = body_end
            sched_total += d_sched
            if collected is not None:
                collected.append(chunk)
            if tracer is not None:
                tracer.record(TraceRecord(
                    descriptor.loop_id, step, w, chunk.start, chunk.size,
                    t, t + d_sched, body_end,
                ))
            heapq.heappush(heap, (body_end, w))

        state = scheduler.state
        if state.remaining != 0:
            raise AssertionError(
                f"instance left {state.remaining} iterations unscheduled"
            )
        stats = scheduler.finish_instance()
        if worker_speed is None:
            total_busy = math.fsum(stats.busy_time)
            expect = costs.total()
            if not math.isclose(total_busy, expect, rel_tol=1e-9,
                                abs_tol=1e-9):
                raise AssertionError(
                    f"busy-time conservation broke: {total_busy} != {expect}"
                )
        instances.append(build_report(
            descriptor.loop_id, step, p, clock, state.rounds,
        ))
        stats_list.append(stats)
        if all_chunks is not None:
            all_chunks.append(collected)
        for w in range(p):
            totals[w] += clock[w]
        makespan += max(clock)
        chunk_count += state.rounds
        if tracer is not None:
            tracer.flush()

    aggregate = build_report(descriptor.loop_id, -1, p, totals, chunk_count)
    return SimReport(
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
        o_cs=chunk_count * overhead.calc_cost(tech.name),
        o_sync=chunk_count * (overhead.h_sync if tech.uses_batch_mutex else 0.0),
        sched_total=sched_total,
        instances=instances,
        stats=stats_list,
        chunks=all_chunks,
    )


@dataclass
class BestSelection:
    """Per-loop winners and whole-suite totals from a set of runs."""

    per_loop: dict[str, str]
    per_loop_makespan: dict[str, float]
    best_total: float
    technique_totals: dict[str, float]
    degradation_pct: dict[str, float]


def best_combination(reports) -> BestSelection:
    """Pick the fastest technique per loop and rank single techniques.

    Two runs of the same (loop, technique) keep the better makespan (a
    sweep over chunk parameters collapses to its best k). Suite totals
    and degradation percentages are computed only for techniques that
    cover every loop.
    """
    table: dict[str, dict[str, float]] = {}
    for rep in reports:
        row = table.setdefault(rep.loop_id, {})
        prev = row.get(rep.technique)
        if prev is None or rep.makespan < prev:
            row[rep.technique] = rep.makespan
    if not table:
        raise EmptyInput("best_combination needs at least one report")

    per_loop: dict[str, str] = {}
    per_loop_makespan: dict[str, float] = {}
    for loop_id in sorted(table):
        row = table[loop_id]
        winner = min(row, key=lambda tech: (row[tech], tech))
        per_loop[loop_id] = winner
        per_loop_makespan[loop_id] = row[winner]
    best_total = math.fsum(per_loop_makespan.values())

    covering = set.intersection(*(set(r) for r in table.values()))
    technique_totals = {
        tech: math.fsum(table[loop][tech] for loop in table)
        for tech in sorted(covering)
    }
    degradation = {
        tech: ((total - best_total) / best_total * 100.0 if best_total > 0
               else 0.0)
        for tech, total in technique_totals.items()
    }
    return BestSelection(
        per_loop=per_loop,
        per_loop_makespan=per_loop_makespan,
        best_total=best_total,
        technique_totals=technique_totals,
        degradation_pct=degradation,
    )
