"""Instrumentation: chunk traces, per-thread loop times, saved profiles.

Trace timestamps are perf_counter_ns integers for live runs and abstract
simulated-time floats for virtual runs; within one stream they share a
clock, so deltas and per-thread orderings are always meaningful.
"""

from __future__ import annotations

import json
import math
import os
import re
import statistics
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

from .core import ExecutionContext, LoopDescriptor, WorkloadProfile
from .errors import InvalidParameters, SinkUnwritable

TRACE_FIELDS = (
    "loop_id", "instance", "thread", "chunk_start", "chunk_size",
    "t_sched_begin", "t_body_begin", "t_body_end",
)


@dataclass(frozen=True, slots=True)
class TraceRecord:
    """One granted chunk: who ran it, where, and the round's timestamps."""

    loop_id: str
    instance: int
    thread: int
    chunk_start: int
    chunk_size: int
    t_sched_begin: float
    t_body_begin: float
    t_body_end: float

    def to_json_dict(self) -> dict:
        return {f: getattr(self, f) for f in TRACE_FIELDS}


def _probe_sink(path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8"):
            pass
    except OSError as exc:
        raise SinkUnwritable(f"cannot write to sink {path}: {exc}") from exc


class ChunkTracer:
    """Collects TraceRecords via per-thread buffers.

    Workers append to their own buffer without coordination; flush() runs
    at quiescence, merges buffers in thread order, and appends NDJSON
    lines to the sink if one is set. Ordering is preserved within a
    thread only.
    """

    def __init__(self, sink: str | os.PathLike | None = None):
        self.sink = Path(sink) if sink is not None else None
        if self.sink is not None:
            _probe_sink(self.sink)
        self.records: list[TraceRecord] = []
        self._buffers: dict[int, list[TraceRecord]] = {}
        self._written = 0

    def buffer(self, thread: int) -> list[TraceRecord]:
        """The append-only buffer owned by one worker thread."""
        return self._buffers.setdefault(thread, [])

    def record(self, rec: TraceRecord) -> None:
        """Append directly (serial producers such as the simulator)."""
        self.records.append(rec)

    def flush(self) -> None:
        for t in sorted(self._buffers):
            self.records.extend(self._buffers[t])
        self._buffers.clear()
        if self.sink is not None and self._written < len(self.records):
            with open(self.sink, "a", encoding="utf-8") as fh:
                for rec in self.records[self._written:]:
                    fh.write(json.dumps(rec.to_json_dict(),
                                        sort_keys=True) + "\n")
            self._written = len(self.records)


def trace_chunks(enabled: bool, sink=None) -> ChunkTracer | None:
    """Build a ChunkTracer, or None when tracing is off."""
    return ChunkTracer(sink) if enabled else None


@dataclass(frozen=True, slots=True)
class LoopTimeRow:
    loop_id: str
    instance: int
    thread: int
    time: float

    def to_json_dict(self) -> dict:
        return {"loop_id": self.loop_id, "instance": self.instance,
                "thread": self.thread, "time": self.time}


class LoopTimesRecorder:
    """Per-thread finishing times for each executed instance."""

    def __init__(self, sink: str | os.PathLike | None = None):
        self.sink = Path(sink) if sink is not None else None
        if self.sink is not None:
            _probe_sink(self.sink)
        self.rows: list[LoopTimeRow] = []
        self._written = 0

    def record_instance(self, loop_id: str, instance: int,
                        thread_times) -> None:
        for t, value in enumerate(thread_times):
            self.rows.append(LoopTimeRow(loop_id, instance, t, float(value)))

    def flush(self) -> None:
        if self.sink is not None and self._written < len(self.rows):
            with open(self.sink, "a", encoding="utf-8") as fh:
                for row in self.rows[self._written:]:
                    fh.write(json.dumps(row.to_json_dict(),
                                        sort_keys=True) + "\n")
            self._written = len(self.rows)


def record_loop_times(enabled: bool, sink=None) -> LoopTimesRecorder | None:
    return LoopTimesRecorder(sink) if enabled else None


def read_trace(path) -> list[TraceRecord]:
    """Parse an NDJSON trace file back into records.

    Captured streams interleave status lines with the JSON (a redirected
    DLSLAB_PRINT_CHUNKS run ends with a human summary), so anything that
    is not a chunk record is skipped rather than treated as corruption.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError:
                continue
            if not isinstance(doc, dict) or not all(f in doc
                                                    for f in TRACE_FIELDS):
                continue
            out.append(TraceRecord(**{f: doc[f] for f in TRACE_FIELDS}))
    return out


def trace_to_csv(records, path) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_FIELDS)
        for rec in records:
            writer.writerow([getattr(rec, f) for f in TRACE_FIELDS])


def times_to_csv(rows, path) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("loop_id", "instance", "thread", "time"))
        for row in rows:
            writer.writerow((row.loop_id, row.instance, row.thread, row.time))


# --- workload profiles ------------------------------------------------------

_SLUG = re.compile(r"[^A-Za-z0-9_.-]+")


class ProfileStore:
    """One JSON file per (loop_id, n) holding mu/sigma/h bit-exactly."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path_for(self, loop_id: str, n: int) -> Path:
        slug = _SLUG.sub("-", loop_id) or "loop"
        return self.root / f"{slug}__n{n}.json"

    def save(self, loop_id: str, n: int, profile: WorkloadProfile) -> Path:
        path = self.path_for(loop_id, n)
        doc = {"loop_id": loop_id, "n": n, "mu": profile.mu,
               "sigma": profile.sigma, "h": profile.h}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
        return path

    def load(self, loop_id: str, n: int) -> WorkloadProfile | None:
        path = self.path_for(loop_id, n)
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        return WorkloadProfile(mu=doc["mu"], sigma=doc["sigma"], h=doc["h"])


def _timer_cost_seconds(samples: int = 256) -> float:
    deltas = []
    for _ in range(samples):
        a = time.perf_counter_ns()
        b = time.perf_counter_ns()
        deltas.append((b - a) / 1e9)
    return statistics.median(deltas)


def profile_loop(descriptor: LoopDescriptor, body=None, costs=None, *,
                 store: ProfileStore | None = None,
                 h_rounds: int = 64) -> WorkloadProfile:
    """Measure a loop's mu/sigma/h single-threaded.

    With a cost vector the moments come from the vector itself and h is 0
    (no live rounds happen). With a callable body every iteration is timed
    with perf_counter_ns and h is the median cost of one scheduling round
    (next_chunk + complete_chunk) on a minimal chunk-by-chunk scheduler.
    Warns when timer overhead exceeds 5% of the measured mean.
    """
    if (body is None) == (costs is None):
        raise InvalidParameters("pass exactly one of body or costs")
    if costs is not None:
        profile = costs.profile(h=0.0)
    else:
        times = []
        for i in range(descriptor.n):
            t0 = time.perf_counter_ns()
            body(i)
            t1 = time.perf_counter_ns()
            times.append((t1 - t0) / 1e9)
        mu = math.fsum(times) / len(times)
        var = math.fsum((t - mu) ** 2 for t in times) / len(times)
        timer_cost = _timer_cost_seconds()
        if mu > 0 and timer_cost > 0.05 * mu:
            warnings.warn(
                f"timer cost ({timer_cost:.2e}s) exceeds 5% of the mean "
                f"iteration time ({mu:.2e}s); profile may be inflated",
                stacklevel=2,
            )
        if mu <= 0:  # body faster than timer resolution
            mu = 1e-9
        # h: median duration of an empty-bodied scheduling round
        from .schedulers import LoopScheduler

        probe = LoopScheduler(
            LoopDescriptor("h-probe", h_rounds),
            ExecutionContext(p=1, technique="ss", chunk_param=1),
        )
        deltas = []
        for _ in range(h_rounds):
            t0 = time.perf_counter_ns()
            chunk = probe.next_chunk(0)
            if chunk is not None:
                probe.complete_chunk(0, chunk, 0.0, 0.0)
            t1 = time.perf_counter_ns()
            deltas.append((t1 - t0) / 1e9)
        profile = WorkloadProfile(mu=mu, sigma=math.sqrt(var),
                                  h=statistics.median(deltas))
    if store is not None:
        store.save(descriptor.loop_id, descriptor.n, profile)
    return profile


# --- environment knobs ------------------------------------------------------

ENV_TIME_LOOPS = "DLSLAB_TIME_LOOPS"
ENV_PRINT_CHUNKS = "DLSLAB_PRINT_CHUNKS"
ENV_PROFILE_DATA = "DLSLAB_PROFILE_DATA"
ENV_SCHEDULE = "DLSLAB_SCHEDULE"

_TRUTHY = ("1", "true", "yes", "on")


@dataclass(frozen=True, slots=True)
class EnvSettings:
    """Runtime behavior toggles read from the environment."""

    time_loops: str | None = None       # sink path for loop-times NDJSON
    print_chunks: bool = False          # enable chunk tracing
    profile_dir: str | None = None      # ProfileStore root for auto-load
    schedule: tuple[str, int | None] | None = None  # (technique, k)


def parse_schedule(text: str) -> tuple[str, int | None]:
    """Parse 'technique' or 'technique,chunk_param'."""
    from .schedulers import normalize_technique

    head, _, tail = text.partition(",")
    technique = normalize_technique(head)
    if not tail:
        return technique, None
    try:
        k = int(tail)
    except ValueError:
        raise InvalidParameters(
            f"bad chunk_param {tail!r} in schedule {text!r}"
        ) from None
    if k < 1:
        raise InvalidParameters(f"chunk_param must be >= 1, got {k}")
    return technique, k


def env_settings(environ=None) -> EnvSettings:
    env = os.environ if environ is None else environ
    schedule_text = env.get(ENV_SCHEDULE)
    return EnvSettings(
        time_loops=env.get(ENV_TIME_LOOPS) or None,
        print_chunks=str(env.get(ENV_PRINT_CHUNKS, "")).lower() in _TRUTHY,
        profile_dir=env.get(ENV_PROFILE_DATA) or None,
        schedule=parse_schedule(schedule_text) if schedule_text else None,
    )
