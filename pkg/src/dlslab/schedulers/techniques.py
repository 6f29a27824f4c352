"""The chunk-calculation techniques.

Each class computes chunk sizes only; all counters live in SchedulerState.
Unless noted otherwise a grant follows the same pipeline: compute a raw
size, round up, lift to the chunk parameter, clamp to the remaining
iterations (apply_chunk_threshold), then reserve contiguously.

Profile-driven techniques (fsc, fac, mfac, tap, bold) read mu/sigma/h from
the WorkloadProfile attached to the state; adaptive ones (awf family, af,
maf) read and write AdaptiveState, which persists across loop instances.
"""

from __future__ import annotations

import math

from ..core import Chunk, ThreadWeights, apply_chunk_threshold
from ..errors import InvalidParameters
from .base import SchedulerState, awf_update_weights


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


class Technique:
    """Stateless chunk-size policy; subclasses override grant()."""

    name = "?"
    requires_profile = False
    # True only for fac: its batch computation is modeled as happening
    # under a dedicated mutex, which costs h_sync per round.
    uses_batch_mutex = False

    def init_state(self, state: SchedulerState) -> None:
        """One-time per-instance setup (init-time chunk sizes etc.)."""

    def grant(self, state: SchedulerState, thread: int) -> Chunk | None:
        raise NotImplementedError

    def on_complete(self, state: SchedulerState, thread: int, chunk: Chunk,
                    busy_time: float, sched_time: float) -> None:
        """Feedback hook, called after a chunk's iterations finished."""

    def on_instance_end(self, state: SchedulerState) -> None:
        """Hook run once when the instance has fully executed."""

    def __repr__(self) -> str:
        return f"<technique {self.name}>"


class Static(Technique):
    """One contiguous block of ceil(n/p) iterations per thread.

    Each thread receives its block on its first request and nothing
    after; the chunk parameter is ignored. Threads whose block starts
    past n (p > n) get no work.
    """

    name = "static"

    def init_state(self, state: SchedulerState) -> None:
        state.static_taken = [False] * state.p

    def grant(self, state: SchedulerState, thread: int) -> Chunk | None:
        if state.static_taken[thread]:
            return None
        state.static_taken[thread] = True
        block = _ceil_div(state.n, state.p)
        start = thread * block
        stop = min(start + block, state.n)
        if start >= stop:
            return None
        size = stop - start
        state.scheduled += size
        state.remaining -= size
        return Chunk(start, size, thread)


class SS(Technique):
    """Self-scheduling: every request gets exactly k iterations."""

    name = "ss"

    def grant(self, state: SchedulerState, thread: int) -> Chunk | None:
        size = apply_chunk_threshold(state.k, state.remaining, state.k)
        return state.take_contiguous(size, thread)


class GSS(Technique):
    """Guided self-scheduling: ceil(remaining / p) per request."""

    name = "gss"

    def grant(self, state: SchedulerState, thread: int) -> Chunk | None:
        raw = _ceil_div(state.remaining, state.p)
        size = apply_chunk_threshold(raw, state.remaining, state.k)
        return state.take_contiguous(size, thread)


class TSS(Technique):
    """Trapezoid self-scheduling: linear decrement from f to l.

    f = ceil(n / 2p), l = k, over C = ceil(2n / (f + l)) chunks with a
    constant decrement delta = (f - l) / (C - 1). Sizes are floored and
    lifted by the threshold rule.
    """

    name = "tss"

    def init_state(self, state: SchedulerState) -> None:
        first = max(_ceil_div(state.n, 2 * state.p), state.k)
        last = state.k
        count = _ceil_div(2 * state.n, first + last)
        state.tss_chunk = float(first)
        state.tss_last = last
        state.tss_delta = (
            (first - last) / (count - 1) if count > 1 else 0.0
        )

    def grant(self, state: SchedulerState, thread: int) -> Chunk | None:
        raw = math.floor(state.tss_chunk)
        size = apply_chunk_threshold(raw, state.remaining, state.k)
        state.tss_chunk = max(state.tss_chunk - state.tss_delta,
                              float(state.tss_last))
        return state.take_contiguous(size, thread)


class FSC(Technique):
    """Fixed-size chunking: one profile-derived size for the whole loop.

    s = ceil(((sqrt(2) n h) / (sigma p sqrt(log2 p)))^(2/3)); with
    sigma = 0 or p = 1 the expression degenerates and the size falls
    back to ceil(n / p). h = 0 yields 0 and the threshold lifts it to k.
    """

    name = "fsc"
    requires_profile = True

    def init_state(self, state: SchedulerState) -> None:
        prof = state.profile
        if prof.sigma == 0 or state.p == 1:
            state.fixed_chunk = _ceil_div(state.n, state.p)
            return
        ratio = (math.sqrt(2.0) * state.n * prof.h) / (
            prof.sigma * state.p * math.sqrt(math.log2(state.p))
        )
        state.fixed_chunk = math.ceil(ratio ** (2.0 / 3.0))

    def grant(self, state: SchedulerState, thread: int) -> Chunk | None:
        size = apply_chunk_threshold(state.fixed_chunk, state.remaining,
                                     state.k)
        return state.take_contiguous(size, thread)


class BatchedTechnique(Technique):
    """Shared budget bookkeeping for batch-oriented techniques.

    A batch is opened lazily when the previous budget is spent; p equal
    shares (weighted for wf2/awf) are handed out against the budget, and
    threshold lifting may overdraw it, which simply closes the batch
    early. Outstanding-chunk counters let subclasses detect the moment a
    batch has fully executed.
    """

    def batch_chunk(self, state: SchedulerState) -> int:
        """Per-thread chunk size for the batch about to open."""
        raise NotImplementedError

    def weight_for(self, state: SchedulerState, thread: int) -> float | None:
        """Per-thread weight, or None for equal shares."""
        return None

    def grant(self, state: SchedulerState, thread: int) -> Chunk | None:
        if state.batch_remaining <= 0:
            state.open_batch(max(self.batch_chunk(state), 1))
        weight = self.weight_for(state, thread)
        if weight is None:
            raw = state.batch_chunk
        else:
            raw = math.ceil(state.batch_chunk * weight)
        raw = min(raw, state.batch_remaining)
        size = apply_chunk_threshold(raw, state.remaining, state.k)
        state.batch_remaining = max(0, state.batch_remaining - size)
        batch = state.batch_index
        state.batch_outstanding[batch] = (
            state.batch_outstanding.get(batch, 0) + 1
        )
        return state.take_contiguous(size, thread, batch)

    def on_complete(self, state: SchedulerState, thread: int, chunk: Chunk,
                    busy_time: float, sched_time: float) -> None:
        batch = chunk.batch
        left = state.batch_outstanding.get(batch, 1) - 1
        if left <= 0 and state.batch_closed(batch):
            state.batch_outstanding.pop(batch, None)
            self.on_batch_drained(state, batch)
        else:
            state.batch_outstanding[batch] = left

    def on_batch_drained(self, state: SchedulerState, batch: int) -> None:
        """Called when every chunk of a closed batch has completed."""


class FAC(BatchedTechnique):
    """Factoring with the probabilistic batch rule.

    At each batch start over R remaining iterations:
        b = (p / (2 sqrt(R))) * (sigma / mu)
        x = 1 + b^2 + b sqrt(b^2 + 2)
        batch chunk = ceil(R / (x p))
    and p such chunks form the batch.
    """

    name = "fac"
    requires_profile = True
    uses_batch_mutex = True

    def batch_chunk(self, state: SchedulerState) -> int:
        prof = state.profile
        remaining = state.remaining
        b = (state.p / (2.0 * math.sqrt(remaining))) * (prof.sigma / prof.mu)
        x = 1.0 + b * b + b * math.sqrt(b * b + 2.0)
        return math.ceil(remaining / (x * state.p))


class MFAC(FAC):
    """fac with lock-free counter updates: same sizes, no batch mutex."""

    name = "mfac"
    uses_batch_mutex = False


class FAC2(BatchedTechnique):
    """Parameter-free factoring: batch j grants chunks of ceil(n / (2^(j+1) p))."""

    name = "fac2"

    def batch_chunk(self, state: SchedulerState) -> int:
        j = state.batch_index + 1  # 0-based index of the batch being opened
        return _ceil_div(state.n, (1 << (j + 1)) * state.p)


class TAP(Technique):
    """Processor-aware trapezoid variant of self-scheduling.

    With v = alpha * sigma / mu the chunk over R remaining iterations is
    ceil(R/p + v^2/2 - v sqrt(2R/p + v^2/4)). alpha defaults to 1.3.
    """

    name = "tap"
    requires_profile = True

    def __init__(self, alpha: float = 1.3):
        if not alpha > 0:
            raise InvalidParameters(f"tap alpha must be > 0, got {alpha}")
        self.alpha = alpha

    def grant(self, state: SchedulerState, thread: int) -> Chunk | None:
        prof = state.profile
        v = self.alpha * prof.sigma / prof.mu
        share = state.remaining / state.p
        raw = math.ceil(
            share + v * v / 2.0 - v * math.sqrt(2.0 * share + v * v / 4.0)
        )
        size = apply_chunk_threshold(max(raw, 0), state.remaining, state.k)
        return state.take_contiguous(size, thread)


class WF2(BatchedTechnique):
    """Weighted factoring: fac2 batches scaled by fixed per-thread weights."""

    name = "wf2"

    def batch_chunk(self, state: SchedulerState) -> int:
        j = state.batch_index + 1
        return _ceil_div(state.n, (1 << (j + 1)) * state.p)

    def weight_for(self, state: SchedulerState, thread: int) -> float:
        return state.weights[thread]


class BOLD(Technique):
    """Overhead-aware variant of guided scheduling.

    Grants ceil((R/p) * (1 + theta * R/n)) where the boost
    theta = min(1, ln(1 + n h / (p mu (1 + (sigma/mu)^2 ln(max(p, 2))))))
    is fixed at instance start. h = 0 gives theta = 0 and the sequence
    reduces to ceil(R/p); h > 0 starts above it. Sizes are non-increasing
    because the raw expression grows with R.
    """

    name = "bold"
    requires_profile = True

    def init_state(self, state: SchedulerState) -> None:
        prof = state.profile
        if prof.h <= 0:
            state.bold_theta = 0.0
            return
        cv2 = (prof.sigma / prof.mu) ** 2
        denom = state.p * prof.mu * (1.0 + cv2 * math.log(max(state.p, 2)))
        state.bold_theta = min(1.0, math.log1p(state.n * prof.h / denom))

    def grant(self, state: SchedulerState, thread: int) -> Chunk | None:
        remaining = state.remaining
        if state.bold_theta == 0.0:
            raw = _ceil_div(remaining, state.p)
        else:
            raw = math.ceil(
                (remaining / state.p)
                * (1.0 + state.bold_theta * remaining / state.n)
            )
        size = apply_chunk_threshold(raw, remaining, state.k)
        return state.take_contiguous(size, thread)


class AWF(BatchedTechnique):
    """Adaptive weighted factoring family.

    Batches follow the fac2 rule; per-thread shares are scaled by learned
    weights that start uniform and persist across instances. Variants
    differ in when weights refresh and which time base feeds the rates:

        awf    end of instance, busy time
        awf-b  end of batch,    busy time
        awf-c  end of chunk,    busy time
        awf-d  end of chunk,    busy + scheduling time
        awf-e  end of batch,    busy + scheduling time
    """

    name = "awf"
    variant = "awf"

    def batch_chunk(self, state: SchedulerState) -> int:
        j = state.batch_index + 1
        return _ceil_div(state.n, (1 << (j + 1)) * state.p)

    def weight_for(self, state: SchedulerState, thread: int) -> float:
        return state.adaptive.weights[thread]

    def _refresh(self, state: SchedulerState) -> None:
        adaptive = state.adaptive
        updated = awf_update_weights(
            state.stats, self.variant, ThreadWeights(adaptive.weights)
        )
        adaptive.weights = list(updated)

    def on_complete(self, state: SchedulerState, thread: int, chunk: Chunk,
                    busy_time: float, sched_time: float) -> None:
        super().on_complete(state, thread, chunk, busy_time, sched_time)
        if self.variant in ("c", "d"):
            self._refresh(state)

    def on_batch_drained(self, state: SchedulerState, batch: int) -> None:
        if self.variant in ("b", "e"):
            self._refresh(state)

    def on_instance_end(self, state: SchedulerState) -> None:
        if self.variant == "awf":
            self._refresh(state)


class AWFB(AWF):
    name = "awf-b"
    variant = "b"


class AWFC(AWF):
    name = "awf-c"
    variant = "c"


class AWFD(AWF):
    name = "awf-d"
    variant = "d"


class AWFE(AWF):
    name = "awf-e"
    variant = "e"


class AF(Technique):
    """Adaptive factoring from online per-thread mean/stddev estimates.

    The closed form needs an estimate for every thread, so requests are
    answered with warm-up chunks of exactly min(10, remaining), bypassing
    the threshold, until each of the p threads has at least one timing
    sample. Afterwards, with D = sum_t sigma_t^2 / mu_t and
    E = 1 / sum_t (1 / mu_t) over all threads, thread t receives
    ceil((D + 2 E R - sqrt(D^2 + 4 D E R)) / (2 mu_t)).
    Estimates persist across instances; one sample is the chunk's busy
    time divided by its size.
    """

    name = "af"
    include_sched_in_sample = False
    WARMUP = 10

    def grant(self, state: SchedulerState, thread: int) -> Chunk | None:
        adaptive = state.adaptive
        if any(count == 0 for count in adaptive.af_count):
            size = min(self.WARMUP, state.remaining)
            return state.take_contiguous(size, thread)
        big_d = 0.0
        inv_sum = 0.0
        for t in range(state.p):
            mu_t = adaptive.af_mean[t]
            big_d += (adaptive.af_m2[t] / adaptive.af_count[t]) / mu_t
            inv_sum += 1.0 / mu_t
        big_e = 1.0 / inv_sum
        rem = float(state.remaining)
        raw = (
            big_d + 2.0 * big_e * rem
            - math.sqrt(big_d * big_d + 4.0 * big_d * big_e * rem)
        ) / (2.0 * adaptive.af_mean[thread])
        size = apply_chunk_threshold(math.ceil(raw), state.remaining, state.k)
        return state.take_contiguous(size, thread)

    def on_complete(self, state: SchedulerState, thread: int, chunk: Chunk,
                    busy_time: float, sched_time: float) -> None:
        sample = busy_time
        if self.include_sched_in_sample:
            sample += sched_time
        state.adaptive.observe_iteration_time(thread, sample / chunk.size)


class MAF(AF):
    """af with scheduling overhead folded into each timing sample."""

    name = "maf"
    include_sched_in_sample = True
