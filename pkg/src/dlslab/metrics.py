"""Load-imbalance metrics over per-thread finishing times."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EmptyInput, InvalidParameters, ZeroMean


def compute_cov(thread_times) -> float:
    """Coefficient of variation: population stddev over mean.

    Raises ZeroMean when the mean is not positive; a single value has
    cov 0 by convention.
    """
    times = [float(t) for t in thread_times]
    if not times:
        raise EmptyInput("cov needs at least one thread time")
    if any(t < 0 for t in times):
        raise InvalidParameters("thread times must be non-negative")
    mean = math.fsum(times) / len(times)
    if mean <= 0:
        raise ZeroMean(f"mean thread time is {mean}, cov undefined")
    if len(times) == 1:
        return 0.0
    var = math.fsum((t - mean) ** 2 for t in times) / len(times)
    return math.sqrt(var) / mean


def compute_pi(thread_times, p: int | None = None) -> float:
    """Percent imbalance: (T_par - mean) / T_par * p / (p - 1) * 100.

    T_par is the slowest thread's time. Exactly 0.0 when all times are
    equal (perfect balance); 0.0 for p < 2, where the ratio p/(p-1) is
    undefined (callers that need to distinguish this case should check
    p themselves, see ImbalanceReport.pi_defined).
    """
    times = [float(t) for t in thread_times]
    if not times:
        raise EmptyInput("percent imbalance needs at least one thread time")
    if any(t < 0 for t in times):
        raise InvalidParameters("thread times must be non-negative")
    if p is None:
        p = len(times)
    if p != len(times):
        raise InvalidParameters(
            f"got {len(times)} thread times for p={p}"
        )
    if p < 2:
        return 0.0
    t_par = max(times)
    if t_par == min(times):
        return 0.0
    mean = math.fsum(times) / p
    return (t_par - mean) / t_par * (p / (p - 1)) * 100.0


@dataclass(frozen=True, slots=True)
class ImbalanceReport:
    """Imbalance summary for one executed loop instance (or aggregate)."""

    loop_id: str
    instance: int
    p: int
    thread_times: tuple[float, ...]
    t_par: float
    cov: float
    pi: float
    pi_defined: bool
    chunk_count: int

    @property
    def makespan(self) -> float:
        return self.t_par

    def to_json_dict(self) -> dict:
        return {
            "loop_id": self.loop_id,
            "instance": self.instance,
            "p": self.p,
            "thread_times": list(self.thread_times),
            "t_par": self.t_par,
            "cov": self.cov,
            "pi": self.pi,
            "pi_defined": self.pi_defined,
            "chunk_count": self.chunk_count,
        }


def build_report(loop_id: str, instance: int, p: int, thread_times,
                 chunk_count: int) -> ImbalanceReport:
    """Assemble an ImbalanceReport, tolerating degenerate time vectors.

    A run where no time accrued (all zeros) reports cov = pi = 0 rather
    than raising, so aborted or trivial instances still summarize.
    """
    times = tuple(float(t) for t in thread_times)
    if len(times) != p:
        raise InvalidParameters(f"got {len(times)} thread times for p={p}")
    t_par = max(times) if times else 0.0
    mean = math.fsum(times) / len(times) if times else 0.0
    if mean <= 0:
        cov = 0.0
        pi = 0.0
    else:
        cov = compute_cov(times)
        pi = compute_pi(times, p)
    return ImbalanceReport(
        loop_id=loop_id,
        instance=instance,
        p=p,
        thread_times=times,
        t_par=t_par,
        cov=cov,
        pi=pi,
        pi_defined=p >= 2,
        chunk_count=chunk_count,
    )
