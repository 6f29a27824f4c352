"""Synthetic workloads: per-iteration cost vectors and a busy kernel.

Costs are abstract FLOP counts per iteration, drawn from one of five
distribution families with optional clipping by resampling. Generation is
deterministic per (spec.seed): streams come from PCG64 seeded through
SeedSequence, so any loop's vector can be regenerated independently.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .core import LoopDescriptor, WorkloadProfile
from .errors import InvalidParameters

KINDS = ("constant", "uniform", "normal", "exponential", "gamma")

PARAM_KEYS = {
    "constant": ("value",),
    "uniform": ("low", "high"),
    "normal": ("mu", "sigma"),
    "exponential": ("scale",),
    "gamma": ("shape", "scale"),
}

# Default parameterizations, one loop per family. Costs are FLOPs per
# iteration; clip bounds keep the heavy tails within a workable range.
_DEFAULTS = {
    "constant": ({"value": 2.3e8}, None),
    "uniform": ({"low": 1.0e3, "high": 7.0e8}, None),
    "normal": ({"mu": 9.5e8, "sigma": 7.0e7}, (6.0e8, 1.3e9)),
    "exponential": ({"scale": 3.0e8}, (948.0, 4.5e9)),
    "gamma": ({"shape": 2.0, "scale": 1.0e8}, (4.1e6, 2.7e9)),
}

_RESAMPLE_ATTEMPTS = 1000


@dataclass(frozen=True)
class DistributionSpec:
    """A reproducible recipe for one loop's cost vector."""

    kind: str
    params: dict = field(default_factory=dict)
    clip: tuple[float, float] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameters(
                f"unknown distribution kind {self.kind!r}; "
                f"valid kinds: {', '.join(KINDS)}"
            )
        keys = PARAM_KEYS[self.kind]
        missing = [k for k in keys if k not in self.params]
        extra = [k for k in self.params if k not in keys]
        if missing or extra:
            raise InvalidParameters(
                f"{self.kind} takes params {keys}; "
                f"missing {missing}, unexpected {extra}"
            )
        vals = {k: float(self.params[k]) for k in keys}
        if self.kind == "constant" and not vals["value"] > 0:
            raise InvalidParameters("constant value must be > 0")
        if self.kind == "uniform" and not 0 <= vals["low"] < vals["high"]:
            raise InvalidParameters("uniform needs 0 <= low < high")
        if self.kind == "normal":
            if not vals["mu"] > 0 or vals["sigma"] < 0:
                raise InvalidParameters("normal needs mu > 0 and sigma >= 0")
        if self.kind == "exponential" and not vals["scale"] > 0:
            raise InvalidParameters("exponential scale must be > 0")
        if self.kind == "gamma":
            if not vals["shape"] > 0 or not vals["scale"] > 0:
                raise InvalidParameters("gamma needs shape > 0 and scale > 0")
        if self.clip is not None:
            lo, hi = self.clip
            if not 0 <= lo < hi:
                raise InvalidParameters(f"bad clip range [{lo}, {hi}]")
        if self.seed < 0:
            raise InvalidParameters("seed must be non-negative")

    @classmethod
    def default(cls, kind: str, seed: int = 0) -> "DistributionSpec":
        if kind not in _DEFAULTS:
            raise InvalidParameters(f"unknown distribution kind {kind!r}")
        params, clip = _DEFAULTS[kind]
        return cls(kind=kind, params=dict(params), clip=clip, seed=seed)

    @classmethod
    def from_dict(cls, doc: dict, default_seed: int = 0) -> "DistributionSpec":
        """Build from a config mapping: kind, inline params, clip, seed."""
        if "kind" not in doc:
            raise InvalidParameters("distribution needs a 'kind' key")
        kind = doc["kind"]
        if kind not in KINDS:
            raise InvalidParameters(
                f"unknown distribution kind {kind!r}; "
                f"valid kinds: {', '.join(KINDS)}"
            )
        params = {k: doc[k] for k in PARAM_KEYS[kind] if k in doc}
        if not params and kind in _DEFAULTS:
            params = dict(_DEFAULTS[kind][0])
        clip = doc.get("clip", "default")
        if clip == "default":
            clip = _DEFAULTS[kind][1]
        elif clip is not None:
            clip = (float(clip[0]), float(clip[1]))
        return cls(kind=kind, params=params, clip=clip,
                   seed=int(doc.get("seed", default_seed)))

    def to_json_dict(self) -> dict:
        out = {"kind": self.kind, "seed": self.seed, **self.params}
        out["clip"] = list(self.clip) if self.clip else None
        return out


class CostVector:
    """Per-iteration costs with O(1) contiguous range sums.

    Prefix sums are plain Python floats so every consumer (simulator and
    runtime alike) computes identical busy times for identical ranges.
    Constant vectors skip materialization entirely.
    """

    __slots__ = ("_n", "_value", "_values", "_cum", "kind")

    def __init__(self, values, kind: str = "data"):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise InvalidParameters("cost vector must be non-empty and 1-D")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise InvalidParameters("costs must be finite and non-negative")
        self._n = int(arr.size)
        self._value = None
        self._values = arr
        self._cum = None
        self.kind = kind

    @classmethod
    def constant(cls, n: int, value: float,
                 kind: str = "constant") -> "CostVector":
        if n < 1:
            raise InvalidParameters(f"n must be >= 1, got {n}")
        value = float(value)
        if not (value >= 0 and math.isfinite(value)):
            raise InvalidParameters("costs must be finite and non-negative")
        self = cls.__new__(cls)
        self._n = int(n)
        self._value = value
        self._values = None
        self._cum = None
        self.kind = kind
        return self

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, i: int) -> float:
        if not 0 <= i < self._n:
            raise IndexError(i)
        if self._value is not None:
            return self._value
        return float(self._values[i])

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = np.full(self._n, self._value)
        return self._values

    def range_sum(self, start: int, stop: int) -> float:
        """Total cost of iterations [start, stop)."""
        if not 0 <= start <= stop <= self._n:
            raise InvalidParameters(f"bad range [{start}, {stop})")
        if self._value is not None:
            return (stop - start) * self._value
        if self._cum is None:
            self._cum = np.concatenate(
                ([0.0], np.cumsum(self._values))
            ).tolist()
        return self._cum[stop] - self._cum[start]

    def total(self) -> float:
        return self.range_sum(0, self._n)

    def mean(self) -> float:
        if self._value is not None:
            return self._value
        return float(np.mean(self._values))

    def pstd(self) -> float:
        if self._value is not None:
            return 0.0
        std = float(np.std(self._values))
        # np.std of constant data leaves ~1e-17 of summation noise; snap
        # that to an exact zero so sigma=0 code paths actually trigger
        if std <= abs(float(np.mean(self._values))) * 1e-12:
            return 0.0
        return std

    def profile(self, h: float = 0.0) -> WorkloadProfile:
        """Derive mu/sigma from the vector itself (oracle profiling)."""
        mu = self.mean()
        if not mu > 0:
            raise InvalidParameters(
                "cost vector mean must be positive to derive a profile"
            )
        return WorkloadProfile(mu=mu, sigma=self.pstd(), h=h)


def _draw(rng: np.random.Generator, kind: str, params: dict,
          count: int) -> np.ndarray:
    if kind == "uniform":
        return rng.uniform(params["low"], params["high"], count)
    if kind == "normal":
        return rng.normal(params["mu"], params["sigma"], count)
    if kind == "exponential":
        return rng.exponential(params["scale"], count)
    if kind == "gamma":
        return rng.gamma(params["shape"], params["scale"], count)
    raise InvalidParameters(f"unknown distribution kind {kind!r}")


def generate_costs(spec: DistributionSpec, n: int) -> CostVector:
    """Draw an n-iteration cost vector; out-of-clip draws are resampled."""
    if n < 1:
        raise InvalidParameters(f"n must be >= 1, got {n}")
    if spec.kind == "constant":
        return CostVector.constant(n, spec.params["value"])
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(spec.seed)))
    parts: list[np.ndarray] = []
    have = 0
    for _ in range(_RESAMPLE_ATTEMPTS):
        if have >= n:
            break
        draw = _draw(rng, spec.kind, spec.params, n - have)
        if spec.clip is not None:
            lo, hi = spec.clip
            draw = draw[(draw >= lo) & (draw <= hi)]
        if draw.size:
            parts.append(draw)
            have += draw.size
    if have < n:
        raise InvalidParameters(
            f"clip range {spec.clip} rejects nearly all {spec.kind} draws"
        )
    return CostVector(np.concatenate(parts)[:n], kind=spec.kind)


def dist_suite(seed: int = 0, n: int = 1000) -> list[tuple[LoopDescriptor, DistributionSpec]]:
    """The five-loop benchmark set, one loop per distribution family.

    Loop i draws from an independent stream seeded by SeedSequence([seed, i]).
    """
    out = []
    for i, kind in enumerate(KINDS):
        child = int(np.random.SeedSequence([seed, i]).generate_state(1, np.uint64)[0])
        spec = DistributionSpec.default(kind, seed=child)
        out.append((LoopDescriptor(loop_id=kind, n=n), spec))
    return out


# --- busy kernel -----------------------------------------------------------

_BLOCK = 256  # elements per vector op; one pass = 2 * _BLOCK flops
_local = threading.local()
_calibrated: list[float] = []


def _burn(ops: int) -> None:
    """Execute about `ops` floating-point operations."""
    buf = getattr(_local, "buf", None)
    if buf is None:
        buf = _local.buf = np.full(_BLOCK, 1.0000001)
    if buf[0] > 1e9:  # keep values finite across long runs
        buf[:] = 1.0000001
    for _ in range(max(1, ops // (2 * _BLOCK))):
        np.multiply(buf, 1.0000001, out=buf)
        np.add(buf, 1e-9, out=buf)


def calibrate_flops(force: bool = False) -> float:
    """Measure this host's busy-kernel rate in FLOPs per second.

    Run once and cached; the constant converts cost values into expected
    wall time for live runs.
    """
    if _calibrated and not force:
        return _calibrated[0]
    _burn(1_000_000)  # warm up buffers and caches
    ops = 20_000_000
    best = math.inf
    for _ in range(3):
        t0 = time.perf_counter()
        _burn(ops)
        best = min(best, time.perf_counter() - t0)
    rate = ops / best
    _calibrated.clear()
    _calibrated.append(rate)
    return rate


class FlopKernel:
    """Loop body that burns costs[i] * scale floating-point operations.

    scale shrinks desk-scale experiments to tractable wall time; the
    calibrated rate predicts seconds per iteration for reporting.
    """

    def __init__(self, costs: CostVector, scale: float = 1.0,
                 flops_per_second: float | None = None):
        if not scale > 0:
            raise InvalidParameters(f"scale must be > 0, got {scale}")
        self.costs = costs
        self.scale = scale
        self.flops_per_second = (
            flops_per_second if flops_per_second else calibrate_flops()
        )

    def expected_seconds(self, i: int) -> float:
        return self.costs[i] * self.scale / self.flops_per_second

    def __call__(self, i: int) -> None:
        _burn(int(self.costs[i] * self.scale))
