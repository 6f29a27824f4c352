"""dlslab: a laboratory for dynamic loop self-scheduling.

Eighteen chunk-calculation techniques behind one scheduler interface, a
threaded parallel-for runtime, a deterministic serial execution model,
synthetic workload generators, and imbalance metrics, plus a CLI for
running experiment grids.
"""

from .core import (
    Chunk,
    ExecutionContext,
    LoopDescriptor,
    ThreadStats,
    ThreadWeights,
    WorkloadProfile,
    apply_chunk_threshold,
)
from .errors import (
    ConfigError,
    DlslabError,
    EmptyInput,
    InvalidParameters,
    KernelPanic,
    MidFlightChange,
    ProfileMissing,
    SinkUnwritable,
    UnknownTechnique,
    ZeroMean,
)
from .measurement import (
    ChunkTracer,
    EnvSettings,
    LoopTimesRecorder,
    ProfileStore,
    TraceRecord,
    env_settings,
    profile_loop,
    record_loop_times,
    trace_chunks,
)
from .metrics import ImbalanceReport, build_report, compute_cov, compute_pi
from .runtime import LoopExecutor, RunReport, parallel_for, set_schedule
from .schedulers import (
    TECHNIQUE_NAMES,
    AdaptiveState,
    LoopScheduler,
    get_technique,
    normalize_technique,
)
from .simulator import (
    BestSelection,
    OverheadModel,
    SimReport,
    best_combination,
    simulate,
)
from .workloads import (
    CostVector,
    DistributionSpec,
    FlopKernel,
    calibrate_flops,
    dist_suite,
    generate_costs,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveState",
    "BestSelection",
    "Chunk",
    "ChunkTracer",
    "ConfigError",
    "CostVector",
    "DistributionSpec",
    "DlslabError",
    "EmptyInput",
    "EnvSettings",
    "ExecutionContext",
    "FlopKernel",
    "ImbalanceReport",
    "InvalidParameters",
    "KernelPanic",
    "LoopDescriptor",
    "LoopExecutor",
    "LoopScheduler",
    "LoopTimesRecorder",
    "MidFlightChange",
    "OverheadModel",
    "ProfileMissing",
    "ProfileStore",
    "RunReport",
    "SimReport",
    "SinkUnwritable",
    "TECHNIQUE_NAMES",
    "ThreadStats",
    "ThreadWeights",
    "TraceRecord",
    "UnknownTechnique",
    "WorkloadProfile",
    "ZeroMean",
    "apply_chunk_threshold",
    "best_combination",
    "build_report",
    "calibrate_flops",
    "compute_cov",
    "compute_pi",
    "dist_suite",
    "env_settings",
    "generate_costs",
    "get_technique",
    "normalize_technique",
    "parallel_for",
    "profile_loop",
    "record_loop_times",
    "set_schedule",
    "simulate",
    "trace_chunks",
    "__version__",
]
