"""Experiment driver: run, simulate, sweep, report, profile, trace-dump.

Experiments are described by a JSON config (see load_config). Outputs are
deterministic for a fixed config: file contents carry no timestamps, JSON
is dumped with sorted keys, and CSV rows are sorted, so re-running the
same simulation produces byte-identical trees.

Exit codes: 0 success, 2 config/usage error, 3 execution error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ExecutionContext, LoopDescriptor, ThreadWeights
from .errors import ConfigError, DlslabError, InvalidParameters, UnknownTechnique
from .measurement import (
    ChunkTracer,
    LoopTimesRecorder,
    ProfileStore,
    env_settings,
    profile_loop,
    read_trace,
)
from .runtime import parallel_for
from .schedulers import TECHNIQUE_NAMES, get_technique, normalize_technique
from .simulator import OverheadModel, best_combination, simulate
from .workloads import KINDS, DistributionSpec, FlopKernel, dist_suite, generate_costs

_CONFIG_EXIT = 2
_RUNTIME_EXIT = 3


def halving_grid(n: int, p: int) -> list[int]:
    """Chunk parameters from n/(2p) down by integer halving, plus 1."""
    out = []
    c = n // (2 * p)
    while c > 1:
        out.append(c)
        c //= 2
    out.append(1)
    seen = set()
    return [x for x in out if not (x in seen or seen.add(x))]


@dataclass
class LoopSpec:
    loop_id: str
    n: int
    time_steps: int
    workload: DistributionSpec


@dataclass
class ExperimentConfig:
    name: str
    seed: int
    loops: list[LoopSpec]
    techniques: list[str]
    threads: list[int]
    chunk_params: object            # "halving" | list[int]
    repetitions: int
    overhead: dict
    weights: list[float] | None
    tap_alpha: float | None
    flop_scale: float
    output_dir: str
    raw: dict = field(default_factory=dict)

    def grid_for(self, n: int, p: int) -> list[int]:
        if self.chunk_params == "halving":
            return halving_grid(n, p)
        return [k for k in self.chunk_params if k <= n] or [1]


def _cfg_int(doc: dict, key: str, default: int, minimum: int = 0) -> int:
    value = doc.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(f"must be an integer >= {minimum}", field=key)
    return value


def _seed_for(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment config file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")

    name = doc.get("name", path.stem)
    if not isinstance(name, str) or not name:
        raise ConfigError("must be a non-empty string", field="name")
    seed = _cfg_int(doc, "seed", 0)
    default_steps = _cfg_int(doc, "time_steps", 1, minimum=1)

    loops_doc = doc.get("loops", "dist")
    loops: list[LoopSpec] = []
    if loops_doc == "dist":
        n = _cfg_int(doc, "n", 1000, minimum=1)
        for descriptor, spec in dist_suite(seed, n=n):
            loops.append(LoopSpec(descriptor.loop_id, descriptor.n,
                                  default_steps, spec))
    elif isinstance(loops_doc, list) and loops_doc:
        for i, entry in enumerate(loops_doc):
            where = f"loops[{i}]"
            if not isinstance(entry, dict):
                raise ConfigError("must be an object", field=where)
            if "loop_id" not in entry:
                raise ConfigError("missing loop_id", field=where)
            loop_id = str(entry["loop_id"])
            n = _cfg_int(entry, "n", 1000, minimum=1)
            steps = _cfg_int(entry, "time_steps", default_steps, minimum=1)
            wdoc = entry.get("workload")
            if not isinstance(wdoc, dict):
                raise ConfigError("missing workload object",
                                  field=f"{where}.workload")
            try:
                workload = DistributionSpec.from_dict(
                    wdoc, default_seed=_seed_for(seed, i))
            except InvalidParameters as exc:
                raise ConfigError(str(exc), field=f"{where}.workload") from exc
            loops.append(LoopSpec(loop_id, n, steps, workload))
    else:
        raise ConfigError('must be "dist" or a non-empty list', field="loops")
    ids = [lp.loop_id for lp in loops]
    if len(set(ids)) != len(ids):
        raise ConfigError("loop_id values must be unique", field="loops")

    tech_doc = doc.get("techniques", "all")
    if tech_doc == "all":
        techniques = list(TECHNIQUE_NAMES)
    elif isinstance(tech_doc, list) and tech_doc:
        try:
            techniques = [normalize_technique(t) for t in tech_doc]
        except UnknownTechnique as exc:
            raise ConfigError(str(exc), field="techniques") from exc
    else:
        raise ConfigError('must be "all" or a non-empty list',
                          field="techniques")

    threads_doc = doc.get("threads", [4])
    if isinstance(threads_doc, int) and not isinstance(threads_doc, bool):
        threads_doc = [threads_doc]
    if (not isinstance(threads_doc, list) or not threads_doc
            or any(not isinstance(t, int) or isinstance(t, bool) or t < 1
                   for t in threads_doc)):
        raise ConfigError("must be a positive integer or list of them",
                          field="threads")

    cp_doc = doc.get("chunk_params", [1])
    if cp_doc == "default":
        cp_doc = [1]
    if cp_doc != "halving":
        if (not isinstance(cp_doc, list) or not cp_doc
                or any(not isinstance(k, int) or isinstance(k, bool) or k < 1
                       for k in cp_doc)):
            raise ConfigError('must be "halving", "default", or a list of '
                              "integers >= 1", field="chunk_params")

    repetitions = _cfg_int(doc, "repetitions", 5, minimum=1)

    overhead_doc = doc.get("overhead", {})
    if not isinstance(overhead_doc, dict):
        raise ConfigError("must be an object", field="overhead")
    try:
        OverheadModel.from_dict(overhead_doc)
    except (InvalidParameters, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field="overhead") from exc

    weights = doc.get("weights")
    if weights is not None:
        if (not isinstance(weights, list)
                or any(not isinstance(w, (int, float)) or w <= 0
                       for w in weights)):
            raise ConfigError("must be a list of positive numbers",
                              field="weights")
        for p in threads_doc:
            if len(weights) != p:
                raise ConfigError(
                    f"length {len(weights)} does not match threads={p}",
                    field="weights")

    tap_alpha = doc.get("tap_alpha")
    if tap_alpha is not None and (not isinstance(tap_alpha, (int, float))
                                  or tap_alpha <= 0):
        raise ConfigError("must be a positive number", field="tap_alpha")

    flop_scale = doc.get("flop_scale", 1e-6)
    if not isinstance(flop_scale, (int, float)) or flop_scale <= 0:
        raise ConfigError("must be a positive number", field="flop_scale")

    output_dir = doc.get("output_dir", "results")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("must be a non-empty string", field="output_dir")

    return ExperimentConfig(
        name=name, seed=seed, loops=loops, techniques=techniques,
        threads=threads_doc, chunk_params=cp_doc, repetitions=repetitions,
        overhead=overhead_doc, weights=weights,
        tap_alpha=float(tap_alpha) if tap_alpha is not None else None,
        flop_scale=float(flop_scale), output_dir=output_dir, raw=doc,
    )


def _workload_dict(spec: DistributionSpec) -> dict:
    return {
        "kind": spec.kind,
        "params": dict(spec.params),
        "clip": list(spec.clip) if spec.clip else None,
        "seed": spec.seed,
    }


def _workload_from_dict(doc: dict) -> DistributionSpec:
    return DistributionSpec(
        kind=doc["kind"], params=dict(doc["params"]),
        clip=tuple(doc["clip"]) if doc["clip"] else None, seed=doc["seed"],
    )


def _build_cells(cfg: ExperimentConfig, repetitions: int) -> list[dict]:
    cells = []
    for loop in cfg.loops:
        for technique in cfg.techniques:
            for p in cfg.threads:
                for k in cfg.grid_for(loop.n, p):
                    for rep in range(repetitions):
                        cells.append({
                            "experiment": cfg.name,
                            "loop_id": loop.loop_id,
                            "n": loop.n,
                            "time_steps": loop.time_steps,
                            "workload": _workload_dict(loop.workload),
                            "technique": technique,
                            "p": p,
                            "k": k,
                            "rep": rep,
                            "overhead": cfg.overhead,
                            "weights": cfg.weights,
                            "tap_alpha": cfg.tap_alpha,
                        })
    return cells


def _cell_context(cell: dict) -> tuple[LoopDescriptor, ExecutionContext, object]:
    descriptor = LoopDescriptor(cell["loop_id"], cell["n"],
                                time_steps=cell["time_steps"])
    weights = cell["weights"]
    context = ExecutionContext(
        p=cell["p"], technique=cell["technique"], chunk_param=cell["k"],
        weights=ThreadWeights(weights) if weights else None,
    )
    technique = None
    if cell["technique"] == "tap" and cell["tap_alpha"] is not None:
        technique = get_technique("tap", alpha=cell["tap_alpha"])
    return descriptor, context, technique


def _sim_cell(cell: dict) -> dict:
    """Simulate one (loop, technique, p, k) cell; top level for pickling."""
    descriptor, context, technique = _cell_context(cell)
    spec = _workload_from_dict(cell["workload"])
    costs = generate_costs(spec, cell["n"])
    report = simulate(descriptor, context, costs,
                      OverheadModel.from_dict(cell["overhead"]),
                      technique=technique)
    out = report.to_json_dict()
    out.update(experiment=cell["experiment"], rep=cell["rep"],
               workload=cell["workload"], mode="simulate")
    return out


def _cell_path(root: Path, row: dict) -> Path:
    return (root / row["loop_id"] / row["technique"] / f"k{row['k']}"
            / f"p{row['p']}_rep{row['rep']}.json")


def _write_json(path: Path, doc: dict | list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


_ROLLUP_COLUMNS = ("loop_id", "technique", "p", "k", "rep", "makespan",
                   "cov", "pi", "chunk_count", "o_cs", "o_sync")


def _write_rollup(path: Path, rows: list[dict]) -> None:
    rows = sorted(rows, key=lambda r: (r["loop_id"], r["technique"],
                                       r["p"], r["k"], r["rep"]))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_ROLLUP_COLUMNS)
        for row in rows:
            writer.writerow([row.get(c, "") for c in _ROLLUP_COLUMNS])


@dataclass(frozen=True)
class _Row:
    loop_id: str
    technique: str
    makespan: float


def _best_doc(rows: list[dict]) -> dict:
    selection = best_combination(
        _Row(r["loop_id"], r["technique"], r["makespan"]) for r in rows
    )
    return {
        "per_loop": selection.per_loop,
        "per_loop_makespan": selection.per_loop_makespan,
        "best_total": selection.best_total,
        "technique_totals": selection.technique_totals,
        "degradation_pct": selection.degradation_pct,
    }


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if cfg.repetitions > 1:
        print("simulate is deterministic; collapsing repetitions to 1",
              file=sys.stderr)
    cells = _build_cells(cfg, repetitions=1)
    root = Path(args.output or cfg.output_dir) / cfg.name
    jobs = max(1, args.jobs)
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sim_cell, cells, chunksize=4))
    else:
        results = [_sim_cell(cell) for cell in cells]
    for row in results:
        _write_json(_cell_path(root, row), row)
    _write_rollup(root / "rollup.csv", results)
    _write_json(root / "best.json", _best_doc(results))
    _write_json(root / "config.json", cfg.raw)
    print(f"wrote {len(results)} cells under {root}")
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    settings = env_settings()
    techniques = cfg.techniques
    k_override = None
    if settings.schedule is not None:
        technique, k_override = settings.schedule
        techniques = [technique]
        print(f"schedule override from environment: {technique}"
              + (f",{k_override}" if k_override else ""), file=sys.stderr)
    cfg.techniques = techniques

    root = Path(args.output or cfg.output_dir) / cfg.name
    overhead = OverheadModel.from_dict(cfg.overhead)
    loop_times = (LoopTimesRecorder(settings.time_loops)
                  if settings.time_loops else None)
    store = ProfileStore(settings.profile_dir) if settings.profile_dir else None

    cells = _build_cells(cfg, repetitions=cfg.repetitions)
    if k_override is not None:
        seen = set()
        deduped = []
        for cell in cells:
            cell = dict(cell, k=min(k_override, cell["n"]))
            key = (cell["loop_id"], cell["technique"], cell["p"],
                   cell["k"], cell["rep"])
            if key not in seen:
                seen.add(key)
                deduped.append(cell)
        cells = deduped

    results = []
    costs_cache: dict[str, object] = {}
    for cell in cells:
        descriptor, context, technique = _cell_context(cell)
        if cell["loop_id"] not in costs_cache:
            spec = _workload_from_dict(cell["workload"])
            costs_cache[cell["loop_id"]] = generate_costs(spec, cell["n"])
        costs = costs_cache[cell["loop_id"]]
        kernel = FlopKernel(costs, scale=cfg.flop_scale)
        tracer = ChunkTracer() if settings.print_chunks else None
        report = parallel_for(
            descriptor, context, kernel, costs=costs, overhead=overhead,
            profile_store=store, technique=technique, tracer=tracer,
            loop_times=loop_times,
        )
        if tracer is not None:
            for rec in tracer.records:
                print(json.dumps(rec.to_json_dict(), sort_keys=True))
        row = {
            "experiment": cfg.name,
            "loop_id": report.loop_id,
            "technique": report.technique,
            "n": report.n,
            "p": report.p,
            "k": report.k,
            "rep": cell["rep"],
            "time_steps": report.time_steps,
            "makespan": report.makespan,
            "thread_times": list(report.thread_times),
            "cov": report.cov,
            "pi": report.pi,
            "pi_defined": report.pi_defined,
            "chunk_count": report.chunk_count,
            "workload": cell["workload"],
            "flop_scale": cfg.flop_scale,
            "flops_per_second": kernel.flops_per_second,
            "mode": "run",
        }
        results.append(row)
        _write_json(_cell_path(root, row), row)
    _write_rollup(root / "rollup.csv", results)
    _write_json(root / "config.json", cfg.raw)
    print(f"wrote {len(results)} cells under {root}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if cfg.chunk_params != "halving" and len(cfg.chunk_params) == 1:
        cfg.chunk_params = "halving"  # a sweep over one k is not a sweep
    cells = _build_cells(cfg, repetitions=1)
    root = Path(args.output or cfg.output_dir) / cfg.name
    jobs = max(1, args.jobs)
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sim_cell, cells, chunksize=4))
    else:
        results = [_sim_cell(cell) for cell in cells]
    _write_rollup(root / "sweep.csv", results)

    best: dict[str, dict[str, dict]] = {}
    for row in sorted(results, key=lambda r: (r["loop_id"], r["technique"],
                                              r["p"], r["k"])):
        key = f"{row['technique']}@p{row['p']}"
        per_loop = best.setdefault(row["loop_id"], {})
        slot = per_loop.get(key)
        if slot is None or row["makespan"] < slot["makespan"]:
            per_loop[key] = {
                "technique": row["technique"], "p": row["p"],
                "k": row["k"], "makespan": row["makespan"],
            }
    _write_json(root / "sweep_best.json", best)
    _write_json(root / "config.json", cfg.raw)
    print(f"swept {len(results)} cells under {root}")
    return 0


def _load_cell_rows(results_dir: Path) -> list[dict]:
    rows = []
    for path in sorted(results_dir.rglob("*.json")):
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            continue
        if (isinstance(doc, dict)
                and {"loop_id", "technique", "p", "k", "makespan"} <= doc.keys()):
            rows.append(doc)
    return rows


def cmd_report(args) -> int:
    results_dir = Path(args.results)
    if not results_dir.is_dir():
        raise ConfigError(f"not a results directory: {results_dir}")
    rows = _load_cell_rows(results_dir)
    if not rows:
        raise ConfigError(f"no result cells found under {results_dir}")

    grouped: dict[tuple, list[dict]] = {}
    for row in rows:
        key = (row["loop_id"], row["technique"], row["p"], row["k"])
        grouped.setdefault(key, []).append(row)
    summary_rows = []
    for (loop_id, technique, p, k), group in sorted(grouped.items()):
        reps = len(group)
        summary_rows.append({
            "loop_id": loop_id, "technique": technique, "p": p, "k": k,
            "reps": reps,
            "makespan": math.fsum(r["makespan"] for r in group) / reps,
            "cov": math.fsum(r["cov"] for r in group) / reps,
            "pi": math.fsum(r["pi"] for r in group) / reps,
        })

    out_dir = Path(args.output) if args.output else results_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "summary.csv", "w", encoding="utf-8",
              newline="") as fh:
        writer = csv.writer(fh)
        cols = ("loop_id", "technique", "p", "k", "reps",
                "makespan", "cov", "pi")
        writer.writerow(cols)
        for row in summary_rows:
            writer.writerow([row[c] for c in cols])
    best = _best_doc(summary_rows)
    _write_json(out_dir / "summary.json", best)

    print("per-loop winners (mean makespan):")
    for loop_id, technique in best["per_loop"].items():
        print(f"  {loop_id}: {technique} "
              f"({best['per_loop_makespan'][loop_id]:.6g})")
    print("single-technique degradation vs per-loop best (%):")
    for technique, pct in sorted(best["degradation_pct"].items(),
                                 key=lambda kv: kv[1]):
        print(f"  {technique}: {pct:.3f}")
    return 0


def cmd_profile(args) -> int:
    cfg = load_config(args.config)
    settings = env_settings()
    store_dir = (args.store or settings.profile_dir
                 or str(Path(cfg.output_dir) / cfg.name / "profiles"))
    store = ProfileStore(store_dir)
    for loop in cfg.loops:
        descriptor = LoopDescriptor(loop.loop_id, loop.n,
                                    time_steps=loop.time_steps)
        costs = generate_costs(loop.workload, loop.n)
        if args.live:
            kernel = FlopKernel(costs, scale=cfg.flop_scale)
            profile = profile_loop(descriptor, body=kernel, store=store)
        else:
            profile = profile_loop(descriptor, costs=costs, store=store)
        print(f"{loop.loop_id}: mu={profile.mu:.6g} sigma={profile.sigma:.6g} "
              f"h={profile.h:.6g} -> {store.path_for(loop.loop_id, loop.n)}")
    return 0


def cmd_trace_dump(args) -> int:
    records = read_trace(args.trace)
    records.sort(key=lambda r: (r.loop_id, r.instance, r.t_sched_begin,
                                r.thread))
    rows = []
    ordinal: dict[tuple, int] = {}
    for rec in records:
        key = (rec.loop_id, rec.instance)
        idx = ordinal.get(key, 0)
        ordinal[key] = idx + 1
        rows.append((rec.loop_id, rec.instance, idx, rec.thread,
                     rec.chunk_start, rec.chunk_size, rec.t_sched_begin,
                     rec.t_body_begin, rec.t_body_end))
    header = ("loop_id", "instance", "chunk_id", "thread", "chunk_start",
              "chunk_size", "t_sched_begin", "t_body_begin", "t_body_end")
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        print(f"wrote {len(rows)} chunks to {args.output}")
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dlslab",
        description="dynamic loop scheduling laboratory: threaded runs, "
                    "deterministic simulation, technique sweeps",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute loops live on worker threads")
    p_run.add_argument("config", help="experiment config (JSON)")
    p_run.add_argument("--output", help="results root (default: config output_dir)")
    p_run.set_defaults(func=cmd_run)

    p_sim = sub.add_parser("simulate",
                           help="run the serial execution model")
    p_sim.add_argument("config", help="experiment config (JSON)")
    p_sim.add_argument("--output", help="results root (default: config output_dir)")
    p_sim.add_argument("--jobs", type=int, default=1,
                       help="worker processes for independent cells")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep",
                             help="sweep chunk parameters per technique")
    p_sweep.add_argument("config", help="experiment config (JSON)")
    p_sweep.add_argument("--output", help="results root (default: config output_dir)")
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="worker processes for independent cells")
    p_sweep.set_defaults(func=cmd_sweep)

    p_rep = sub.add_parser("report", help="summarize a results directory")
    p_rep.add_argument("results", help="directory holding cell JSON files")
    p_rep.add_argument("--output", help="where to write summary files")
    p_rep.set_defaults(func=cmd_report)

    p_prof = sub.add_parser("profile",
                            help="profile workloads and save mu/sigma/h")
    p_prof.add_argument("config", help="experiment config (JSON)")
    p_prof.add_argument("--store", help="profile store directory")
    p_prof.add_argument("--live", action="store_true",
                        help="time a real busy kernel instead of using "
                             "exact cost moments")
    p_prof.set_defaults(func=cmd_profile)

    p_td = sub.add_parser("trace-dump", help="convert an NDJSON trace to CSV")
    p_td.add_argument("trace", help="trace file (NDJSON)")
    p_td.add_argument("--output", help="CSV path (default: stdout)")
    p_td.set_defaults(func=cmd_trace_dump)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnknownTechnique) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _CONFIG_EXIT
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _CONFIG_EXIT
    except DlslabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _RUNTIME_EXIT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
