"""
Experiment orchestration: seeding, point-set preparation, resumable run grids,
analysis of record directories and the population-size cycling study.
"""
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn, BarColumn, TimeElapsedColumn
from rich.table import Table

from errors import SpecError
from models import (
    ExperimentSpec, ToolkitConfig, GeneratorKind, SamplerSpec, PointSet, RunRecord,
    LambdaStudyRow, FitResult, SUPPORTED_CACHE_SIZES, DEFAULT_FUNCTION_IDS, format_cache_size,
)
from lds import uniform_set, halton_set, sobol_set, load_point_set, make_cached_source, make_endless_source
from discrepancy import l2_star, ta_subset, optimized_base_size
from bench import make_problem
from cmaes import default_params, run, observed_cycle
from analysis import (
    auc_table, eaf_curve, eaf_auc, normalize_per_dim, discrepancy_performance_fit,
    group_runs, sort_cell_key,
)
from data_loader import load_run_records, load_discrepancy_grid, load_run_record
from output import (
    write_run_record, write_eaf_csv, write_auc_csv, write_fit_csv, write_plotdata_json,
    write_discrepancy_grid_csv, write_lambda_study_csv, print_auc_table, print_checks,
)

console = Console()
logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
ZERO_VARIANCE_FLAG = "zero-intergeneration-variance"


# ===========================
# Seeding
# ===========================

def splitmix64(x: int) -> int:
    """SplitMix64 finalizer: a 64-bit avalanche mix"""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def _part_value(part) -> int:
    if part is None:
        return MASK64
    if isinstance(part, GeneratorKind):
        part = part.name
    if isinstance(part, str):
        return int.from_bytes(hashlib.blake2b(part.encode('utf-8'), digest_size=8).digest(), 'little')
    return int(part) & MASK64


def mix_seed(master: int, *parts) -> int:
    """Fold `parts` into `master`; every part changes the result independently of the others"""
    state = splitmix64(int(master) & MASK64)
    for part in parts:
        state = splitmix64(state ^ _part_value(part))
    return state


def run_seed(master: int, fid: int, iid: int, sampler: SamplerSpec, dim: int) -> int:
    return mix_seed(master, fid, iid, sampler.kind, sampler.cache_size, dim)


def point_set_seed(master: int, kind: GeneratorKind, k: int, dim: int) -> int:
    return mix_seed(master, "pointset", kind, k, dim)


# ===========================
# Point sets for cached samplers
# ===========================

def optimized_file(optimized_dir: Optional[str], dim: int, k: int) -> Optional[Path]:
    if not optimized_dir:
        return None
    path = Path(optimized_dir) / f"d{dim}_n{k}.txt"
    return path if path.exists() else None


def build_point_set(
    kind: GeneratorKind,
    k: int,
    dim: int,
    seed: int,
    config: ToolkitConfig,
    ta_iters: Optional[int] = None,
    optimized_dir: Optional[str] = None
) -> PointSet:
    """
    Point set of size k used by a cached sampler.

    OPTIMIZED sets come from `{optimized_dir}/d{dim}_n{k}.txt` when that file exists,
    otherwise from Threshold Accepting over a Sobol base of size max(512, 8k).
    """
    if kind is GeneratorKind.UNIFORM:
        return uniform_set(k, dim, seed)
    if kind is GeneratorKind.HALTON:
        return halton_set(k, dim, seed, scrambled=True)
    if kind is GeneratorKind.SOBOL:
        return sobol_set(k, dim)

    path = optimized_file(optimized_dir, dim, k)
    if path is not None:
        ps = load_point_set(path)
        if ps.dim != dim or ps.n != k:
            raise SpecError(f"{path} holds {ps.n} points in {ps.dim}D, expected {k} in {dim}D")
        logger.info("%s set for dim=%d k=%d read from %s", kind.name, dim, k, path)
        return PointSet(dim, ps.points, kind)
    if kind is GeneratorKind.IMPORTED:
        raise SpecError(f"no imported point set for dim={dim}, k={k} in {optimized_dir}")
    if optimized_dir:
        logger.warning("no file for dim=%d k=%d in %s; using threshold accepting", dim, k, optimized_dir)

    base = sobol_set(optimized_base_size(k, config.optimized_base_min, config.optimized_base_factor), dim)
    return ta_subset(base, k, ta_iters or config.ta_iters, seed, config.ta_restarts)


def prepare_point_sets(
    samplers: Iterable[SamplerSpec],
    dims: Iterable[int],
    master_seed: int,
    config: ToolkitConfig,
    ta_iters: Optional[int] = None,
    optimized_dir: Optional[str] = None
) -> Dict[Tuple[GeneratorKind, int, int], PointSet]:
    """One point set per (kind, k, dim), shared by every run of that cell"""
    sets = {}
    for dim in dims:
        for sampler in samplers:
            if sampler.cache_size is None:
                continue
            key = (sampler.kind, sampler.cache_size, dim)
            if key not in sets:
                seed = point_set_seed(master_seed, sampler.kind, sampler.cache_size, dim)
                sets[key] = build_point_set(
                    sampler.kind, sampler.cache_size, dim, seed, config, ta_iters, optimized_dir
                )
    return sets


# ===========================
# Single runs
# ===========================

@dataclass
class RunTask:
    """Everything a worker needs to execute one grid cell"""
    fid: int
    iid: int
    dim: int
    sampler: SamplerSpec
    seed: int
    budget: int
    lambda_override: Optional[int] = None
    target_precision: float = 1e-8
    point_set: Optional[PointSet] = None
    sigma0: float = 2.0
    init_bound: float = 4.0
    eigen_floor: float = 1e-30

    @property
    def key(self) -> tuple:
        k = self.sampler.cache_size
        return (self.dim, self.sampler.kind.name, math.inf if k is None else k, self.fid, self.iid,
                self.lambda_override or 0)

    def content_hash(self) -> str:
        spec = {
            "fid": self.fid, "iid": self.iid, "dim": self.dim,
            "sampler": self.sampler.kind.name, "k": self.sampler.cache_size,
            "seed": self.seed, "budget": self.budget, "lambda": self.lambda_override,
            "target": repr(self.target_precision), "sigma0": repr(self.sigma0),
            "init_bound": repr(self.init_bound),
            "points": None if self.point_set is None else hashlib.blake2b(
                self.point_set.points.tobytes(), digest_size=8).hexdigest(),
        }
        text = json.dumps(spec, sort_keys=True)
        return hashlib.blake2b(text.encode('utf-8'), digest_size=6).hexdigest()

    def filename(self) -> str:
        lam = f"_l{self.lambda_override}" if self.lambda_override else ""
        return (f"f{self.fid:02d}_i{self.iid:03d}_d{self.dim:02d}_{self.sampler.tag}{lam}"
                f"_{self.content_hash()}.json")


def execute_task(task: RunTask) -> RunRecord:
    """Run one cell; pure function of the task"""
    problem = make_problem(task.fid, task.iid, task.dim)
    params = default_params(
        task.dim, task.lambda_override, sigma0=task.sigma0, seed=task.seed, init_bound=task.init_bound
    )
    source_seed = mix_seed(task.seed, "source")
    if task.point_set is not None:
        source = make_cached_source(task.point_set, source_seed)
    else:
        source = make_endless_source(task.sampler.kind, task.dim, source_seed)
    return run(problem, params, source, task.budget, task.target_precision, task.seed, task.eigen_floor)


def make_task(
    fid: int,
    iid: int,
    dim: int,
    sampler: SamplerSpec,
    budget: int,
    master_seed: int,
    config: ToolkitConfig,
    point_sets: Dict,
    lambda_override: Optional[int] = None,
    target_precision: Optional[float] = None
) -> RunTask:
    point_set = None
    if sampler.cache_size is not None:
        point_set = point_sets[(sampler.kind, sampler.cache_size, dim)]
    return RunTask(
        fid=fid, iid=iid, dim=dim, sampler=sampler,
        seed=run_seed(master_seed, fid, iid, sampler, dim),
        budget=budget,
        lambda_override=lambda_override,
        target_precision=target_precision if target_precision is not None else config.target_precision,
        point_set=point_set,
        sigma0=config.sigma0,
        init_bound=config.init_bound,
        eigen_floor=config.eigen_floor,
    )


def run_single(
    fid: int,
    iid: int,
    dim: int,
    sampler: SamplerSpec,
    master_seed: int,
    budget: int,
    config: ToolkitConfig,
    output_dir: str,
    lambda_override: Optional[int] = None,
    optimized_dir: Optional[str] = None,
    ta_iters: Optional[int] = None
) -> Tuple[RunRecord, Path]:
    """Execute and store one run; returns the record and its file path"""
    point_sets = prepare_point_sets([sampler], [dim], master_seed, config, ta_iters, optimized_dir)
    task = make_task(fid, iid, dim, sampler, budget, master_seed, config, point_sets, lambda_override)
    record = execute_task(task)
    path = Path(output_dir) / task.filename()
    write_run_record(record, path)
    return record, path


def execute_tasks(
    tasks: Sequence[RunTask],
    records_dir: Path,
    jobs: int = 1,
    description: str = "Running grid",
    report_every: int = 0
) -> List[RunRecord]:
    """
    Execute tasks whose record file is missing; existing records are loaded instead.

    With `report_every` > 0 a log line is emitted after every that many finished runs.

    Returns:
        Records in task-key order
    """
    records_dir.mkdir(parents=True, exist_ok=True)
    tasks = sorted(tasks, key=lambda t: t.key)
    paths = [records_dir / t.filename() for t in tasks]
    pending = [i for i, p in enumerate(paths) if not p.exists()]
    skipped = len(tasks) - len(pending)
    if skipped:
        console.print(f"[dim]Skipping {skipped} existing record(s) in {records_dir}[/dim]")

    def finished(done: int, record: RunRecord) -> None:
        progress.advance(bar)
        if report_every and done % report_every == 0:
            logger.info("%d/%d runs done (last: f%d i%d d%d %s, precision %.3g)",
                        done, len(pending), record.fid, record.iid, record.dim,
                        record.sampler_tag, record.final_precision)

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
        TimeElapsedColumn(),
        console=console,
    ) as progress:
        bar = progress.add_task(description, total=len(pending))
        if jobs > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = pool.map(execute_task, [tasks[i] for i in pending], chunksize=4)
                for done, (i, record) in enumerate(zip(pending, results), 1):
                    write_run_record(record, paths[i])
                    finished(done, record)
        else:
            for done, i in enumerate(pending, 1):
                record = execute_task(tasks[i])
                write_run_record(record, paths[i])
                finished(done, record)

    return [load_run_record(p) for p in paths]


# ===========================
# Experiment grid
# ===========================

def build_tasks(spec: ExperimentSpec, config: ToolkitConfig, point_sets: Dict) -> List[RunTask]:
    tasks = []
    for dim in spec.dims:
        for sampler in spec.sampler_grid():
            for fid in spec.fids:
                for iid in range(1, spec.iids + 1):
                    tasks.append(make_task(
                        fid, iid, dim, sampler, spec.budget(dim), spec.master_seed, config,
                        point_sets, spec.lambda_override, spec.target_precision,
                    ))
    return tasks


def run_experiment(spec: ExperimentSpec, config: ToolkitConfig, analyze_results: bool = True) -> dict:
    """
    Run the full grid (samplers x k x dims x fids x iids), then analyze it.

    Records are written to {output_dir}/records and reused on re-runs. Only the
    records of this grid are analyzed, and the discrepancy table is recomputed, so
    other files left in the directory never change the output.
    """
    console.print(Panel.fit(
        "[bold cyan]SAMPLER GRID EXPERIMENT[/bold cyan]\n"
        f"[white]{spec.grid_size} runs, dims {spec.dims}, budget {spec.budget_multiplier}·d[/white]",
        border_style="cyan"
    ))
    start_time = time.time()
    output_dir = Path(spec.output_dir)

    with console.status("[bold green]Preparing point sets...", spinner="dots"):
        point_sets = prepare_point_sets(
            spec.sampler_grid(), spec.dims, spec.master_seed, config, spec.ta_iters, spec.optimized_dir
        )
    console.print(f"[green]✓[/green] Prepared {len(point_sets)} point sets")

    tasks = build_tasks(spec, config, point_sets)
    records = execute_tasks(tasks, output_dir / "records", spec.jobs,
                            report_every=config.progress_report_interval)
    run_time = time.time() - start_time
    console.print(f"[green]✓[/green] {len(records)} runs available after [yellow]{run_time:.1f}s[/yellow]")

    summary = {"records": len(records), "output_dir": str(output_dir)}
    if analyze_results:
        summary.update(analyze_records(
            records, output_dir, config, spec.master_seed, spec.ta_iters,
            spec.optimized_dir, spec.n_targets, reuse_grid=False,
        ))
    return summary


# ===========================
# Discrepancy grid
# ===========================

def discrepancy_grid(
    dims: Sequence[int],
    ks: Sequence[int],
    kinds: Sequence[GeneratorKind],
    config: ToolkitConfig,
    master_seed: int = 0,
    ta_iters: Optional[int] = None,
    optimized_dir: Optional[str] = None
) -> List[dict]:
    """
    L2 star discrepancy for every (kind, k, dim); UNIFORM is averaged over
    `config.uniform_seeds` sets. The last column is log10 discrepancy min-max
    normalized within each dimension.
    """
    rows = []
    for dim in dims:
        for kind in kinds:
            for k in ks:
                if kind is GeneratorKind.UNIFORM:
                    values = [
                        l2_star(uniform_set(k, dim, mix_seed(master_seed, "uniform-grid", k, dim, i)))
                        for i in range(config.uniform_seeds)
                    ]
                    value = float(np.mean(values))
                else:
                    seed = point_set_seed(master_seed, kind, k, dim)
                    ps = build_point_set(kind, k, dim, seed, config, ta_iters, optimized_dir)
                    value = l2_star(ps)
                rows.append({"kind": kind.name, "k": k, "dim": dim, "l2_star": value,
                             "log10_l2_star": math.log10(value) if value > 0 else -math.inf})

    logs = {(r["kind"], r["k"], r["dim"]): r["log10_l2_star"] for r in rows}
    normalized, _ = normalize_per_dim(logs)
    for r in rows:
        r["log10_l2_normalized"] = normalized[(r["kind"], r["k"], r["dim"])]
    return rows


def run_discrepancy_grid(
    dims: Sequence[int],
    config: ToolkitConfig,
    output_path: Path,
    master_seed: int = 0,
    ks: Sequence[int] = SUPPORTED_CACHE_SIZES,
    kinds: Sequence[GeneratorKind] = (GeneratorKind.UNIFORM, GeneratorKind.HALTON,
                                      GeneratorKind.SOBOL, GeneratorKind.OPTIMIZED),
    ta_iters: Optional[int] = None,
    optimized_dir: Optional[str] = None
) -> List[dict]:
    with console.status("[bold green]Computing discrepancy grid...", spinner="dots"):
        rows = discrepancy_grid(dims, ks, kinds, config, master_seed, ta_iters, optimized_dir)
    write_discrepancy_grid_csv(rows, output_path)
    return rows


# ===========================
# Analysis
# ===========================

def directional_checks(
    aucs: Dict[tuple, float],
    fits: Dict[int, FitResult],
    optimized_imported: bool = False
) -> List[dict]:
    """
    Qualitative orderings expected from the sampler comparison.

    The OPTIMIZED-16 check is advisory unless its set was read from a file
    (`optimized_imported`); threshold-accepting sets are weaker.
    """
    checks = []
    dims = sorted({key[2] for key in aucs})

    def add(name, detail, ok, advisory=False):
        status = "pass" if ok else ("advisory" if advisory else "fail")
        checks.append({"name": name, "detail": detail, "status": status})

    for dim in dims:
        uniform = aucs.get(("UNIFORM", None, dim))
        for kind in ("HALTON", "SOBOL"):
            other = aucs.get((kind, None, dim))
            if uniform is None or other is None:
                continue
            add(f"{kind}-inf >= UNIFORM-inf (d={dim})", f"{other:.4f} vs {uniform:.4f}", other >= uniform)

        sobol_inf = aucs.get(("SOBOL", None, dim))
        sobol_128 = aucs.get(("SOBOL", 128, dim))
        if sobol_inf is not None and sobol_128 is not None:
            gap = abs(sobol_128 - sobol_inf)
            add(f"|SOBOL-128 - SOBOL-inf| <= 0.03 (d={dim})", f"{gap:.4f}", gap <= 0.03)

    uniform_2 = aucs.get(("UNIFORM", None, 2))
    for kind, advisory in (("IMPORTED", False), ("OPTIMIZED", not optimized_imported)):
        small = aucs.get((kind, 16, 2))
        if small is not None and uniform_2 is not None:
            add(f"{kind}-16 > UNIFORM-inf (d=2)", f"{small:.4f} vs {uniform_2:.4f}", small > uniform_2, advisory)
            break

    fit = fits.get(2)
    if fit is not None:
        add("discrepancy-AUC correlation negative (d=2)",
            f"r={fit.pearson_r:.3f}, slope={fit.slope:.4f}",
            fit.pearson_r < 0 and fit.slope < 0)
    return checks


def analyze(
    records_dir: Path,
    output_dir: Path,
    config: ToolkitConfig,
    master_seed: Optional[int] = None,
    ta_iters: Optional[int] = None,
    optimized_dir: Optional[str] = None,
    n_targets: Optional[int] = None
) -> dict:
    """Aggregate every record file in `records_dir`; see analyze_records"""
    records = load_run_records(records_dir)
    if not records:
        raise SpecError(f"no run records in {records_dir}")
    return analyze_records(records, output_dir, config, master_seed, ta_iters, optimized_dir, n_targets)


def analyze_records(
    records: Sequence[RunRecord],
    output_dir: Path,
    config: ToolkitConfig,
    master_seed: Optional[int] = None,
    ta_iters: Optional[int] = None,
    optimized_dir: Optional[str] = None,
    n_targets: Optional[int] = None,
    reuse_grid: bool = True
) -> dict:
    """
    Aggregate run records into eaf_curve.csv, eaf_by_function.csv, auc.csv,
    fit.csv and plotdata.json.

    The regression joins finite-k cells with discrepancy_grid.csv from
    `output_dir`. With `reuse_grid` an existing table is used when it covers
    every cell; otherwise the table is computed from `master_seed`.
    """
    master_seed = config.master_seed if master_seed is None else master_seed
    n_targets = n_targets or config.n_targets
    output_dir = Path(output_dir)
    if not records:
        raise SpecError("no run records to analyze")

    curves, aucs = auc_table(records, n_targets)
    normalized, degenerate = normalize_per_dim(aucs)

    by_function = {}
    for key, group in group_runs(records).items():
        for fid in sorted({r.fid for r in group}):
            by_function[key + (fid,)] = eaf_curve([r for r in group if r.fid == fid], n_targets)

    write_eaf_csv(curves, output_dir / "eaf_curve.csv")
    write_eaf_csv(by_function, output_dir / "eaf_by_function.csv")
    write_auc_csv(aucs, normalized, output_dir / "auc.csv")
    print_auc_table(aucs, normalized)

    finite = [key for key in aucs if key[1] is not None]
    fits: Dict[int, FitResult] = {}
    table = {}
    if finite:
        grid_path = output_dir / "discrepancy_grid.csv"
        dims = sorted({key[2] for key in finite})
        ks = sorted({key[1] for key in finite})
        kinds = [GeneratorKind[name] for name in sorted({key[0] for key in finite})]
        if reuse_grid and grid_path.exists():
            table = load_discrepancy_grid(grid_path)
        if any(key not in table for key in finite):
            rows = run_discrepancy_grid(dims, config, grid_path, master_seed, ks, kinds, ta_iters, optimized_dir)
            table = {(r["kind"], r["k"], r["dim"]): r["l2_star"] for r in rows}

        for dim in dims:
            points = [
                (math.log10(table[key]), aucs[key])
                for key in sorted(finite, key=sort_cell_key)
                if key[2] == dim and key in table and table[key] > 0
            ]
            if len(points) < 3:
                logger.warning("d=%d: only %d discrepancy/AUC pairs, skipping fit", dim, len(points))
                continue
            fits[dim] = discrepancy_performance_fit(points)
    write_fit_csv(fits, output_dir / "fit.csv")

    checks = directional_checks(aucs, fits, optimized_file(optimized_dir, 2, 16) is not None)
    print_checks(checks)

    plotdata = {
        "budget_axis": "log10",
        "n_targets": n_targets,
        "eaf": [
            {"sampler": s, "k": format_cache_size(k), "dim": d,
             "budget": [int(b) for b in c.budget_grid], "value": [float(v) for v in c.values]}
            for (s, k, d), c in curves.items()
        ],
        "auc": [
            {"sampler": s, "k": format_cache_size(k), "dim": d, "auc": aucs[(s, k, d)],
             "auc_normalized": normalized[(s, k, d)]}
            for (s, k, d) in aucs
        ],
        "discrepancy_vs_auc": [
            {"sampler": s, "k": k, "dim": d, "log10_l2_star": math.log10(table[(s, k, d)]), "auc": aucs[(s, k, d)]}
            for (s, k, d) in sorted(finite, key=sort_cell_key) if (s, k, d) in table and table[(s, k, d)] > 0
        ],
        "fit": {str(d): {"slope": f.slope, "intercept": f.intercept, "pearson_r": f.pearson_r,
                         "degenerate": f.degenerate} for d, f in sorted(fits.items())},
        "degenerate_dims": degenerate,
        "checks": checks,
    }
    write_plotdata_json(plotdata, output_dir / "plotdata.json")
    return {"cells": len(aucs), "fits": len(fits),
            "failed_checks": sum(1 for c in checks if c["status"] == "fail")}


# ===========================
# Population-size cycling study
# ===========================

def cycle_generations(k: Optional[int], lam: int) -> Optional[int]:
    """Generations after which a cache of size k replays the same batch: lcm(k, lam) / lam"""
    if k is None:
        return None
    return (k * lam // math.gcd(k, lam)) // lam


def run_lambda_study(
    config: ToolkitConfig,
    output_dir: str,
    dims: Sequence[int] = (2, 5),
    ks: Sequence[int] = (16, 32, 64, 128),
    lams: Sequence[int] = (15, 16),
    kind: GeneratorKind = GeneratorKind.OPTIMIZED,
    fids: Sequence[int] = DEFAULT_FUNCTION_IDS,
    iids: int = 10,
    budget_multiplier: int = 2000,
    master_seed: int = 0,
    jobs: int = 1,
    ta_iters: Optional[int] = None,
    optimized_dir: Optional[str] = None
) -> List[LambdaStudyRow]:
    """
    Compare cached samplers at two population sizes against UNIFORM-inf.

    Every (dim, lam) produces one row per cache size plus the baseline.
    """
    if kind not in (GeneratorKind.OPTIMIZED, GeneratorKind.SOBOL, GeneratorKind.IMPORTED):
        raise SpecError("lambda study uses OPTIMIZED, IMPORTED or SOBOL point sets")
    for lam in lams:
        if lam < 2:
            raise SpecError("lambda must be at least 2")

    console.print(Panel.fit(
        "[bold cyan]POPULATION SIZE CYCLING STUDY[/bold cyan]\n"
        f"[white]{kind.name} k={list(ks)} vs UNIFORM-inf, lambda={list(lams)}, dims {list(dims)}[/white]",
        border_style="cyan"
    ))
    out = Path(output_dir)
    samplers = [SamplerSpec(kind, k) for k in ks] + [SamplerSpec(GeneratorKind.UNIFORM, None)]
    point_sets = prepare_point_sets(samplers, dims, master_seed, config, ta_iters, optimized_dir)

    tasks = [
        make_task(fid, iid, dim, sampler, budget_multiplier * dim, master_seed, config, point_sets, lam)
        for dim in dims for lam in lams for sampler in samplers
        for fid in fids for iid in range(1, iids + 1)
    ]
    records = execute_tasks(tasks, out / "records", jobs, "Running lambda study",
                            config.progress_report_interval)

    rows = []
    for dim in dims:
        for lam in lams:
            for sampler in samplers:
                group = [r for r in records
                         if r.dim == dim and r.lam == lam and r.cache_size == sampler.cache_size]
                curve = eaf_curve(group)
                longest = max(group, key=lambda r: r.generations)
                cycle = cycle_generations(sampler.cache_size, lam)
                rows.append(LambdaStudyRow(
                    dim=dim,
                    lam=lam,
                    sampler=group[0].sampler,
                    k=sampler.cache_size,
                    final_eaf=float(curve.values[-1]),
                    auc=eaf_auc(curve),
                    cycle_generations=cycle,
                    observed_cycle=observed_cycle(longest.batch_hashes) if cycle else None,
                    flag=ZERO_VARIANCE_FLAG if cycle == 1 else "",
                ))

    write_lambda_study_csv(rows, out / "lambda_study.csv")

    table = Table(title="Lambda study", box=None)
    for column in ("Dim", "λ", "Sampler", "k", "Final EAF", "AUC", "Cycle", "Flag"):
        table.add_column(column)
    for r in rows:
        table.add_row(str(r.dim), str(r.lam), r.sampler.name, format_cache_size(r.k),
                      f"{r.final_eaf:.3f}", f"{r.auc:.4f}",
                      "" if r.cycle_generations is None else str(r.cycle_generations), r.flag)
    console.print(table)
    return rows
