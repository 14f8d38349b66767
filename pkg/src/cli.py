"""
Command-line front end for the quasi-random CMA-ES toolkit.

Usage:
    python src/cli.py gen-points --kind sobol --n 100 --dim 5 --out points.txt
    python src/cli.py discrepancy --path points.txt --mc-check
    python src/cli.py discrepancy --grid --dims 2,5,10
    python src/cli.py optimize-subset --k 16 --dim 2 --out d2_n16.txt
    python src/cli.py run --fid 1 --iid 1 --dim 2 --sampler sobol-inf
    python src/cli.py experiment desk_experiment.spec --jobs 4
    python src/cli.py analyze output/records --out output
    python src/cli.py lambda-study --kind optimized
"""
import argparse
import logging
import sys
import traceback
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel

# Load environment variables from .env file before reading config
try:
    from dotenv import load_dotenv
    load_dotenv(override=True)
except ImportError:
    pass

from errors import SpecError, NumericalError
from models import (
    GeneratorKind, SamplerSpec, DiscrepancyMethod, ToolkitConfig, DEFAULT_FUNCTION_IDS,
    SUPPORTED_CACHE_SIZES,
)
from data_loader import load_config, parse_spec_file, DEFAULT_CONFIG_PATH
from lds import halton_set, sobol_set, save_point_set, load_point_set
from discrepancy import discrepancy_report, best_random_subset_l2, l2_star, optimized_base_size, ta_subset
from output import write_discrepancy_csv, discrepancy_row, DISCREPANCY_HEADER
from experiment import (
    build_point_set, run_single, run_experiment, analyze, run_discrepancy_grid, run_lambda_study,
)

console = Console()
logger = logging.getLogger("qmc_cmaes")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_SPEC = 2
EXIT_NUMERICAL = 3


def setup_logging(config: ToolkitConfig) -> None:
    logging.basicConfig(
        level=config.log_level.upper(),
        format=config.log_format,
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise SpecError(f"expected a comma-separated list of integers, got '{text}'")


def _out_path(args, default: str) -> Path:
    return Path(args.out) if args.out else Path(default)


# ===========================
# Subcommands
# ===========================

def cmd_gen_points(args, config: ToolkitConfig) -> int:
    """Generate a point set and write it in the point-set file format"""
    kind = GeneratorKind.parse(args.kind)
    if kind is GeneratorKind.IMPORTED:
        raise SpecError("gen-points cannot generate IMPORTED sets")
    seed = args.seed if args.seed is not None else config.master_seed

    with console.status(f"[bold green]Generating {kind.value} points...", spinner="dots"):
        if kind is GeneratorKind.HALTON:
            ps = halton_set(args.n, args.dim, seed, scrambled=not args.unscrambled)
        else:
            ps = build_point_set(kind, args.n, args.dim, seed, config, args.ta_iters)

    out = _out_path(args, f"{config.output_dir}/points/{ps.set_id}.txt")
    save_point_set(ps, out)
    console.print(f"[green]✓[/green] Written {ps.n} points ({ps.dim}D) to [cyan]{out}[/cyan]")
    console.print(f"  L2 star discrepancy: [yellow]{l2_star(ps):.6g}[/yellow]")
    if ps.n != args.n:
        console.print(f"  [dim]{kind.value} sets are rounded up to a power of two ({args.n} → {ps.n})[/dim]")
    return EXIT_OK


def cmd_discrepancy(args, config: ToolkitConfig) -> int:
    """L2 star discrepancy of a file or generated set, or the full kind x k x dim grid"""
    seed = args.seed if args.seed is not None else config.master_seed

    if args.grid:
        dims = _int_list(args.dims)
        ks = _int_list(args.ks) if args.ks else list(SUPPORTED_CACHE_SIZES)
        out = _out_path(args, f"{config.output_dir}/discrepancy_grid.csv")
        rows = run_discrepancy_grid(dims, config, out, seed, ks, ta_iters=args.ta_iters,
                                    optimized_dir=args.optimized_dir)
        for dim in dims:
            cells = {(r["kind"], r["k"]): r["l2_star"] for r in rows if r["dim"] == dim}
            for k in ks:
                uniform = cells.get(("UNIFORM", k))
                for kind in ("HALTON", "SOBOL"):
                    other = cells.get((kind, k))
                    if uniform is not None and other is not None and not other < uniform:
                        logger.warning("d=%d k=%d: %s discrepancy %.4g not below uniform mean %.4g",
                                       dim, k, kind, other, uniform)
        return EXIT_OK

    if args.path:
        ps = load_point_set(args.path)
    elif args.kind and args.n and args.dim:
        ps = build_point_set(GeneratorKind.parse(args.kind), args.n, args.dim, seed, config, args.ta_iters)
    else:
        raise SpecError("discrepancy needs --path, --kind/--n/--dim or --grid")

    reports = [discrepancy_report(ps, DiscrepancyMethod.WARNOCK)]
    if args.mc_check:
        reports.append(discrepancy_report(ps, DiscrepancyMethod.MONTECARLO, config.mc_samples, seed))
    if args.linf:
        reports.append(discrepancy_report(ps, DiscrepancyMethod.LINF_EXACT))

    if args.out:
        write_discrepancy_csv(reports, args.out)
    else:
        print(",".join(DISCREPANCY_HEADER))
        for report in reports:
            print(",".join(discrepancy_row(report)))

    if args.mc_check:
        exact, mc = reports[0], reports[1]
        gap = abs(exact.l2_star - mc.l2_star)
        status = "[green]agrees[/green]" if gap <= 3 * mc.mc_std_error else "[red]disagrees[/red]"
        console.print(f"Monte-Carlo check {status}: |Δ| = {gap:.3g}, 3·SE = {3 * mc.mc_std_error:.3g}")
    return EXIT_OK


def cmd_optimize_subset(args, config: ToolkitConfig) -> int:
    """Select a low-discrepancy k-subset of a base set (a file or a Sobol base)"""
    seed = args.seed if args.seed is not None else config.master_seed
    if args.base:
        base = load_point_set(args.base)
    elif args.dim:
        size = optimized_base_size(args.k, config.optimized_base_min, config.optimized_base_factor)
        base = sobol_set(size, args.dim)
    else:
        raise SpecError("optimize-subset needs --base or --dim")

    with console.status("[bold green]Threshold accepting...", spinner="dots"):
        ps = ta_subset(base, args.k, args.ta_iters or config.ta_iters, seed, config.ta_restarts)

    out = _out_path(args, f"{config.output_dir}/optimized/d{ps.dim}_n{ps.n}.txt")
    save_point_set(ps, out)
    baseline = best_random_subset_l2(base, args.k, 10, seed)
    report = discrepancy_report(ps)
    console.print(f"[green]✓[/green] Written {ps.n}-point subset of {base.n} to [cyan]{out}[/cyan]")
    console.print(f"  L2 star: [yellow]{report.l2_star:.6g}[/yellow] "
                  f"(best of 10 random subsets: {baseline:.6g})")
    return EXIT_OK


def cmd_run(args, config: ToolkitConfig) -> int:
    """Execute one CMA-ES run and store its RunRecord"""
    sampler = SamplerSpec.parse(args.sampler)
    seed = args.seed if args.seed is not None else config.master_seed
    budget = args.budget if args.budget else config.budget_multiplier * args.dim
    out = _out_path(args, f"{config.output_dir}/records")

    with console.status(f"[bold green]Running f{args.fid} i{args.iid} d{args.dim} {sampler.tag}...",
                        spinner="dots"):
        record, path = run_single(
            args.fid, args.iid, args.dim, sampler, seed, budget, config, str(out),
            args.lam, args.optimized_dir, args.ta_iters,
        )
    console.print(f"[green]✓[/green] Written run record to [cyan]{path}[/cyan]")
    console.print(f"  {record.evaluations} evaluations, {record.generations} generations, "
                  f"final precision [yellow]{record.final_precision:.3g}[/yellow]")
    return EXIT_OK


def cmd_experiment(args, config: ToolkitConfig) -> int:
    """Run a grid described by a spec file, then analyze it"""
    spec = parse_spec_file(args.spec, config)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out:
        overrides["output_dir"] = args.out
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.ta_iters is not None:
        overrides["ta_iters"] = args.ta_iters
    if args.optimized_dir:
        overrides["optimized_dir"] = args.optimized_dir
    spec = replace(spec, **overrides)

    summary = run_experiment(spec, config, analyze_results=not args.no_analyze)
    if summary.get("failed_checks"):
        console.print(f"[yellow]{summary['failed_checks']} directional check(s) failed[/yellow]")
    return EXIT_OK


def cmd_analyze(args, config: ToolkitConfig) -> int:
    """Aggregate a directory of run records"""
    records_dir = Path(args.records)
    out = _out_path(args, str(records_dir.parent))
    seed = args.seed if args.seed is not None else config.master_seed
    analyze(records_dir, out, config, seed, args.ta_iters, args.optimized_dir)
    return EXIT_OK


def cmd_lambda_study(args, config: ToolkitConfig) -> int:
    """Population-size cycling comparison of cached samplers"""
    run_lambda_study(
        config,
        str(_out_path(args, f"{config.output_dir}/lambda_study")),
        dims=_int_list(args.dims),
        ks=_int_list(args.ks),
        lams=_int_list(args.lams),
        kind=GeneratorKind.parse(args.kind),
        fids=_int_list(args.fids),
        iids=args.iids,
        budget_multiplier=args.budget_multiplier or config.budget_multiplier,
        master_seed=args.seed if args.seed is not None else config.master_seed,
        jobs=args.jobs if args.jobs is not None else config.jobs,
        ta_iters=args.ta_iters,
        optimized_dir=args.optimized_dir,
    )
    return EXIT_OK


COMMANDS = {
    "gen-points": cmd_gen_points,
    "discrepancy": cmd_discrepancy,
    "optimize-subset": cmd_optimize_subset,
    "run": cmd_run,
    "experiment": cmd_experiment,
    "analyze": cmd_analyze,
    "lambda-study": cmd_lambda_study,
}


# ===========================
# Argument parsing
# ===========================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Seed (defaults to master_seed from config)")
    common.add_argument("--out", default=None, help="Output file or directory")
    common.add_argument("--jobs", type=int, default=None, help="Worker processes")
    common.add_argument("--config", default=DEFAULT_CONFIG_PATH, help="Path to algorithm_config.json")
    common.add_argument("--ta-iters", type=int, default=None, help="Threshold accepting iterations")
    common.add_argument("--optimized-dir", default=None, help="Directory of d{dim}_n{k}.txt point sets")

    parser = argparse.ArgumentParser(
        prog="qmc-cmaes",
        description="CMA-ES with low-discrepancy and cached samplers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-points", parents=[common], help="Generate a point set")
    p.add_argument("--kind", required=True, help="uniform, halton, sobol or optimized")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--unscrambled", action="store_true", help="Plain Halton digits")

    p = sub.add_parser("discrepancy", parents=[common], help="L2 star discrepancy report")
    p.add_argument("--path", default=None, help="Point-set file")
    p.add_argument("--kind", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--mc-check", action="store_true", help="Add a Monte-Carlo estimate")
    p.add_argument("--linf", action="store_true", help="Add the exact L-infinity star discrepancy")
    p.add_argument("--grid", action="store_true", help="Compute the kind x k x dim table")
    p.add_argument("--dims", default="2,5,10")
    p.add_argument("--ks", default=None, help="Cache sizes for --grid (default 16..256)")

    p = sub.add_parser("optimize-subset", parents=[common], help="Threshold accepting subset selection")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--dim", type=int, default=None, help="Dimension of the Sobol base")
    p.add_argument("--base", default=None, help="Base point-set file instead of a Sobol base")

    p = sub.add_parser("run", parents=[common], help="Single CMA-ES run")
    p.add_argument("--fid", type=int, required=True)
    p.add_argument("--iid", type=int, default=1)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--sampler", default="uniform-inf", help="KIND-k, e.g. sobol-128 or halton-inf")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--lam", type=int, default=None, help="Population size override")

    p = sub.add_parser("experiment", parents=[common], help="Run a grid from a spec file")
    p.add_argument("spec", help="Experiment spec file")
    p.add_argument("--no-analyze", action="store_true")

    p = sub.add_parser("analyze", parents=[common], help="Aggregate run records")
    p.add_argument("records", help="Directory of run-record JSON files")

    p = sub.add_parser("lambda-study", parents=[common], help="Population-size cycling study")
    p.add_argument("--dims", default="2,5")
    p.add_argument("--ks", default="16,32,64,128")
    p.add_argument("--lams", default="15,16")
    p.add_argument("--kind", default="optimized", help="optimized, imported or sobol")
    p.add_argument("--fids", default=",".join(str(f) for f in DEFAULT_FUNCTION_IDS))
    p.add_argument("--iids", type=int, default=10)
    p.add_argument("--budget-multiplier", type=int, default=None)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        setup_logging(config)
        console.print(Panel.fit(
            "[bold cyan]QMC-CMAES[/bold cyan]\n"
            f"[white]{args.command}[/white]",
            border_style="cyan"
        ))
        return COMMANDS[args.command](args, config)

    except SpecError as e:
        console.print(f"[bold red]Error:[/bold red] {e}")
        return EXIT_SPEC
    except NumericalError as e:
        console.print(f"[bold red]Numerical failure:[/bold red] {e}")
        return EXIT_NUMERICAL
    except ValueError as e:
        console.print(f"[bold red]Error:[/bold red] {e}")
        return EXIT_SPEC
    except Exception as e:
        console.print(f"\n[bold red]Unexpected error: {e}[/bold red]")
        traceback.print_exc()
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
