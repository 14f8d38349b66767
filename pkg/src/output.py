"""
Output generation: CSV tables, run-record JSON and plot data.
"""
import csv
import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from rich.console import Console
from rich.table import Table

from models import (
    RunRecord, EafCurve, FitResult, DiscrepancyReport, LambdaStudyRow,
    format_cache_size,
)

console = Console()

PathLike = Union[str, Path]


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ''
    return f"{value:.12g}"


def _open_csv(path: PathLike):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, 'w', newline='', encoding='utf-8')


# ===========================
# Discrepancy tables
# ===========================

DISCREPANCY_HEADER = ['set_id', 'dim', 'n', 'method', 'l2_star', 'mc_std_error']


def discrepancy_row(report: DiscrepancyReport) -> List[str]:
    return [
        report.set_id, str(report.dim), str(report.n), report.method.value,
        _fmt(report.l2_star), _fmt(report.mc_std_error),
    ]


def write_discrepancy_csv(reports: Sequence[DiscrepancyReport], output_path: PathLike) -> None:
    """Write DiscrepancyReport rows"""
    with _open_csv(output_path) as f:
        writer = csv.writer(f)
        writer.writerow(DISCREPANCY_HEADER)
        for report in reports:
            writer.writerow(discrepancy_row(report))

    console.print(f"[green]✓[/green] Written {len(reports)} discrepancy rows to [cyan]{output_path}[/cyan]")


def write_discrepancy_grid_csv(rows: Sequence[dict], output_path: PathLike) -> None:
    """Write the kind x k x dim discrepancy grid"""
    with _open_csv(output_path) as f:
        writer = csv.writer(f)
        writer.writerow(['kind', 'k', 'dim', 'l2_star', 'log10_l2_star', 'log10_l2_normalized'])
        for row in rows:
            writer.writerow([
                row['kind'], row['k'], row['dim'],
                _fmt(row['l2_star']), _fmt(row['log10_l2_star']), _fmt(row['log10_l2_normalized']),
            ])

    console.print(f"[green]✓[/green] Written {len(rows)} grid cells to [cyan]{output_path}[/cyan]")


# ===========================
# Run records
# ===========================

def run_record_to_dict(record: RunRecord) -> dict:
    return {
        "fid": record.fid,
        "iid": record.iid,
        "dim": record.dim,
        "sampler": record.sampler.name,
        "cache_size": record.cache_size,
        "lam": record.lam,
        "seed": record.seed,
        "budget": record.budget,
        "evaluations": record.evaluations,
        "generations": record.generations,
        "checkpoints": list(record.checkpoints),
        "precisions": [float(p) for p in record.precisions],
        "batch_hashes": list(record.batch_hashes),
        "target_precision": record.target_precision,
    }


def write_run_record(record: RunRecord, output_path: PathLike) -> None:
    """Write a record as sorted-key JSON; identical records give identical bytes"""
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, 'w', encoding='utf-8') as f:
        json.dump(run_record_to_dict(record), f, sort_keys=True, indent=1, allow_nan=False)
        f.write("\n")


# ===========================
# Analysis tables
# ===========================

def write_eaf_csv(curves: Dict[Tuple, EafCurve], output_path: PathLike) -> None:
    """Write eaf_curve.csv (sampler,k,dim,budget,value); keys may carry a trailing fid"""
    with_fid = any(len(key) > 3 for key in curves)
    rows = 0
    with _open_csv(output_path) as f:
        writer = csv.writer(f)
        header = ['sampler', 'k', 'dim'] + (['fid'] if with_fid else []) + ['budget', 'value']
        writer.writerow(header)
        for key, curve in curves.items():
            sampler, k, dim = key[:3]
            prefix = [sampler, format_cache_size(k), dim] + (list(key[3:4]) if with_fid else [])
            for budget, value in zip(curve.budget_grid, curve.values):
                writer.writerow(prefix + [int(budget), _fmt(float(value))])
                rows += 1

    console.print(f"[green]✓[/green] Written {rows} EAF points to [cyan]{output_path}[/cyan]")


def write_auc_csv(
    aucs: Dict[Tuple, float],
    normalized: Dict[Tuple, float],
    output_path: PathLike
) -> None:
    """Write auc.csv (sampler,k,dim,auc,auc_normalized)"""
    with _open_csv(output_path) as f:
        writer = csv.writer(f)
        writer.writerow(['sampler', 'k', 'dim', 'auc', 'auc_normalized'])
        for (sampler, k, dim), auc in aucs.items():
            writer.writerow([sampler, format_cache_size(k), dim, _fmt(auc), _fmt(normalized[(sampler, k, dim)])])

    console.print(f"[green]✓[/green] Written {len(aucs)} AUC rows to [cyan]{output_path}[/cyan]")


def write_fit_csv(fits: Dict[int, FitResult], output_path: PathLike) -> None:
    """Write fit.csv (dim,slope,intercept,pearson_r)"""
    with _open_csv(output_path) as f:
        writer = csv.writer(f)
        writer.writerow(['dim', 'slope', 'intercept', 'pearson_r'])
        for dim in sorted(fits):
            fit = fits[dim]
            writer.writerow([dim, _fmt(fit.slope), _fmt(fit.intercept), _fmt(fit.pearson_r)])

    console.print(f"[green]✓[/green] Written {len(fits)} regression rows to [cyan]{output_path}[/cyan]")


def write_lambda_study_csv(rows: Sequence[LambdaStudyRow], output_path: PathLike) -> None:
    with _open_csv(output_path) as f:
        writer = csv.writer(f)
        writer.writerow([
            'dim', 'lam', 'sampler', 'k', 'final_eaf', 'auc',
            'cycle_generations', 'observed_cycle', 'flag'
        ])
        for r in rows:
            writer.writerow([
                r.dim, r.lam, r.sampler.name, format_cache_size(r.k),
                _fmt(r.final_eaf), _fmt(r.auc),
                '' if r.cycle_generations is None else r.cycle_generations,
                '' if r.observed_cycle is None else r.observed_cycle,
                r.flag,
            ])

    console.print(f"[green]✓[/green] Written {len(rows)} lambda-study rows to [cyan]{output_path}[/cyan]")


def write_plotdata_json(payload: dict, output_path: PathLike) -> None:
    """Write ready-to-plot series"""
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, sort_keys=True, indent=2, allow_nan=False)
        f.write("\n")

    console.print(f"[green]✓[/green] Written plot data to [cyan]{output_path}[/cyan]")


# ===========================
# Console summaries
# ===========================

def print_auc_table(aucs: Dict[Tuple, float], normalized: Dict[Tuple, float]) -> None:
    table = Table(title="Area under the EAF curve", show_lines=False)
    table.add_column("Sampler", style="cyan")
    table.add_column("k", justify="right")
    table.add_column("Dim", justify="right")
    table.add_column("AUC", justify="right", style="green")
    table.add_column("Normalized", justify="right")
    for (sampler, k, dim), auc in aucs.items():
        table.add_row(sampler, format_cache_size(k), str(dim), f"{auc:.4f}", f"{normalized[(sampler, k, dim)]:.3f}")
    console.print(table)


def print_checks(checks: Sequence[dict]) -> None:
    """Show pass / advisory / fail status of directional checks"""
    table = Table(title="Directional checks")
    table.add_column("Check", style="cyan")
    table.add_column("Detail")
    table.add_column("Status", justify="center")
    styles = {"pass": "[green]PASS[/green]", "fail": "[red]FAIL[/red]",
              "advisory": "[yellow]WARN[/yellow]", "skipped": "[dim]SKIP[/dim]"}
    for check in checks:
        table.add_row(check["name"], check["detail"], styles.get(check["status"], check["status"]))
    console.print(table)
