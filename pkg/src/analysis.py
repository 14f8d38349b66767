"""
EAF curves, AUC, per-dimension normalization and discrepancy-vs-performance fits.
"""
import logging
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple, Hashable

import numpy as np
from scipy.integrate import trapezoid

from errors import SpecError
from models import RunRecord, EafCurve, FitResult

logger = logging.getLogger(__name__)

TARGET_LOW = 1e-8
TARGET_HIGH = 1e2

CellKey = Tuple[str, Optional[int], int]


def precision_targets(n_targets: int = 51) -> np.ndarray:
    """Log-uniform precision targets spanning [1e-8, 1e2]"""
    if n_targets < 2:
        raise SpecError("n_targets must be at least 2")
    return 10.0 ** np.linspace(np.log10(TARGET_LOW), np.log10(TARGET_HIGH), n_targets)


def best_at(run: RunRecord, evaluations: np.ndarray) -> np.ndarray:
    """Best-so-far precision after each evaluation count (inf before the first checkpoint)"""
    checkpoints = np.asarray(run.checkpoints, dtype=np.int64)
    precisions = np.asarray(run.precisions, dtype=np.float64)
    idx = np.searchsorted(checkpoints, evaluations, side='right') - 1
    values = np.full(len(evaluations), np.inf)
    known = idx >= 0
    values[known] = precisions[idx[known]]
    return values


def eaf_curve(runs: Sequence[RunRecord], n_targets: int = 51, budget: Optional[int] = None) -> EafCurve:
    """
    Mean fraction of attained targets over runs, as a function of evaluations.

    A target counts as attained when best precision <= target. The budget grid is
    the union of run checkpoints up to the common budget (smallest run budget
    unless `budget` is given), with the budget itself appended.
    """
    if not runs:
        raise SpecError("eaf_curve needs at least one run")
    dims = {r.dim for r in runs}
    if len(dims) > 1:
        raise SpecError(f"runs mix dimensions {sorted(dims)}")

    B = budget if budget is not None else min(r.budget for r in runs)
    targets = precision_targets(n_targets)

    grid = {B}
    for r in runs:
        grid.update(t for t in r.checkpoints if t <= B)
    grid = np.array(sorted(grid), dtype=np.int64)

    total = np.zeros(len(grid))
    for r in runs:
        precision = best_at(r, grid)
        total += np.mean(precision[:, None] <= targets[None, :], axis=1)

    values = np.clip(total / len(runs), 0.0, 1.0)
    return EafCurve(budget_grid=grid, values=values, n_targets=n_targets, budget=B)


def eaf_auc(curve: EafCurve, budget: Optional[int] = None) -> float:
    """
    Area under the EAF over log10(evaluations) on [1, B], normalized by log10(B).

    Args:
        curve: EAF curve
        budget: Upper limit B (defaults to the curve's budget)

    Returns:
        AUC in [0, 1]
    """
    B = budget if budget is not None else curve.budget
    grid = np.asarray(curve.budget_grid, dtype=np.float64)
    values = np.asarray(curve.values, dtype=np.float64)
    keep = grid <= B
    grid, values = grid[keep], values[keep]

    if len(grid) == 0:
        return 0.0
    if B <= 1:
        return float(values[0])
    if grid[0] > 1:
        grid = np.concatenate(([1.0], grid))
        values = np.concatenate(([0.0], values))
    if grid[-1] < B:
        grid = np.append(grid, float(B))
        values = np.append(values, values[-1])

    area = trapezoid(values, np.log10(grid))
    return float(np.clip(area / np.log10(B), 0.0, 1.0))


def normalize_per_dim(
    auc_table: Dict[Tuple, float],
    dim_index: int = 2
) -> Tuple[Dict[Tuple, float], List[int]]:
    """
    Min-max normalize values within each dimension.

    Args:
        auc_table: Map from a key tuple (e.g. (sampler, k, dim)) to a value
        dim_index: Position of the dimension inside the key

    Returns:
        (normalized map with the same keys, dims that were degenerate and set to 0.5)
    """
    by_dim: Dict[Hashable, List[Tuple]] = defaultdict(list)
    for key in auc_table:
        by_dim[key[dim_index]].append(key)

    normalized = {}
    degenerate = []
    for dim in sorted(by_dim):
        keys = by_dim[dim]
        values = np.array([auc_table[k] for k in keys], dtype=np.float64)
        low, high = float(values.min()), float(values.max())
        if high - low <= 0.0:
            degenerate.append(dim)
            logger.warning("all values equal for dim=%s; normalized to 0.5", dim)
            for k in keys:
                normalized[k] = 0.5
            continue
        for k, v in zip(keys, values):
            normalized[k] = float((v - low) / (high - low))
    return normalized, degenerate


def discrepancy_performance_fit(points: Sequence[Tuple[float, float]]) -> FitResult:
    """
    Ordinary least squares of AUC on log10 L2 star discrepancy plus Pearson r.

    Args:
        points: (log10_l2, auc) pairs of one dimension (at least 3)

    Returns:
        FitResult; a zero-variance input gives slope 0, r 0 and degenerate=True
    """
    if len(points) < 3:
        raise SpecError(f"fit needs at least 3 points, got {len(points)}")
    data = np.asarray(points, dtype=np.float64)
    x, y = data[:, 0], data[:, 1]
    x_mean, y_mean = float(x.mean()), float(y.mean())
    sxx = float(np.sum((x - x_mean) ** 2))
    syy = float(np.sum((y - y_mean) ** 2))
    sxy = float(np.sum((x - x_mean) * (y - y_mean)))

    if sxx == 0.0:
        logger.warning("degenerate fit: all discrepancy values equal")
        return FitResult(slope=0.0, intercept=y_mean, pearson_r=0.0, n=len(x), degenerate=True)

    slope = sxy / sxx
    intercept = y_mean - slope * x_mean
    if syy == 0.0:
        logger.warning("degenerate fit: all AUC values equal")
        return FitResult(slope=slope, intercept=intercept, pearson_r=0.0, n=len(x), degenerate=True)

    r = sxy / np.sqrt(sxx * syy)
    return FitResult(
        slope=slope,
        intercept=intercept,
        pearson_r=float(np.clip(r, -1.0, 1.0)),
        n=len(x),
    )


# ===========================
# Aggregation helpers
# ===========================

def cell_key(run: RunRecord) -> CellKey:
    return (run.sampler.name, run.cache_size, run.dim)


def sort_cell_key(key: CellKey) -> tuple:
    sampler, k, dim = key
    return (dim, sampler, float('inf') if k is None else k)


def group_runs(runs: Sequence[RunRecord]) -> Dict[CellKey, List[RunRecord]]:
    """Runs grouped by (sampler, k, dim), each group sorted by (fid, iid, seed)"""
    groups: Dict[CellKey, List[RunRecord]] = defaultdict(list)
    for r in runs:
        groups[cell_key(r)].append(r)
    return {
        key: sorted(groups[key], key=lambda r: (r.fid, r.iid, r.seed))
        for key in sorted(groups, key=sort_cell_key)
    }


def auc_table(
    runs: Sequence[RunRecord],
    n_targets: int = 51
) -> Tuple[Dict[CellKey, EafCurve], Dict[CellKey, float]]:
    """EAF curve and AUC per (sampler, k, dim) cell, aggregated over functions and instances"""
    curves = {}
    aucs = {}
    for key, group in group_runs(runs).items():
        curve = eaf_curve(group, n_targets)
        curves[key] = curve
        aucs[key] = eaf_auc(curve)
    return curves, aucs
