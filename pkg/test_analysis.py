#!/usr/bin/env python3
"""
Tests for EAF curves, AUC, normalization and the discrepancy/performance fit.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / 'src'))

from errors import SpecError
from models import RunRecord, GeneratorKind
from cmaes import compress_trajectory, default_params, run
from bench import make_problem
from lds import make_endless_source
from analysis import (
    precision_targets, eaf_curve, eaf_auc, normalize_per_dim, discrepancy_performance_fit,
    auc_table, best_at,
)


def _record(per_evaluation, dim=2, sampler=GeneratorKind.UNIFORM, cache_size=None, fid=1, iid=1):
    checkpoints, precisions = compress_trajectory(per_evaluation)
    return RunRecord(
        fid=fid, iid=iid, dim=dim, sampler=sampler, cache_size=cache_size, lam=6, seed=0,
        budget=len(per_evaluation), evaluations=len(per_evaluation), generations=len(per_evaluation) // 6,
        checkpoints=checkpoints, precisions=precisions,
    )


def _constant(value, budget=120, **kwargs):
    return _record([value] * budget, **kwargs)


# ===========================
# Targets and EAF
# ===========================

def test_targets_span_bounds():
    targets = precision_targets(51)
    assert len(targets) == 51
    assert targets[0] == pytest.approx(1e-8)
    assert targets[-1] == 100.0
    assert np.allclose(np.diff(np.log10(targets)), 0.2)


def test_curve_all_attained():
    curve = eaf_curve([_constant(1e-9)])
    assert np.all(curve.values == 1.0)


def test_curve_never_attained():
    assert np.all(eaf_curve([_constant(1e3)]).values == 0.0)


def test_curve_boundary_target_counts_on_equality():
    curve = eaf_curve([_constant(100.0)])
    assert np.allclose(curve.values, 1.0 / 51.0)


def test_curve_averages_runs():
    curve = eaf_curve([_constant(1e-9), _constant(1e3)])
    assert np.allclose(curve.values, 0.5)


def test_curve_grid_is_union_of_checkpoints():
    a = _record([1.0] * 300)
    b = _record([1.0] * 200)
    curve = eaf_curve([a, b])
    assert curve.budget == 200
    assert curve.budget_grid[-1] == 200
    assert set(curve.budget_grid) <= set(a.checkpoints) | set(b.checkpoints)


def test_curve_rejects_mixed_dims():
    with pytest.raises(SpecError):
        eaf_curve([_constant(1.0, dim=2), _constant(1.0, dim=3)])
    with pytest.raises(SpecError):
        eaf_curve([])


def test_adding_solved_run_never_lowers_curve():
    trajectory = list(np.geomspace(1e2, 1e-6, 500))
    base = eaf_curve([_record(trajectory)])
    more = eaf_curve([_record(trajectory), _record([1e-9] * 500)])
    assert np.array_equal(base.budget_grid, more.budget_grid)
    assert np.all(more.values >= base.values)


def test_best_at_before_first_checkpoint():
    record = _constant(1.0)
    values = best_at(record, np.array([0, 1, 120]))
    assert values[0] == np.inf
    assert values[1] == 1.0


# ===========================
# AUC
# ===========================

def test_auc_constant_curves():
    assert eaf_auc(eaf_curve([_constant(1e-9, budget=1000)])) == pytest.approx(1.0)
    assert eaf_auc(eaf_curve([_constant(1e3, budget=1000)])) == 0.0


def test_auc_step_at_log_midpoint():
    budget = 10000
    trajectory = [1e3] * 99 + [1e-9] * (budget - 99)
    auc = eaf_auc(eaf_curve([_record(trajectory)]))
    assert auc == pytest.approx(0.5, abs=0.01)


def test_auc_dominance():
    slow = _record([1e3] * 500 + [1e-9] * 500)
    fast = _record([1e3] * 50 + [1e-9] * 950)
    assert eaf_auc(eaf_curve([fast])) >= eaf_auc(eaf_curve([slow]))


def test_target_count_stability_on_real_runs():
    records = []
    for seed in range(3):
        params = default_params(2, seed=seed)
        source = make_endless_source(GeneratorKind.HALTON, 2, seed=seed)
        records.append(run(make_problem(10, 1, 2), params, source, budget=2000, seed=seed))
    coarse = eaf_auc(eaf_curve(records, n_targets=51, budget=2000))
    fine = eaf_auc(eaf_curve(records, n_targets=101, budget=2000))
    assert abs(coarse - fine) <= 0.02


def test_auc_table_groups_by_cell():
    runs = [
        _constant(1e-9, sampler=GeneratorKind.SOBOL, cache_size=16, fid=1),
        _constant(1e3, sampler=GeneratorKind.SOBOL, cache_size=16, fid=2),
        _constant(1e-9, sampler=GeneratorKind.SOBOL, cache_size=None, fid=1),
    ]
    curves, aucs = auc_table(runs)
    assert set(aucs) == {("SOBOL", 16, 2), ("SOBOL", None, 2)}
    assert aucs[("SOBOL", 16, 2)] == pytest.approx(0.5)
    assert aucs[("SOBOL", None, 2)] == pytest.approx(1.0)


# ===========================
# Normalization
# ===========================

def test_normalize_single_dim():
    table = {("A", None, 2): 0.2, ("B", None, 2): 0.6, ("C", None, 2): 1.0}
    normalized, degenerate = normalize_per_dim(table)
    assert normalized == pytest.approx({("A", None, 2): 0.0, ("B", None, 2): 0.5, ("C", None, 2): 1.0})
    assert degenerate == []


def test_normalize_dims_independently():
    table = {("A", 16, 2): 0.1, ("B", 16, 2): 0.3, ("A", 16, 5): 0.7, ("B", 16, 5): 0.9}
    normalized, _ = normalize_per_dim(table)
    assert normalized[("A", 16, 2)] == 0.0 and normalized[("A", 16, 5)] == 0.0
    assert normalized[("B", 16, 2)] == 1.0 and normalized[("B", 16, 5)] == 1.0


def test_normalize_degenerate_dim(caplog):
    table = {("A", 16, 3): 0.4, ("B", 16, 3): 0.4}
    normalized, degenerate = normalize_per_dim(table)
    assert set(normalized.values()) == {0.5}
    assert degenerate == [3]
    assert "dim=3" in caplog.text


def test_normalize_idempotent():
    table = {("A", 16, 2): 0.15, ("B", 16, 2): 0.45, ("C", 16, 2): 0.9}
    once, _ = normalize_per_dim(table)
    twice, _ = normalize_per_dim(once)
    assert twice == pytest.approx(once)


# ===========================
# Fit
# ===========================

def test_fit_exact_line():
    points = [(x, -0.1 * x + 0.3) for x in (-3.0, -2.0, -1.5, -1.0)]
    fit = discrepancy_performance_fit(points)
    assert fit.slope == pytest.approx(-0.1)
    assert fit.intercept == pytest.approx(0.3)
    assert fit.pearson_r == pytest.approx(-1.0)
    assert not fit.degenerate


def test_fit_constant_auc_is_degenerate():
    fit = discrepancy_performance_fit([(-3.0, 0.5), (-2.0, 0.5), (-1.0, 0.5)])
    assert fit.slope == 0.0
    assert fit.pearson_r == 0.0
    assert fit.degenerate


def test_fit_matches_normal_equations():
    points = [(-2.5, 0.71), (-2.1, 0.66), (-1.8, 0.64), (-1.4, 0.52), (-1.1, 0.55)]
    x = np.array([p[0] for p in points])
    y = np.array([p[1] for p in points])
    A = np.column_stack([x, np.ones_like(x)])
    slope, intercept = np.linalg.solve(A.T @ A, A.T @ y)
    fit = discrepancy_performance_fit(points)
    assert fit.slope == pytest.approx(slope)
    assert fit.intercept == pytest.approx(intercept)
    assert fit.pearson_r == pytest.approx(np.corrcoef(x, y)[0, 1])
    assert fit.n == 5


def test_fit_needs_three_points():
    with pytest.raises(SpecError):
        discrepancy_performance_fit([(0.0, 1.0), (1.0, 0.0)])
