#!/usr/bin/env python3
"""
Tests for L2 / L-infinity star discrepancy and Threshold Accepting subset selection.
"""
import sys
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / 'src'))

from errors import SpecError, SizeGuardError
from models import PointSet, GeneratorKind, DiscrepancyMethod, ToolkitConfig
from lds import uniform_set, sobol_set, halton_set
from discrepancy import (
    l2_star, l2_star_squared, l2_star_mc, linf_star_exact, discrepancy_report,
    ta_subset, best_random_subset_l2, optimized_base_size,
)
from experiment import discrepancy_grid


def _points(values, dim=1):
    return PointSet(dim, np.array(values, dtype=np.float64), GeneratorKind.IMPORTED)


# ===========================
# L2 star (closed form)
# ===========================

def test_l2_single_midpoint():
    assert l2_star(_points([0.5])) == pytest.approx(1.0 / np.sqrt(12.0), abs=1e-12)


def test_l2_two_quarter_points():
    assert l2_star(_points([0.25, 0.75])) == pytest.approx(1.0 / np.sqrt(48.0), abs=1e-12)


def test_l2_origin_in_three_dims():
    expected = np.sqrt(1.0 / 27.0 - 0.25 + 1.0)
    assert l2_star(_points([[0.0, 0.0, 0.0]], dim=3)) == pytest.approx(expected, abs=1e-12)
    assert l2_star_squared(_points([[0.0, 0.0, 0.0]], dim=3)) == pytest.approx(1.0 / 27.0 + 0.75)


def test_l2_order_invariant():
    ps = uniform_set(50, 3, seed=4)
    shuffled = PointSet(3, ps.points[::-1].copy(), ps.generator)
    assert l2_star(shuffled) == pytest.approx(l2_star(ps), rel=1e-12)


def test_l2_decreases_for_nested_midpoint_grids():
    values = [l2_star(_points((2 * np.arange(n) + 1) / (2.0 * n))) for n in (1, 2, 4, 8, 16, 32)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_l2_bounded():
    for seed in range(5):
        value = l2_star(uniform_set(30, 4, seed=seed))
        assert 0.0 <= value <= 1.0


# ===========================
# Monte-Carlo oracle
# ===========================

def test_mc_single_midpoint():
    estimate, std_error = l2_star_mc(_points([0.5]), samples=1000000, seed=1)
    assert abs(estimate - 1.0 / np.sqrt(12.0)) <= 3 * std_error


def test_mc_error_scales_with_samples():
    ps = uniform_set(32, 2, seed=2)
    _, coarse = l2_star_mc(ps, samples=100, seed=3)
    _, fine = l2_star_mc(ps, samples=1000000, seed=3)
    assert 30.0 < coarse / fine < 300.0


def _random_cross_check_sets():
    rng = np.random.default_rng(0)
    for trial in range(20):
        dim = int(rng.integers(1, 6))
        n = int(rng.integers(1, 257))
        yield trial, uniform_set(n, dim, seed=trial)


def test_mc_agrees_with_warnock_at_20k_samples_one_miss_allowed():
    agree = 0
    for trial, ps in _random_cross_check_sets():
        estimate, std_error = l2_star_mc(ps, samples=20000, seed=100 + trial)
        agree += abs(estimate - l2_star(ps)) <= 3 * std_error
    assert agree >= 19


@pytest.mark.slow
def test_mc_agrees_with_warnock_at_million_samples():
    for trial, ps in _random_cross_check_sets():
        estimate, std_error = l2_star_mc(ps, samples=1000000, seed=100 + trial)
        assert abs(estimate - l2_star(ps)) <= 3 * std_error, f"set {trial}: n={ps.n} dim={ps.dim}"


def test_mc_rejects_few_samples():
    with pytest.raises(SpecError):
        l2_star_mc(_points([0.5]), samples=10)


# ===========================
# L-infinity star (exact)
# ===========================

def test_linf_single_midpoint():
    assert linf_star_exact(_points([0.5])) == pytest.approx(0.5, abs=1e-12)


def test_linf_two_quarter_points():
    assert linf_star_exact(_points([0.25, 0.75])) == pytest.approx(0.25, abs=1e-12)


def test_linf_regular_grid():
    grid = [[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]]
    # closed box [0, 0.75]^2 holds every point but has volume 9/16
    assert linf_star_exact(_points(grid, dim=2)) == pytest.approx(7.0 / 16.0, abs=1e-12)


def test_linf_size_guard():
    with pytest.raises(SizeGuardError):
        linf_star_exact(uniform_set(256, 3))


# ===========================
# Reports
# ===========================

def test_report_methods():
    ps = _points([0.5])
    warnock = discrepancy_report(ps)
    assert warnock.method is DiscrepancyMethod.WARNOCK
    assert warnock.mc_std_error is None
    assert warnock.set_id == "imported-d1-n1-s0"

    mc = discrepancy_report(ps, DiscrepancyMethod.MONTECARLO, samples=1000, seed=0)
    assert mc.mc_std_error is not None and mc.mc_std_error > 0

    linf = discrepancy_report(ps, DiscrepancyMethod.LINF_EXACT)
    assert linf.l2_star == pytest.approx(0.5)


# ===========================
# Threshold Accepting
# ===========================

def test_ta_full_subset_returns_base():
    base = sobol_set(16, 2)
    assert ta_subset(base, 16) is base


def test_ta_finds_brute_force_optimum():
    base = _points([0.1, 0.3, 0.5, 0.9])
    best = min(
        l2_star(_points(base.points[list(c), 0])) for c in combinations(range(4), 2)
    )
    result = ta_subset(base, 2, iters=500, seed=0)
    assert result.generator is GeneratorKind.OPTIMIZED
    assert result.n == 2
    assert l2_star(result) == pytest.approx(best, abs=1e-12)


def test_ta_beats_random_baseline():
    base = sobol_set(512, 5)
    result = ta_subset(base, 64, iters=20000, seed=1)
    assert result.n == 64
    assert l2_star(result) <= best_random_subset_l2(base, 64, tries=10, seed=1) + 1e-12


def test_ta_subset_points_come_from_base():
    base = halton_set(64, 2, seed=3)
    result = ta_subset(base, 8, iters=1000, seed=2)
    rows = {tuple(p) for p in base.points}
    assert all(tuple(p) in rows for p in result.points)
    assert len({tuple(p) for p in result.points}) == 8


def test_ta_rejects_oversized_k():
    with pytest.raises(SpecError):
        ta_subset(sobol_set(8, 2), 9)


def test_optimized_base_size():
    assert optimized_base_size(16) == 512
    assert optimized_base_size(128) == 1024


# ===========================
# Kind x k grid
# ===========================

def test_grid_low_discrepancy_beats_uniform_mean():
    config = ToolkitConfig(uniform_seeds=20, ta_iters=2000)
    rows = discrepancy_grid(
        [2], [16, 64], [GeneratorKind.UNIFORM, GeneratorKind.HALTON, GeneratorKind.SOBOL], config
    )
    table = {(r["kind"], r["k"]): r["l2_star"] for r in rows}
    for k in (16, 64):
        assert table[("UNIFORM", k)] > table[("HALTON", k)]
        assert table[("UNIFORM", k)] > table[("SOBOL", k)]
    normalized = [r["log10_l2_normalized"] for r in rows]
    assert min(normalized) == 0.0 and max(normalized) == 1.0


@pytest.mark.slow
@pytest.mark.parametrize("dim", [2, 5, 10])
def test_full_grid_ordering(dim):
    ks = [16, 32, 64, 128, 256]
    config = ToolkitConfig(uniform_seeds=100)
    rows = discrepancy_grid(
        [dim], ks, [GeneratorKind.UNIFORM, GeneratorKind.HALTON, GeneratorKind.SOBOL], config
    )
    table = {(r["kind"], r["k"]): r["l2_star"] for r in rows}
    for k in ks:
        assert table[("UNIFORM", k)] > table[("HALTON", k)]
        assert table[("UNIFORM", k)] > table[("SOBOL", k)]

    base = sobol_set(512, dim)
    for k in ks:
        result = ta_subset(base, k, iters=5000, seed=k)
        assert l2_star(result) <= best_random_subset_l2(base, k, tries=10, seed=k) + 1e-12
