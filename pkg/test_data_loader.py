#!/usr/bin/env python3
"""
Tests for configuration, experiment spec files and record loading.
"""
import json
import sys
from pathlib import Path

import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / 'src'))

from errors import SpecError
from models import GeneratorKind, ToolkitConfig, RunRecord
from data_loader import (
    load_config, parse_spec_text, parse_spec_file, load_run_record, load_run_records, load_discrepancy_grid,
)
from output import write_run_record, write_discrepancy_grid_csv


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("QMCES_OUTPUT_DIR", "QMCES_JOBS", "QMCES_LOG_LEVEL", "QMCES_MASTER_SEED"):
        monkeypatch.delenv(name, raising=False)


# ===========================
# algorithm_config.json
# ===========================

def test_repository_config_loads():
    config = load_config(Path(__file__).parent / "algorithm_config.json")
    assert config.sigma0 == 2.0
    assert config.ta_iters == 20000
    assert config.n_targets == 51


def test_missing_config_gives_defaults(tmp_path):
    config = load_config(tmp_path / "absent.json")
    assert config == ToolkitConfig()


def test_partial_config_keeps_other_defaults(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"cmaes": {"sigma0": 1.5}, "performance": {"jobs": 3}}))
    config = load_config(path)
    assert config.sigma0 == 1.5
    assert config.jobs == 3
    assert config.init_bound == 4.0


def test_config_schema_errors(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"cmaes": {"sigma0": "wide"}}))
    with pytest.raises(SpecError, match="schema validation failed"):
        load_config(path)

    path.write_text(json.dumps({"cmaes": {"sigma0": -1.0}}))
    with pytest.raises(SpecError, match="sigma0"):
        load_config(path)

    path.write_text("{ not json")
    with pytest.raises(SpecError, match="invalid JSON"):
        load_config(path)


def test_environment_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("QMCES_JOBS", "6")
    monkeypatch.setenv("QMCES_OUTPUT_DIR", "elsewhere")
    monkeypatch.setenv("QMCES_MASTER_SEED", "42")
    config = load_config(tmp_path / "absent.json")
    assert config.jobs == 6
    assert config.output_dir == "elsewhere"
    assert config.master_seed == 42

    monkeypatch.setenv("QMCES_JOBS", "many")
    with pytest.raises(SpecError, match="QMCES_JOBS"):
        load_config(tmp_path / "absent.json")


# ===========================
# Spec files
# ===========================

SPEC = """
# two samplers, one cache size
dims = 2
fids = 1, 10
iids = 2
samplers = uniform, sobol
cache_sizes = inf   # endless only
budget_multiplier = 200
master_seed = 5
"""


def test_parse_spec():
    spec = parse_spec_text(SPEC)
    assert spec.dims == [2]
    assert spec.fids == [1, 10]
    assert spec.samplers == [GeneratorKind.UNIFORM, GeneratorKind.SOBOL]
    assert spec.cache_sizes == [None]
    assert spec.master_seed == 5
    assert spec.budget(2) == 400
    assert spec.grid_size == 8


def test_spec_defaults_come_from_config():
    config = ToolkitConfig(budget_multiplier=300, jobs=4, ta_iters=500)
    spec = parse_spec_text("dims = 5\n", config)
    assert spec.budget_multiplier == 300
    assert spec.jobs == 4
    assert spec.ta_iters == 500
    assert spec.lambda_override is None


def test_spec_lambda_and_optimized_dir():
    spec = parse_spec_text("lambda = 16\noptimized_dir = sets\n")
    assert spec.lambda_override == 16
    assert spec.optimized_dir == "sets"
    assert parse_spec_text("lambda = default\n").lambda_override is None


def test_optimized_grid_skips_endless_cell():
    spec = parse_spec_text("samplers = optimized, halton\ncache_sizes = 16, inf\n")
    tags = [s.tag for s in spec.sampler_grid()]
    assert tags == ["OPTIMIZED-16", "HALTON-16", "HALTON-inf"]


@pytest.mark.parametrize("text, line, message", [
    ("dims = 2\ncolour = blue\n", 2, "unknown key"),
    ("dims = 2\n\ndims = 5\n", 3, "duplicate key"),
    ("# header\nfids 1, 2\n", 2, "key = value"),
    ("iids =\n", 1, "missing value"),
    ("dims = 2\ncache_sizes = 16, 48\n", None, "cache size 48"),
    ("samplers = sobol, lattice\n", 1, "unknown generator kind"),
    ("dims = two\n", 1, "invalid value for 'dims'"),
])
def test_spec_errors_report_line(text, line, message):
    with pytest.raises(SpecError, match=message) as exc:
        parse_spec_text(text)
    if line is not None:
        assert exc.value.line == line
        assert str(exc.value).startswith(f"line {line}:")


def test_spec_budget_multiplier_minimum():
    with pytest.raises(SpecError, match="budget_multiplier"):
        parse_spec_text("budget_multiplier = 50\n")


def test_parse_spec_file(tmp_path):
    path = tmp_path / "grid.spec"
    path.write_text(SPEC)
    assert parse_spec_file(path).grid_size == 8
    with pytest.raises(SpecError):
        parse_spec_file(tmp_path / "missing.spec")


def test_repository_spec_files_parse():
    root = Path(__file__).parent
    desk = parse_spec_file(root / "desk_experiment.spec")
    assert desk.dims == [2, 5, 10]
    assert len(desk.sampler_grid()) == 4 * 5 + 3
    assert parse_spec_file(root / "smoke_experiment.spec").grid_size == 2 * 2 * 2 * 2


# ===========================
# Records and tables
# ===========================

def _record(**overrides):
    values = dict(
        fid=1, iid=1, dim=2, sampler=GeneratorKind.SOBOL, cache_size=16, lam=6, seed=2 ** 63 + 5,
        budget=12, evaluations=12, generations=2, checkpoints=list(range(1, 13)),
        precisions=[10.0, 5.0, 5.0, 2.0, 1.0, 1.0, 0.5, 0.25, 0.25, 0.1, 0.1, 0.01],
        batch_hashes=["ab", "cd"],
    )
    values.update(overrides)
    return RunRecord(**values)


def test_record_file_round_trip(tmp_path):
    record = _record()
    write_run_record(record, tmp_path / "r.json")
    loaded = load_run_record(tmp_path / "r.json")
    assert loaded == record


def test_record_with_endless_sampler(tmp_path):
    record = _record(sampler=GeneratorKind.HALTON, cache_size=None)
    write_run_record(record, tmp_path / "r.json")
    assert load_run_record(tmp_path / "r.json").cache_size is None


def test_malformed_record_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"fid": 1}))
    with pytest.raises(SpecError, match="malformed run record"):
        load_run_record(path)


def test_records_loaded_in_name_order(tmp_path):
    write_run_record(_record(iid=2), tmp_path / "b.json")
    write_run_record(_record(iid=1), tmp_path / "a.json")
    assert [r.iid for r in load_run_records(tmp_path)] == [1, 2]
    with pytest.raises(SpecError):
        load_run_records(tmp_path / "nowhere")


def test_discrepancy_grid_round_trip(tmp_path):
    rows = [
        {"kind": "SOBOL", "k": 16, "dim": 2, "l2_star": 0.02, "log10_l2_star": -1.69897, "log10_l2_normalized": 0.0},
        {"kind": "UNIFORM", "k": 16, "dim": 2, "l2_star": 0.09, "log10_l2_star": -1.04576, "log10_l2_normalized": 1.0},
    ]
    path = tmp_path / "grid.csv"
    write_discrepancy_grid_csv(rows, path)
    table = load_discrepancy_grid(path)
    assert table == {("SOBOL", 16, 2): 0.02, ("UNIFORM", 16, 2): 0.09}
