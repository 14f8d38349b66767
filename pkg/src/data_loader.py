"""
Loading of configuration, experiment spec files, run records and discrepancy tables.
"""
import csv
import json
import logging
import os
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, ValidationError

# Load .env file at module import
try:
    from dotenv import load_dotenv
    load_dotenv(override=True)
except ImportError:
    pass

from errors import SpecError
from models import (
    ToolkitConfig, ExperimentSpec, RunRecord, GeneratorKind,
    parse_cache_size,
)

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = "algorithm_config.json"


# ===========================
# algorithm_config.json schema
# ===========================

class CmaesSection(BaseModel):
    sigma0: float = 2.0
    init_bound: float = 4.0
    eigen_floor: float = 1e-30
    target_precision: float = 1e-8


class DiscrepancySection(BaseModel):
    mc_samples: int = 100000
    ta_iters: int = 20000
    ta_restarts: int = 10
    uniform_seeds: int = 100
    optimized_base_min: int = 512
    optimized_base_factor: int = 8


class ExperimentSection(BaseModel):
    budget_multiplier: int = 2000
    master_seed: int = 0
    n_targets: int = 51


class PerformanceSection(BaseModel):
    jobs: int = 1
    progress_report_interval: int = 10


class LoggingSection(BaseModel):
    level: str = "INFO"
    format: str = "%(message)s"


class ToolkitConfigSchema(BaseModel):
    """Schema for algorithm_config.json"""
    output_dir: str = "output"
    cmaes: CmaesSection = Field(default_factory=CmaesSection)
    discrepancy: DiscrepancySection = Field(default_factory=DiscrepancySection)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    performance: PerformanceSection = Field(default_factory=PerformanceSection)
    logging: LoggingSection = Field(default_factory=LoggingSection)


ENV_OVERRIDES = {
    "QMCES_OUTPUT_DIR": ("output_dir", str),
    "QMCES_JOBS": ("jobs", int),
    "QMCES_LOG_LEVEL": ("log_level", str),
    "QMCES_MASTER_SEED": ("master_seed", int),
}


def load_config(config_path: Union[str, Path, None] = DEFAULT_CONFIG_PATH) -> ToolkitConfig:
    """
    Load algorithm_config.json, apply QMCES_* environment overrides.

    A missing file yields the built-in defaults.
    """
    raw = {}
    if config_path is not None and Path(config_path).exists():
        with open(config_path, 'r', encoding='utf-8') as f:
            try:
                raw = json.load(f)
            except json.JSONDecodeError as e:
                raise SpecError(f"invalid JSON in {config_path}: {e}")
    elif config_path is not None:
        logger.info("config file %s not found, using defaults", config_path)

    try:
        schema = ToolkitConfigSchema(**raw)
    except ValidationError as e:
        raise SpecError(f"schema validation failed for {config_path}: {e}")

    values = dict(
        output_dir=schema.output_dir,
        sigma0=schema.cmaes.sigma0,
        init_bound=schema.cmaes.init_bound,
        eigen_floor=schema.cmaes.eigen_floor,
        target_precision=schema.cmaes.target_precision,
        mc_samples=schema.discrepancy.mc_samples,
        ta_iters=schema.discrepancy.ta_iters,
        ta_restarts=schema.discrepancy.ta_restarts,
        uniform_seeds=schema.discrepancy.uniform_seeds,
        optimized_base_min=schema.discrepancy.optimized_base_min,
        optimized_base_factor=schema.discrepancy.optimized_base_factor,
        budget_multiplier=schema.experiment.budget_multiplier,
        master_seed=schema.experiment.master_seed,
        n_targets=schema.experiment.n_targets,
        jobs=schema.performance.jobs,
        progress_report_interval=schema.performance.progress_report_interval,
        log_level=schema.logging.level,
        log_format=schema.logging.format,
    )

    for env_name, (field_name, cast) in ENV_OVERRIDES.items():
        value = os.getenv(env_name)
        if value:
            try:
                values[field_name] = cast(value)
            except ValueError:
                raise SpecError(f"invalid value for {env_name}: {value!r}")

    try:
        return ToolkitConfig(**values)
    except ValueError as e:
        raise SpecError(str(e))


# ===========================
# Experiment spec files
# ===========================

def _int_list(text: str) -> List[int]:
    return [int(v) for v in _items(text)]


def _items(text: str) -> List[str]:
    items = [v.strip() for v in text.split(',')]
    if any(not v for v in items):
        raise ValueError("empty list item")
    return items


def _kinds(text: str) -> List[GeneratorKind]:
    return [GeneratorKind.parse(v) for v in _items(text)]


def _cache_sizes(text: str) -> List[Optional[int]]:
    return [parse_cache_size(v) for v in _items(text)]


def _lambda(text: str) -> Optional[int]:
    return None if text.strip().lower() in ("default", "none") else int(text)


SPEC_KEYS = {
    "dims": ("dims", _int_list),
    "fids": ("fids", _int_list),
    "iids": ("iids", int),
    "samplers": ("samplers", _kinds),
    "cache_sizes": ("cache_sizes", _cache_sizes),
    "lambda": ("lambda_override", _lambda),
    "budget_multiplier": ("budget_multiplier", int),
    "master_seed": ("master_seed", int),
    "output_dir": ("output_dir", str),
    "jobs": ("jobs", int),
    "ta_iters": ("ta_iters", int),
    "optimized_dir": ("optimized_dir", str),
    "target_precision": ("target_precision", float),
    "n_targets": ("n_targets", int),
}


def parse_spec_text(text: str, config: Optional[ToolkitConfig] = None) -> ExperimentSpec:
    """
    Parse `key = value` lines into an ExperimentSpec.

    Blank lines and `#` comments are ignored; lists are comma-separated.
    Unknown keys, duplicates and malformed values raise SpecError with the line number.
    """
    config = config or ToolkitConfig()
    values = dict(
        budget_multiplier=config.budget_multiplier,
        master_seed=config.master_seed,
        output_dir=config.output_dir,
        jobs=config.jobs,
        ta_iters=config.ta_iters,
        target_precision=config.target_precision,
        n_targets=config.n_targets,
    )
    seen = set()
    for line_no, line in enumerate(text.splitlines(), 1):
        content = line.split('#', 1)[0].strip()
        if not content:
            continue
        key, sep, value = content.partition('=')
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise SpecError(f"expected 'key = value', got '{content}'", line=line_no)
        if key not in SPEC_KEYS:
            raise SpecError(f"unknown key '{key}' (valid: {', '.join(sorted(SPEC_KEYS))})", line=line_no)
        if key in seen:
            raise SpecError(f"duplicate key '{key}'", line=line_no)
        if not value:
            raise SpecError(f"missing value for '{key}'", line=line_no)
        seen.add(key)
        field_name, parse = SPEC_KEYS[key]
        try:
            values[field_name] = parse(value)
        except (ValueError, SpecError) as e:
            raise SpecError(f"invalid value for '{key}': {e}", line=line_no)
    return ExperimentSpec(**values)


def parse_spec_file(path: Union[str, Path], config: Optional[ToolkitConfig] = None) -> ExperimentSpec:
    """Parse an experiment spec file"""
    path = Path(path)
    if not path.exists():
        raise SpecError(f"spec file not found: {path}")
    return parse_spec_text(path.read_text(encoding='utf-8'), config)


# ===========================
# Run records and tables
# ===========================

def run_record_from_dict(data: dict) -> RunRecord:
    try:
        return RunRecord(
            fid=int(data["fid"]),
            iid=int(data["iid"]),
            dim=int(data["dim"]),
            sampler=GeneratorKind[data["sampler"]],
            cache_size=data["cache_size"],
            lam=int(data["lam"]),
            seed=int(data["seed"]),
            budget=int(data["budget"]),
            evaluations=int(data["evaluations"]),
            generations=int(data["generations"]),
            checkpoints=[int(t) for t in data["checkpoints"]],
            precisions=[float(p) for p in data["precisions"]],
            batch_hashes=list(data.get("batch_hashes", [])),
            target_precision=float(data.get("target_precision", 1e-8)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SpecError(f"malformed run record: {e}")


def load_run_record(path: Union[str, Path]) -> RunRecord:
    with open(path, 'r', encoding='utf-8') as f:
        return run_record_from_dict(json.load(f))


def load_run_records(records_dir: Union[str, Path]) -> List[RunRecord]:
    """All *.json run records in a directory, in file-name order"""
    records_dir = Path(records_dir)
    if not records_dir.is_dir():
        raise SpecError(f"records directory not found: {records_dir}")
    records = [load_run_record(p) for p in sorted(records_dir.glob("*.json"))]
    logger.info("loaded %d run records from %s", len(records), records_dir)
    return records


def load_discrepancy_grid(csv_path: Union[str, Path]) -> Dict[Tuple[str, int, int], float]:
    """Mean L2 star discrepancy per (KIND, k, dim) from discrepancy_grid.csv"""
    table = {}
    with open(csv_path, 'r', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        for row in reader:
            key = (row['kind'].upper(), int(row['k']), int(row['dim']))
            table[key] = float(row['l2_star'])
    return table
