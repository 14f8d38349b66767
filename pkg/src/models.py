"""
Data models for the derandomized CMA-ES toolkit.
"""
from dataclasses import dataclass, field
from typing import Optional, List, Dict, Any
from enum import Enum

import numpy as np

from errors import SpecError, DimensionMismatchError, OutOfRangeError


SUPPORTED_CACHE_SIZES = (16, 32, 64, 128, 256)
DEFAULT_FUNCTION_IDS = (1, 2, 6, 9, 10, 11, 15, 16, 17, 22)


class GeneratorKind(Enum):
    UNIFORM = "uniform"
    HALTON = "halton"
    SOBOL = "sobol"
    OPTIMIZED = "optimized"
    IMPORTED = "imported"

    @classmethod
    def parse(cls, text: str) -> "GeneratorKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise SpecError(f"unknown generator kind '{text}' (expected one of: {valid})")

    @property
    def has_endless_variant(self) -> bool:
        return self in (GeneratorKind.UNIFORM, GeneratorKind.HALTON, GeneratorKind.SOBOL)


class SourceKind(Enum):
    ENDLESS = "endless"
    CACHED = "cached"


class DiscrepancyMethod(Enum):
    WARNOCK = "WARNOCK"
    MONTECARLO = "MONTECARLO"
    LINF_EXACT = "LINF_EXACT"


def format_cache_size(k: Optional[int]) -> str:
    """Cache size as written in tags and CSV files (None means endless)"""
    return "inf" if k is None else str(k)


def parse_cache_size(text: str) -> Optional[int]:
    token = str(text).strip().lower()
    if token in ("inf", "∞", "none"):
        return None
    try:
        return int(token)
    except ValueError:
        raise SpecError(f"invalid cache size '{text}'")


@dataclass(eq=False)
class PointSet:
    """Finite point set in the half-open unit cube [0,1)^dim"""
    dim: int
    points: np.ndarray
    generator: GeneratorKind
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1 and self.dim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("point set must contain at least one point")
        if pts.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"points have {pts.shape[1]} coordinates, expected dim={self.dim}"
            )
        if not np.all(np.isfinite(pts)) or pts.min() < 0.0 or pts.max() >= 1.0:
            raise OutOfRangeError("every coordinate must lie in [0, 1)")
        self.points = pts

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def set_id(self) -> str:
        return f"{self.generator.value}-d{self.dim}-n{self.n}-s{self.seed}"


@dataclass
class SamplerSpec:
    """Sampler as used in grids and records: a generator kind plus cache size (None = endless)"""
    kind: GeneratorKind
    cache_size: Optional[int] = None

    def __post_init__(self):
        if self.cache_size is None and not self.kind.has_endless_variant:
            raise SpecError(f"{self.kind.value} sampler requires a finite cache size")
        if self.cache_size is not None and self.cache_size < 1:
            raise SpecError("cache_size must be positive")

    @property
    def tag(self) -> str:
        return f"{self.kind.name}-{format_cache_size(self.cache_size)}"

    @classmethod
    def parse(cls, text: str) -> "SamplerSpec":
        """Parse 'sobol-128' or 'uniform-inf' style tags"""
        kind, sep, size = text.strip().rpartition("-")
        if not sep:
            return cls(GeneratorKind.parse(size), None)
        return cls(GeneratorKind.parse(kind), parse_cache_size(size))


@dataclass
class DiscrepancyReport:
    set_id: str
    dim: int
    n: int
    l2_star: float
    method: DiscrepancyMethod
    mc_std_error: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.l2_star <= 1.0:
            raise ValueError(f"l2_star must be in [0, 1], got {self.l2_star}")
        if (self.mc_std_error is not None) != (self.method is DiscrepancyMethod.MONTECARLO):
            raise ValueError("mc_std_error is present exactly for Monte-Carlo reports")


@dataclass
class CmaParams:
    """Strategy parameters, fixed for the lifetime of a run"""
    dim: int
    lam: int
    mu: int
    weights: np.ndarray
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c1: float
    c_mu: float
    chi_n: float
    sigma0: float
    m0: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.lam < 2:
            raise ValueError("lam must be at least 2")
        if not 1 <= self.mu <= self.lam:
            raise ValueError("mu must be in [1, lam]")
        if len(self.weights) != self.mu:
            raise ValueError("weights must have mu entries")
        if np.any(self.weights <= 0) or np.any(np.diff(self.weights) > 0):
            raise ValueError("weights must be positive and nonincreasing")
        if abs(float(np.sum(self.weights)) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        for name in ("c_sigma", "c_c", "c1"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")
        # c_mu is exactly 0 when mu_eff == 1 (mu == 1)
        if self.c_mu < 0.0 or self.c1 + self.c_mu > 1.0 + 1e-15:
            raise ValueError("c_mu must be non-negative with c1 + c_mu <= 1")
        if self.d_sigma <= 0:
            raise ValueError("d_sigma must be positive")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        if len(self.m0) != self.dim:
            raise ValueError("m0 must have dim entries")


@dataclass
class CmaState:
    """Mutable distribution state of one run"""
    m: np.ndarray
    sigma: float
    C: np.ndarray
    B: np.ndarray
    D: np.ndarray
    p_sigma: np.ndarray
    p_c: np.ndarray
    generation: int = 0
    evaluations: int = 0

    @property
    def dim(self) -> int:
        return len(self.m)


@dataclass
class Candidate:
    """One offspring through the three sampling stages"""
    index: int
    raw: np.ndarray
    z: np.ndarray
    y: np.ndarray
    x: np.ndarray
    fitness: Optional[float] = None


@dataclass
class Problem:
    """Benchmark function instance with hidden optimum and rotations"""
    function_id: int
    instance_id: int
    dim: int
    x_opt: np.ndarray
    f_opt: float
    R: np.ndarray
    Q: np.ndarray
    params: Dict[str, Any] = field(default_factory=dict)
    evaluations: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be at least 2")
        if self.instance_id < 1:
            raise ValueError("instance_id must be positive")
        eye = np.eye(self.dim)
        for name in ("R", "Q"):
            M = getattr(self, name)
            if M.shape != (self.dim, self.dim) or np.max(np.abs(M.T @ M - eye)) > 1e-10:
                raise ValueError(f"{name} must be an orthogonal {self.dim}x{self.dim} matrix")


@dataclass
class RunRecord:
    """Best-so-far precision trajectory of one optimization run"""
    fid: int
    iid: int
    dim: int
    sampler: GeneratorKind
    cache_size: Optional[int]
    lam: int
    seed: int
    budget: int
    evaluations: int
    generations: int
    checkpoints: List[int]
    precisions: List[float]
    batch_hashes: List[str] = field(default_factory=list)
    target_precision: float = 1e-8

    def __post_init__(self):
        if len(self.checkpoints) != len(self.precisions):
            raise ValueError("checkpoints and precisions must have equal length")
        if any(b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
            raise ValueError("checkpoints must be strictly increasing")
        if any(b > a for a, b in zip(self.precisions, self.precisions[1:])):
            raise ValueError("precision trajectory must be nonincreasing")
        if self.evaluations > self.budget:
            raise ValueError("evaluations exceed budget")
        if self.checkpoints and self.checkpoints[-1] != self.evaluations:
            raise ValueError("last checkpoint must equal the evaluation count")

    @property
    def sampler_tag(self) -> str:
        return f"{self.sampler.name}-{format_cache_size(self.cache_size)}"

    @property
    def final_precision(self) -> float:
        return self.precisions[-1] if self.precisions else float("inf")


@dataclass
class EafCurve:
    """Attainment fraction as a function of evaluations"""
    budget_grid: np.ndarray
    values: np.ndarray
    n_targets: int
    budget: int

    def __post_init__(self):
        if len(self.budget_grid) != len(self.values):
            raise ValueError("budget_grid and values must have equal length")
        if np.any(np.diff(self.budget_grid) <= 0):
            raise ValueError("budget_grid must be strictly increasing")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValueError("EAF values must lie in [0, 1]")
        if np.any(np.diff(self.values) < -1e-15):
            raise ValueError("EAF values must be nondecreasing")


@dataclass
class FitResult:
    """Least-squares line of AUC on log10 discrepancy for one dimension"""
    slope: float
    intercept: float
    pearson_r: float
    n: int
    degenerate: bool = False


@dataclass
class LambdaStudyRow:
    dim: int
    lam: int
    sampler: GeneratorKind
    k: Optional[int]
    final_eaf: float
    auc: float
    cycle_generations: Optional[int]
    observed_cycle: Optional[int]
    flag: str = ""


@dataclass
class ExperimentSpec:
    """Grid definition for a sweep, parsed from a key = value spec file"""
    dims: List[int] = field(default_factory=lambda: [2, 5, 10])
    fids: List[int] = field(default_factory=lambda: list(DEFAULT_FUNCTION_IDS))
    iids: int = 10
    samplers: List[GeneratorKind] = field(default_factory=lambda: [
        GeneratorKind.UNIFORM, GeneratorKind.HALTON, GeneratorKind.SOBOL, GeneratorKind.OPTIMIZED
    ])
    cache_sizes: List[Optional[int]] = field(default_factory=lambda: [16, 32, 64, 128, 256, None])
    lambda_override: Optional[int] = None
    budget_multiplier: int = 2000
    master_seed: int = 0
    output_dir: str = "output"
    jobs: int = 1
    ta_iters: int = 20000
    optimized_dir: Optional[str] = None
    target_precision: float = 1e-8
    n_targets: int = 51

    def __post_init__(self):
        if not self.dims or any(d < 2 for d in self.dims):
            raise SpecError("dims must be a non-empty list of integers >= 2")
        if not self.fids:
            raise SpecError("fids must not be empty")
        if self.iids < 1:
            raise SpecError("iids must be positive")
        if not self.samplers:
            raise SpecError("samplers must not be empty")
        if not self.cache_sizes:
            raise SpecError("cache_sizes must not be empty")
        for k in self.cache_sizes:
            if k is not None and k not in SUPPORTED_CACHE_SIZES:
                raise SpecError(f"cache size {k} not in {SUPPORTED_CACHE_SIZES} or inf")
        if self.lambda_override is not None and self.lambda_override < 2:
            raise SpecError("lambda must be at least 2")
        if self.budget_multiplier < 100:
            raise SpecError("budget_multiplier must be at least 100")
        if self.jobs < 1:
            raise SpecError("jobs must be positive")
        if self.ta_iters < 1:
            raise SpecError("ta_iters must be positive")
        if not 0 < self.target_precision:
            raise SpecError("target_precision must be positive")
        if self.n_targets < 2:
            raise SpecError("n_targets must be at least 2")

    def sampler_grid(self) -> List[SamplerSpec]:
        """Valid (kind, k) combinations; finite-only kinds skip the endless size"""
        grid = []
        for kind in self.samplers:
            for k in self.cache_sizes:
                if k is None and not kind.has_endless_variant:
                    continue
                grid.append(SamplerSpec(kind, k))
        return grid

    def budget(self, dim: int) -> int:
        return self.budget_multiplier * dim

    @property
    def grid_size(self) -> int:
        return len(self.sampler_grid()) * len(self.dims) * len(self.fids) * self.iids


@dataclass
class ToolkitConfig:
    """Defaults loaded from algorithm_config.json"""
    output_dir: str = "output"

    # CMA-ES
    sigma0: float = 2.0
    init_bound: float = 4.0
    eigen_floor: float = 1e-30
    target_precision: float = 1e-8

    # Discrepancy / subset optimization
    mc_samples: int = 100000
    ta_iters: int = 20000
    ta_restarts: int = 10
    uniform_seeds: int = 100
    optimized_base_min: int = 512
    optimized_base_factor: int = 8

    # Experiment
    budget_multiplier: int = 2000
    master_seed: int = 0
    n_targets: int = 51

    # Performance
    jobs: int = 1
    progress_report_interval: int = 10

    # Logging
    log_level: str = "INFO"
    log_format: str = "%(message)s"

    def __post_init__(self):
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        if self.init_bound <= 0:
            raise ValueError("init_bound must be positive")
        if not 0 < self.eigen_floor < 1:
            raise ValueError("eigen_floor must be in (0, 1)")
        if self.target_precision <= 0:
            raise ValueError("target_precision must be positive")
        if self.mc_samples < 100:
            raise ValueError("mc_samples must be at least 100")
        if self.ta_iters < 1:
            raise ValueError("ta_iters must be positive")
        if self.ta_restarts < 1:
            raise ValueError("ta_restarts must be positive")
        if self.uniform_seeds < 1:
            raise ValueError("uniform_seeds must be positive")
        if self.budget_multiplier < 100:
            raise ValueError("budget_multiplier must be at least 100")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")
        if self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level {self.log_level}")
