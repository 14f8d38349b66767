"""
CMA-ES with a pluggable unit-cube sampler.

Offspring are produced in three stages: a raw point u from the sampler source,
z = inverse-normal-CDF(u), y = B diag(D) z, x = m + sigma * y.
"""
import hashlib
import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from errors import SpecError, NumericalError
from gauss import sanitize_and_transform
from models import CmaParams, CmaState, Candidate, Problem, RunRecord
from bench import evaluate_batch

logger = logging.getLogger(__name__)

EIGEN_FLOOR = 1e-30
DEFAULT_SIGMA0 = 2.0
DEFAULT_INIT_BOUND = 4.0


def default_population_size(d: int) -> int:
    return 4 + int(math.floor(3.0 * math.log(d)))


def default_params(
    d: int,
    lambda_override: Optional[int] = None,
    sigma0: float = DEFAULT_SIGMA0,
    m0: Optional[np.ndarray] = None,
    seed: int = 0,
    init_bound: float = DEFAULT_INIT_BOUND
) -> CmaParams:
    """
    Standard default strategy parameters.

    Args:
        d: Search-space dimension
        lambda_override: Population size instead of 4 + floor(3 ln d)
        sigma0: Initial step size
        m0: Initial mean; drawn from U[-init_bound, init_bound]^d with `seed` if omitted
        seed: Seed for the initial mean
        init_bound: Half-width of the initial-mean box

    Returns:
        CmaParams
    """
    if d < 1:
        raise SpecError("d must be positive")
    if lambda_override is not None and lambda_override < 2:
        raise SpecError(f"lambda must be at least 2, got {lambda_override}")

    lam = lambda_override if lambda_override is not None else default_population_size(d)
    mu = lam // 2
    raw = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_eff = 1.0 / float(np.sum(weights ** 2))

    c_sigma = (mu_eff + 2.0) / (d + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (d + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_eff / d) / (d + 4.0 + 2.0 * mu_eff / d)
    c1 = 2.0 / ((d + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((d + 2.0) ** 2 + mu_eff))
    chi_n = math.sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d))

    if m0 is None:
        m0 = np.random.default_rng(seed).uniform(-init_bound, init_bound, size=d)
    else:
        m0 = np.asarray(m0, dtype=np.float64).copy()

    return CmaParams(
        dim=d,
        lam=lam,
        mu=mu,
        weights=weights,
        mu_eff=mu_eff,
        c_sigma=c_sigma,
        d_sigma=d_sigma,
        c_c=c_c,
        c1=c1,
        c_mu=max(c_mu, 0.0),
        chi_n=chi_n,
        sigma0=sigma0,
        m0=m0,
    )


def init_state(params: CmaParams) -> CmaState:
    d = params.dim
    return CmaState(
        m=params.m0.copy(),
        sigma=params.sigma0,
        C=np.eye(d),
        B=np.eye(d),
        D=np.ones(d),
        p_sigma=np.zeros(d),
        p_c=np.zeros(d),
    )


def batch_hash(raw: np.ndarray) -> str:
    """Short digest of a raw unit-cube batch"""
    return hashlib.blake2b(np.ascontiguousarray(raw, dtype=np.float64).tobytes(), digest_size=8).hexdigest()


def observed_cycle(hashes: Sequence[str]) -> Optional[int]:
    """Smallest period p with hashes[i] == hashes[i + p] for every i; None if no period fits"""
    n = len(hashes)
    for p in range(1, n):
        if all(hashes[i] == hashes[i + p] for i in range(n - p)):
            return p
    return None


def ask(state: CmaState, params: CmaParams, source) -> List[Candidate]:
    """Draw lambda raw points in stream order and push them through the three stages"""
    raw = source.draw(params.lam)
    Z = sanitize_and_transform(raw)
    Y = (Z * state.D) @ state.B.T
    X = state.m + state.sigma * Y
    return [
        Candidate(index=i, raw=raw[i], z=Z[i], y=Y[i], x=X[i])
        for i in range(params.lam)
    ]


def _refresh_eigensystem(state: CmaState, eigen_floor: float) -> None:
    eigenvalues, B = np.linalg.eigh(state.C)
    top = float(np.max(eigenvalues))
    if not np.isfinite(top) or top <= 0.0:
        raise NumericalError(f"covariance matrix lost positive definiteness (max eigenvalue {top})")
    floor = eigen_floor * top
    low = eigenvalues < floor
    if low.any():
        logger.debug("repairing %d eigenvalue(s) below %.3g", int(low.sum()), floor)
        eigenvalues = np.where(low, floor, eigenvalues)
        C = (B * eigenvalues) @ B.T
        state.C = (C + C.T) / 2.0
    state.B = B
    state.D = np.sqrt(eigenvalues)


def tell(
    state: CmaState,
    params: CmaParams,
    candidates: List[Candidate],
    eigen_floor: float = EIGEN_FLOOR
) -> CmaState:
    """
    Update mean, paths, step size and covariance from evaluated candidates.

    Candidates are ranked by (fitness, index), so the input order does not
    matter. The state is updated in place and returned.
    """
    if len(candidates) != params.lam:
        raise SpecError(f"expected {params.lam} candidates, got {len(candidates)}")
    for c in candidates:
        if c.fitness is None or not np.isfinite(c.fitness):
            raise SpecError(f"candidate {c.index} has non-finite fitness {c.fitness}")

    d = params.dim
    ranked = sorted(candidates, key=lambda c: (c.fitness, c.index))
    Y = np.array([c.y for c in ranked[:params.mu]])
    y_w = params.weights @ Y

    state.m = state.m + state.sigma * y_w

    c_sigma, c_c = params.c_sigma, params.c_c
    inv_sqrt_y = state.B @ ((state.B.T @ y_w) / state.D)
    state.p_sigma = ((1.0 - c_sigma) * state.p_sigma
                     + math.sqrt(c_sigma * (2.0 - c_sigma) * params.mu_eff) * inv_sqrt_y)
    norm_ps = float(np.linalg.norm(state.p_sigma))

    correction = math.sqrt(1.0 - (1.0 - c_sigma) ** (2 * (state.generation + 1)))
    h_sigma = 1.0 if norm_ps / correction < (1.4 + 2.0 / (d + 1.0)) * params.chi_n else 0.0

    state.p_c = ((1.0 - c_c) * state.p_c
                 + h_sigma * math.sqrt(c_c * (2.0 - c_c) * params.mu_eff) * y_w)
    delta_h = (1.0 - h_sigma) * c_c * (2.0 - c_c)

    rank_one = np.outer(state.p_c, state.p_c) + delta_h * state.C
    rank_mu = (Y * params.weights[:, None]).T @ Y
    C = (1.0 - params.c1 - params.c_mu) * state.C + params.c1 * rank_one + params.c_mu * rank_mu
    state.C = (C + C.T) / 2.0

    state.sigma = state.sigma * math.exp((c_sigma / params.d_sigma) * (norm_ps / params.chi_n - 1.0))

    if not (np.all(np.isfinite(state.m)) and np.isfinite(state.sigma) and np.all(np.isfinite(state.C))):
        raise NumericalError(f"non-finite state after generation {state.generation}")
    if state.sigma <= 0.0:
        raise NumericalError("step size collapsed to zero")

    _refresh_eigensystem(state, eigen_floor)
    state.generation += 1
    state.evaluations += len(candidates)
    return state


# ===========================
# Runs
# ===========================

def checkpoint_grid(budget: int) -> List[int]:
    """Every evaluation up to 100, then 1% geometric growth; always ends at `budget`"""
    if budget < 1:
        return []
    grid = list(range(1, min(100, budget) + 1))
    t = grid[-1]
    while t < budget:
        t = min(budget, max(t + 1, math.ceil(t * 1.01)))
        grid.append(t)
    return grid


def compress_trajectory(best_so_far: Sequence[float]) -> tuple:
    """Sample a per-evaluation trajectory at the checkpoint grid"""
    evaluations = len(best_so_far)
    checkpoints = checkpoint_grid(evaluations)
    return checkpoints, [float(best_so_far[t - 1]) for t in checkpoints]


def run(
    problem: Problem,
    params: CmaParams,
    source,
    budget: int,
    target_precision: float = 1e-8,
    seed: int = 0,
    eigen_floor: float = EIGEN_FLOOR
) -> RunRecord:
    """
    Optimize `problem` until the budget cannot fit another generation or the
    best precision reaches `target_precision`. No restarts, no bound handling.

    Args:
        problem: Benchmark instance (its evaluation counter is advanced)
        params: Strategy parameters
        source: SamplerSource providing raw unit-cube points
        budget: Maximum number of evaluations (>= lambda)
        target_precision: Stop once best precision <= this value
        seed: Seed recorded in the RunRecord

    Returns:
        RunRecord with the compressed best-so-far trajectory and per-generation batch hashes
    """
    if budget < params.lam:
        raise SpecError(f"budget {budget} is smaller than lambda {params.lam}")
    if problem.dim != params.dim:
        raise SpecError("problem and params dimensions differ")

    state = init_state(params)
    best = math.inf
    trajectory: List[float] = []
    hashes: List[str] = []

    while state.evaluations + params.lam <= budget:
        candidates = ask(state, params, source)
        hashes.append(batch_hash(np.array([c.raw for c in candidates])))

        X = np.array([c.x for c in candidates])
        f, precision = evaluate_batch(problem, X)
        for c, value, prec in zip(candidates, f, precision):
            c.fitness = float(value)
            best = min(best, float(prec))
            trajectory.append(best)

        tell(state, params, candidates, eigen_floor)
        if best <= target_precision:
            break

    checkpoints, precisions = compress_trajectory(trajectory)
    logger.debug(
        "f%d i%d d%d %s: %d evaluations, best precision %.3g",
        problem.function_id, problem.instance_id, problem.dim,
        source.generator.name, state.evaluations, best,
    )
    return RunRecord(
        fid=problem.function_id,
        iid=problem.instance_id,
        dim=problem.dim,
        sampler=source.generator,
        cache_size=source.cache_size,
        lam=params.lam,
        seed=seed,
        budget=budget,
        evaluations=state.evaluations,
        generations=state.generation,
        checkpoints=checkpoints,
        precisions=precisions,
        batch_hashes=hashes,
        target_precision=target_precision,
    )
